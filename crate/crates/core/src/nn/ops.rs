//! Forward kernels: multi-window 1-D convolution with zero padding,
//! column-wise max-pooling, dense layers, inverted dropout and softmax.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation {other}")),
        }
    }
}

/// Train/eval switch for stochastic ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Filters and bias for one window size: weights `[num_filters, k, d_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilters {
    pub window: usize,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Filter banks over multiple window sizes sharing one input width.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilterBank {
    pub banks: Vec<ConvFilters>,
}

impl ConvFilterBank {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let mut d_in = None;
        for b in &self.banks {
            if !seen.insert(b.window) {
                return Err(Error::ShapeMismatch(format!(
                    "duplicate window size {}",
                    b.window
                )));
            }
            let [f, k, d] = match b.weights.shape() {
                [f, k, d] => [*f, *k, *d],
                other => {
                    return Err(Error::ShapeMismatch(format!(
                        "filter tensor must be [f, k, d], got {other:?}"
                    )))
                }
            };
            if k != b.window {
                return Err(Error::ShapeMismatch(format!(
                    "window {} filters have width {k}",
                    b.window
                )));
            }
            if b.bias.len() != f {
                return Err(Error::ShapeMismatch(format!(
                    "window {}: {f} filters but {} bias entries",
                    b.window,
                    b.bias.len()
                )));
            }
            if *d_in.get_or_insert(d) != d {
                return Err(Error::ShapeMismatch(
                    "input width differs across windows".into(),
                ));
            }
        }
        Ok(())
    }

    /// Total number of filters across windows (the sentence-vector width).
    pub fn total_filters(&self) -> usize {
        self.banks.iter().map(|b| b.weights.shape()[0]).sum()
    }
}

/// Zero-pad split for window `k`: output position `i` reads input rows
/// `i - left .. i - left + k`, so output length equals input length. The
/// extra pad for even windows goes on the left.
pub(crate) fn pad_left(window: usize) -> usize {
    window / 2
}

/// Convolution of `x` (`[n, d]`) with one filter bank, producing an `[n, f]`
/// map with the activation applied.
pub fn conv_output(x: &Tensor, filters: &ConvFilters, activation: Activation) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::EmptyInput("convolution over an empty sequence"));
    }
    let [f, k, dw] = match filters.weights.shape() {
        [f, k, d] => [*f, *k, *d],
        other => {
            return Err(Error::ShapeMismatch(format!(
                "filter tensor must be [f, k, d], got {other:?}"
            )))
        }
    };
    if dw != d {
        return Err(Error::ShapeMismatch(format!(
            "input width {d} does not match filter width {dw}"
        )));
    }
    let left = pad_left(k);
    let w = filters.weights.data();
    let bias = filters.bias.data();
    let mut out = Tensor::zeros(&[n, f]);
    for i in 0..n {
        let row = out.row_mut(i);
        for (c, o) in row.iter_mut().enumerate() {
            let mut acc = bias[c];
            for j in 0..k {
                let src = i as i64 + j as i64 - left as i64;
                if src < 0 || src >= n as i64 {
                    continue; // zero padding
                }
                let xr = x.row(src as usize);
                let wr = &w[(c * k + j) * d..(c * k + j + 1) * d];
                acc += xr.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
            }
            *o = activation.apply(acc);
        }
    }
    out.debug_assert_finite("conv");
    Ok(out)
}

/// Per-window feature maps for the whole bank.
pub fn conv_forward(
    x: &Tensor,
    bank: &ConvFilterBank,
    activation: Activation,
) -> Result<Vec<Tensor>> {
    bank.validate()?;
    bank.banks
        .iter()
        .map(|b| conv_output(x, b, activation))
        .collect()
}

/// Column-wise maximum of an `[n, f]` feature map plus the winning row per
/// column (first row on ties, for deterministic subgradients).
pub fn maxpool_with_argmax(map: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (n, f) = (map.rows(), map.cols());
    if n == 0 || f == 0 {
        return Err(Error::EmptyInput("max-pooling over an empty feature map"));
    }
    let mut best = map.row(0).to_vec();
    let mut arg = vec![0usize; f];
    for i in 1..n {
        for (c, &v) in map.row(i).iter().enumerate() {
            if v > best[c] {
                best[c] = v;
                arg[c] = i;
            }
        }
    }
    Ok((Tensor::vector(best), arg))
}

/// Column-wise maximum of a feature map.
pub fn maxpool(map: &Tensor) -> Result<Tensor> {
    maxpool_with_argmax(map).map(|(t, _)| t)
}

/// `activation(W x + b)` with `W: [out, in]`.
pub fn dense_forward(
    x: &[f64],
    weights: &Tensor,
    bias: &Tensor,
    activation: Activation,
) -> Result<Tensor> {
    let (out_dim, in_dim) = (weights.rows(), weights.cols());
    if x.len() != in_dim || bias.len() != out_dim {
        return Err(Error::ShapeMismatch(format!(
            "dense: x[{}] W[{out_dim},{in_dim}] b[{}]",
            x.len(),
            bias.len()
        )));
    }
    let mut out = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = weights.row(o);
        let acc = bias.data()[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        out.push(activation.apply(acc));
    }
    let t = Tensor::vector(out);
    t.debug_assert_finite("dense");
    Ok(t)
}

/// Inverted-dropout mask: each entry 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`; deterministic per seed.
pub fn dropout_mask(len: usize, rate: f64, seed: u64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let mut r = rng::stream(seed, "dropout", &[]);
    let scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if r.gen::<f64>() < rate { 0.0 } else { scale })
        .collect()
}

/// Inverted dropout: identity in eval mode.
pub fn dropout(x: &[f64], rate: f64, phase: Phase, seed: u64) -> Vec<f64> {
    match phase {
        Phase::Eval => x.to_vec(),
        Phase::Train => {
            let mask = dropout_mask(x.len(), rate, seed);
            x.iter().zip(mask).map(|(v, m)| v * m).collect()
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
