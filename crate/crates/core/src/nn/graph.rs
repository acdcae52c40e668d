//! Reverse-mode tape over the forward kernels. Values are computed eagerly
//! as nodes are appended; `backward` sweeps the tape in reverse, routing
//! gradients to parent nodes and accumulating parameter gradients.

use crate::error::Result;
use crate::nn::ops::{self, Activation};
use crate::nn::{ConvFilters, Gradients, ParamId, ParamSet, Tensor};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    /// Row gather from an embedding table.
    Embed { table: ParamId, ids: Vec<usize> },
    /// Column-wise concatenation of equal-height matrices.
    ConcatCols { parts: Vec<NodeId> },
    /// Zero-padded 1-D convolution, pre-activation output `[n, f]`.
    Conv1d {
        input: NodeId,
        weights: ParamId,
        bias: ParamId,
        window: usize,
    },
    Activate { input: NodeId, activation: Activation },
    /// Column maxima of `[n, f]` with recorded argmax rows.
    MaxPoolCols { input: NodeId, argrows: Vec<usize> },
    /// Concatenation of vectors.
    ConcatVec { parts: Vec<NodeId> },
    /// `W x (+ b)`, pre-activation.
    Affine {
        input: NodeId,
        weights: ParamId,
        bias: Option<ParamId>,
    },
    /// Elementwise multiply by a fixed inverted-dropout mask.
    Dropout { input: NodeId, mask: Vec<f64> },
    Softmax { input: NodeId },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only computation tape over a parameter set.
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Graph<'p> {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        value.debug_assert_finite("graph op");
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Gathers embedding rows for `ids`; output `[ids.len(), d]`.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> NodeId {
        let t = self.params.get(table);
        let d = t.cols();
        let mut value = Tensor::zeros(&[ids.len(), d]);
        for (i, &id) in ids.iter().enumerate() {
            value.row_mut(i).copy_from_slice(t.row(id));
        }
        self.push(
            value,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let n = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Tensor::zeros(&[n, total]);
        for i in 0..n {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p);
                let w = src.cols();
                value.row_mut(i)[off..off + w].copy_from_slice(&src.row(i)[..w]);
                off += w;
            }
        }
        self.push(
            value,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        )
    }

    /// Pre-activation convolution of `input` (`[n, d]`) with one window's
    /// filters (`weights: [f, k, d]`).
    pub fn conv1d(&mut self, input: NodeId, weights: ParamId, bias: ParamId) -> Result<NodeId> {
        let filters = ConvFilters {
            window: self.params.get(weights).shape()[1],
            weights: self.params.get(weights).clone(),
            bias: self.params.get(bias).clone(),
        };
        let value = ops::conv_output(self.value(input), &filters, Activation::Identity)?;
        Ok(self.push(
            value,
            Op::Conv1d {
                input,
                weights,
                bias,
                window: filters.window,
            },
        ))
    }

    pub fn activate(&mut self, input: NodeId, activation: Activation) -> NodeId {
        let mut value = self.value(input).clone();
        for v in value.data_mut() {
            *v = activation.apply(*v);
        }
        self.push(value, Op::Activate { input, activation })
    }

    pub fn maxpool_cols(&mut self, input: NodeId) -> Result<NodeId> {
        let (value, argrows) = ops::maxpool_with_argmax(self.value(input))?;
        Ok(self.push(value, Op::MaxPoolCols { input, argrows }))
    }

    pub fn concat_vecs(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        self.push(
            Tensor::vector(data),
            Op::ConcatVec {
                parts: parts.to_vec(),
            },
        )
    }

    /// `W x (+ b)` as a pre-activation vector.
    pub fn affine(&mut self, input: NodeId, weights: ParamId, bias: Option<ParamId>) -> Result<NodeId> {
        let w = self.params.get(weights);
        let zero;
        let b = match bias {
            Some(id) => self.params.get(id),
            None => {
                zero = Tensor::zeros(&[w.rows()]);
                &zero
            }
        };
        let value = ops::dense_forward(
            self.value(input).data(),
            w,
            b,
            Activation::Identity,
        )?;
        Ok(self.push(value, Op::Affine { input, weights, bias }))
    }

    /// Applies a fixed inverted-dropout mask; the caller computes the mask
    /// so training steps stay deterministic and resumable.
    pub fn dropout(&mut self, input: NodeId, mask: Vec<f64>) -> NodeId {
        let mut value = self.value(input).clone();
        for (v, m) in value.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.push(value, Op::Dropout { input, mask })
    }

    pub fn softmax(&mut self, input: NodeId) -> NodeId {
        let value = Tensor::vector(ops::softmax(self.value(input).data()));
        self.push(value, Op::Softmax { input })
    }

    /// Reverse sweep. `seeds` supplies upstream gradients for output nodes;
    /// parameter gradients are accumulated into `grads`.
    pub fn backward(&self, seeds: &[(NodeId, Vec<f64>)], grads: &mut Gradients) {
        let mut node_grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, seed) in seeds {
            debug_assert_eq!(seed.len(), self.nodes[id.0].value.len());
            let slot = node_grads[id.0].get_or_insert_with(|| vec![0.0; seed.len()]);
            for (a, b) in slot.iter_mut().zip(seed) {
                *a += b;
            }
        }

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = node_grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Embed { table, ids } => {
                    let d = self.params.get(*table).cols();
                    let gt = grads.get_mut(*table);
                    for (i, &id) in ids.iter().enumerate() {
                        let dst = gt.row_mut(id);
                        for (a, b) in dst.iter_mut().zip(&g[i * d..(i + 1) * d]) {
                            *a += b;
                        }
                    }
                }
                Op::ConcatCols { parts } => {
                    let n = node.value.rows();
                    let total = node.value.cols();
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let slot = node_grads[p.0]
                            .get_or_insert_with(|| vec![0.0; self.nodes[p.0].value.len()]);
                        for i in 0..n {
                            for c in 0..w {
                                slot[i * w + c] += g[i * total + off + c];
                            }
                        }
                        off += w;
                    }
                }
                Op::Conv1d {
                    input,
                    weights,
                    bias,
                    window,
                } => {
                    let x = self.value(*input);
                    let (n, d) = (x.rows(), x.cols());
                    let w = self.params.get(*weights);
                    let f = w.shape()[0];
                    let k = *window;
                    let left = ops::pad_left(k);
                    {
                        let gb = grads.get_mut(*bias);
                        for i in 0..n {
                            for c in 0..f {
                                gb.data_mut()[c] += g[i * f + c];
                            }
                        }
                    }
                    {
                        let gw = grads.get_mut(*weights);
                        for i in 0..n {
                            for c in 0..f {
                                let go = g[i * f + c];
                                if go == 0.0 {
                                    continue;
                                }
                                for j in 0..k {
                                    let src = i as i64 + j as i64 - left as i64;
                                    if src < 0 || src >= n as i64 {
                                        continue;
                                    }
                                    let xr = x.row(src as usize);
                                    let dst = &mut gw.data_mut()[(c * k + j) * d..(c * k + j + 1) * d];
                                    for (a, b) in dst.iter_mut().zip(xr) {
                                        *a += go * b;
                                    }
                                }
                            }
                        }
                    }
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for i in 0..n {
                        for c in 0..f {
                            let go = g[i * f + c];
                            if go == 0.0 {
                                continue;
                            }
                            for j in 0..k {
                                let src = i as i64 + j as i64 - left as i64;
                                if src < 0 || src >= n as i64 {
                                    continue;
                                }
                                let wr = &w.data()[(c * k + j) * d..(c * k + j + 1) * d];
                                let dst = &mut slot[src as usize * d..(src as usize + 1) * d];
                                for (a, b) in dst.iter_mut().zip(wr) {
                                    *a += go * b;
                                }
                            }
                        }
                    }
                }
                Op::Activate { input, activation } => {
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for (i, (s, y)) in slot.iter_mut().zip(node.value.data()).enumerate() {
                        *s += g[i] * activation.derivative_from_output(*y);
                    }
                }
                Op::MaxPoolCols { input, argrows } => {
                    let f = node.value.len();
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for c in 0..f {
                        slot[argrows[c] * f + c] += g[c];
                    }
                }
                Op::ConcatVec { parts } => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.nodes[p.0].value.len();
                        let slot =
                            node_grads[p.0].get_or_insert_with(|| vec![0.0; len]);
                        for (a, b) in slot.iter_mut().zip(&g[off..off + len]) {
                            *a += b;
                        }
                        off += len;
                    }
                }
                Op::Affine {
                    input,
                    weights,
                    bias,
                } => {
                    let x = self.value(*input);
                    let w = self.params.get(*weights);
                    let (o_dim, i_dim) = (w.rows(), w.cols());
                    if let Some(bid) = bias {
                        let gb = grads.get_mut(*bid);
                        for (a, b) in gb.data_mut().iter_mut().zip(&g) {
                            *a += b;
                        }
                    }
                    {
                        let gw = grads.get_mut(*weights);
                        for o in 0..o_dim {
                            let go = g[o];
                            if go == 0.0 {
                                continue;
                            }
                            let dst = &mut gw.data_mut()[o * i_dim..(o + 1) * i_dim];
                            for (a, b) in dst.iter_mut().zip(x.data()) {
                                *a += go * b;
                            }
                        }
                    }
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for o in 0..o_dim {
                        let go = g[o];
                        if go == 0.0 {
                            continue;
                        }
                        let wr = w.row(o);
                        for (a, b) in slot.iter_mut().zip(wr) {
                            *a += go * b;
                        }
                    }
                }
                Op::Dropout { input, mask } => {
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for (i, (a, m)) in slot.iter_mut().zip(mask).enumerate() {
                        *a += g[i] * m;
                    }
                }
                Op::Softmax { input } => {
                    let y = node.value.data();
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let slot = node_grads[input.0]
                        .get_or_insert_with(|| vec![0.0; self.nodes[input.0].value.len()]);
                    for (i, s) in slot.iter_mut().enumerate() {
                        *s += y[i] * (g[i] - dot);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params_with(entries: &[(&str, Tensor)]) -> ParamSet {
        let mut p = ParamSet::new();
        for (name, t) in entries {
            p.add(name, t.clone());
        }
        p
    }

    #[test]
    fn maxpool_gradient_routes_to_first_argmax_only() {
        let params = params_with(&[("table", Tensor::from_vec(
            &[3, 2],
            vec![1.0, 5.0, 3.0, 5.0, 2.0, -1.0],
        ))]);
        let table = params.id("table").unwrap();
        let mut graph = Graph::new(&params);
        let rows = graph.embed(table, &[0, 1, 2]);
        let pooled = graph.maxpool_cols(rows).unwrap();
        assert_eq!(graph.value(pooled).data(), &[3.0, 5.0]);

        let mut grads = params.zero_grads();
        graph.backward(&[(pooled, vec![1.0, 1.0])], &mut grads);
        // Column 0 max at row 1; column 1 tie between rows 0 and 1 -> row 0.
        assert_eq!(grads.get(table).data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_affine_passes_gradient_through() {
        let params = params_with(&[
            ("x", Tensor::from_vec(&[1, 2], vec![3.0, -4.0])),
            ("w", Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0])),
        ]);
        let (x, w) = (params.id("x").unwrap(), params.id("w").unwrap());
        let mut graph = Graph::new(&params);
        let xv = graph.embed(x, &[0]);
        let pooled = graph.maxpool_cols(xv).unwrap(); // single row: identity reshape
        let y = graph.affine(pooled, w, None).unwrap();
        assert_eq!(graph.value(y).data(), &[3.0, -4.0]);

        let mut grads = params.zero_grads();
        graph.backward(&[(y, vec![0.25, -0.5])], &mut grads);
        assert_eq!(grads.get(x).data(), &[0.25, -0.5]);
    }

    /// Central-difference check of the whole tape over every parameter of a
    /// small composed graph (embed -> concat -> conv -> act -> pool ->
    /// affine -> softmax).
    #[test]
    fn composed_graph_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = ParamSet::new();
        params.add("emb_a", Tensor::uniform(&[5, 3], -0.5, 0.5, &mut rng));
        params.add("emb_b", Tensor::uniform(&[4, 2], -0.5, 0.5, &mut rng));
        params.add("conv_w", Tensor::uniform(&[4, 3, 5], -0.5, 0.5, &mut rng));
        params.add("conv_b", Tensor::uniform(&[4], -0.1, 0.1, &mut rng));
        params.add("out_w", Tensor::uniform(&[3, 4], -0.5, 0.5, &mut rng));
        params.add("out_b", Tensor::uniform(&[3], -0.1, 0.1, &mut rng));

        let ids_a = [0usize, 2, 4, 1];
        let ids_b = [3usize, 0, 1, 2];
        let mask = vec![1.25, 0.0, 1.25, 1.25];

        let loss_of = |params: &ParamSet| -> f64 {
            let mut graph = Graph::new(params);
            let a = graph.embed(params.id("emb_a").unwrap(), &ids_a);
            let b = graph.embed(params.id("emb_b").unwrap(), &ids_b);
            let x = graph.concat_cols(&[a, b]);
            let conv = graph
                .conv1d(x, params.id("conv_w").unwrap(), params.id("conv_b").unwrap())
                .unwrap();
            let act = graph.activate(conv, Activation::Tanh);
            let pooled = graph.maxpool_cols(act).unwrap();
            let dropped = graph.dropout(pooled, mask.clone());
            let logits = graph
                .affine(dropped, params.id("out_w").unwrap(), Some(params.id("out_b").unwrap()))
                .unwrap();
            let probs = graph.softmax(logits);
            // loss = -log q[1]
            -graph.value(probs).data()[1].max(1e-12).ln()
        };

        // Analytic gradients.
        let mut grads = params.zero_grads();
        {
            let mut graph = Graph::new(&params);
            let a = graph.embed(params.id("emb_a").unwrap(), &ids_a);
            let b = graph.embed(params.id("emb_b").unwrap(), &ids_b);
            let x = graph.concat_cols(&[a, b]);
            let conv = graph
                .conv1d(x, params.id("conv_w").unwrap(), params.id("conv_b").unwrap())
                .unwrap();
            let act = graph.activate(conv, Activation::Tanh);
            let pooled = graph.maxpool_cols(act).unwrap();
            let dropped = graph.dropout(pooled, mask.clone());
            let logits = graph
                .affine(dropped, params.id("out_w").unwrap(), Some(params.id("out_b").unwrap()))
                .unwrap();
            let probs = graph.softmax(logits);
            let q = graph.value(probs).data().to_vec();
            let mut seed = vec![0.0; q.len()];
            seed[1] = -1.0 / q[1].max(1e-12);
            graph.backward(&[(probs, seed)], &mut grads);
        }

        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for pi in 0..params.len() {
            let id = ParamId(pi);
            for e in 0..params.get(id).len() {
                let orig = params.get(id).data()[e];
                params.get_mut(id).data_mut()[e] = orig + h;
                let up = loss_of(&params);
                params.get_mut(id).data_mut()[e] = orig - h;
                let down = loss_of(&params);
                params.get_mut(id).data_mut()[e] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.get(id).data()[e];
                let rel = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-12);
                // Skip exact zero pairs (unused embedding rows).
                if analytic == 0.0 && numeric == 0.0 {
                    continue;
                }
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }
}
