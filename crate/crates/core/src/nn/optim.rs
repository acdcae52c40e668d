//! RMSprop parameter updates.

use serde::{Deserialize, Serialize};

use crate::nn::{Gradients, ParamSet, Tensor};

/// RMSprop hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    cache: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ParamSet) -> OptimizerState {
        OptimizerState {
            cache: params
                .iter()
                .map(|(_, _, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn cache(&self, index: usize) -> &Tensor {
        &self.cache[index]
    }
}

/// One update: `cache <- rho*cache + (1-rho)*g^2`,
/// `param <- param - lr * g / (sqrt(cache) + eps)`.
pub fn rmsprop_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut OptimizerState,
    cfg: &RmsProp,
) {
    for (id, g) in grads.iter() {
        let cache = &mut state.cache[id.index()];
        let p = params.get_mut(id);
        for ((pv, cv), gv) in p
            .data_mut()
            .iter_mut()
            .zip(cache.data_mut())
            .zip(g.data())
        {
            *cv = cfg.rho * *cv + (1.0 - cfg.rho) * gv * gv;
            *pv -= cfg.learning_rate * gv / (cv.sqrt() + cfg.epsilon);
        }
    }
}
