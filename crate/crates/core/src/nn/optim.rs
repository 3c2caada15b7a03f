use serde::{Deserialize, Serialize};

use super::param::ParamTensor;

/// RMSProp: `cache ← ρ·cache + (1−ρ)·g²`, `θ ← θ − lr·g / (√cache + ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsProp {
    pub rho: f64,
    pub eps: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self { rho: 0.9, eps: 1e-8 }
    }
}

impl RmsProp {
    /// Applies one update to every tensor and zeroes the gradients.
    pub fn step(&self, params: &mut [ParamTensor], learning_rate: f64) {
        for p in params {
            let ParamTensor {
                values,
                grad,
                cache,
                ..
            } = p;
            for ((v, g), c) in values.iter_mut().zip(grad.iter_mut()).zip(cache.iter_mut()) {
                *c = self.rho * *c + (1.0 - self.rho) * *g * *g;
                *v -= learning_rate * *g / (c.sqrt() + self.eps);
                *g = 0.0;
            }
        }
    }
}

pub fn rmsprop_step(params: &mut [ParamTensor], learning_rate: f64, rho: f64, eps: f64) {
    RmsProp { rho, eps }.step(params, learning_rate);
}
