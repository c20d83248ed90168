use serde::{Deserialize, Serialize};

use super::params::Params;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    first: Params,
    second: Params,
    steps: u64,
}

impl Adam {
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        Self {
            config,
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected update. Weight decay `θ ← θ − lr·wd·θ` runs first
    /// and skips batch-norm scale/shift. A non-finite gradient aborts the
    /// step before anything is modified.
    pub fn step(
        &mut self,
        params: &mut Params,
        grads: &Params,
        lr: f64,
        weight_decay: f64,
    ) -> Result<(), ModelError> {
        if !grads.is_finite() {
            return Err(ModelError::NonFiniteGradient);
        }
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.steps as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut())
            .zip(grads.tensors());
        for (((p, m), v), g) in tensors {
            let decay = if p.kind.decays() {
                lr * weight_decay
            } else {
                0.0
            };
            for (((theta, m), v), &g) in p
                .values
                .iter_mut()
                .zip(m.values)
                .zip(v.values)
                .zip(g.values)
            {
                *theta -= decay * *theta;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        if !params.is_finite() {
            return Err(ModelError::NonFiniteParameters);
        }
        Ok(())
    }
}
