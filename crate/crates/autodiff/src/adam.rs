use serde::{Deserialize, Serialize};

use crate::{Gradients, Params, Result, Tensor, TensorError};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Params, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: params.tensors().iter().map(Tensor::zeros_like).collect(),
            v: params.tensors().iter().map(Tensor::zeros_like).collect(),
        }
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, params: &mut Params, grads: &Gradients) -> Result<()> {
        let shapes_ok = params.len() == self.m.len()
            && params.len() == grads.tensors().len()
            && params
                .tensors()
                .iter()
                .zip(grads.tensors())
                .zip(&self.m)
                .all(|((p, g), m)| p.shape() == g.shape() && p.shape() == m.shape());
        if !shapes_ok {
            let first_bad = params
                .tensors()
                .iter()
                .zip(grads.tensors())
                .find(|(p, g)| p.shape() != g.shape());
            let (lhs, rhs) = match first_bad {
                Some((p, g)) => (p.shape().to_vec(), g.shape().to_vec()),
                None => (vec![params.len()], vec![grads.tensors().len()]),
            };
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs,
                rhs,
            });
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powf(self.t as f64);
        let bc2 = 1.0 - beta2.powf(self.t as f64);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p
                .values_mut()
                .iter_mut()
                .zip(g.values())
                .zip(m.values_mut())
                .zip(v.values_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
