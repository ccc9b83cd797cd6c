//! Adam and AdamW with bias correction.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// First/second moment accumulators keyed by parameter position. The caller
/// must pass the same parameter list, in the same order, on every step.
pub struct Optimizer {
    pub cfg: OptConfig,
    decoupled: bool,
    step: u64,
    moments: Vec<Moments>,
}

impl Optimizer {
    pub fn adam(cfg: OptConfig) -> Optimizer {
        Optimizer {
            cfg,
            decoupled: false,
            step: 0,
            moments: Vec::new(),
        }
    }

    /// Decoupled weight decay: parameters shrink by `1 − lr·weight_decay`
    /// before the Adam update.
    pub fn adamw(cfg: OptConfig) -> Optimizer {
        Optimizer {
            cfg,
            decoupled: true,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| Moments {
                    m: vec![0.0; p.len()],
                    v: vec![0.0; p.len()],
                })
                .collect();
        } else if self.moments.len() != params.len() {
            return Err(Error::State(format!(
                "optimizer saw {} parameter tensors before, now {}",
                self.moments.len(),
                params.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        for (p, mom) in params.iter_mut().zip(&mut self.moments) {
            if p.len() != mom.m.len() {
                return Err(Error::State("parameter shape changed between steps".into()));
            }
            let grad_finite = p.grad().iter().all(|g| g.is_finite());
            if !grad_finite {
                return Err(Error::Numeric("non-finite gradient in optimizer step".into()));
            }
            if self.decoupled && c.weight_decay != 0.0 {
                let shrink = 1.0 - c.lr * c.weight_decay;
                p.data.iter_mut().for_each(|x| *x *= shrink);
            }
            let data = &mut p.data;
            let grad = p.grad.as_ref().expect("trainable tensor");
            for i in 0..data.len() {
                let mut g = grad[i];
                if !self.decoupled && c.weight_decay != 0.0 {
                    g += c.weight_decay * data[i];
                }
                mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
                mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = mom.m[i] / bc1;
                let v_hat = mom.v[i] / bc2;
                data[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
