use serde::{Deserialize, Serialize};

use super::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay. Moment buffers are created on the first
/// step, one per parameter tensor in visitation order.
#[derive(Debug, Clone)]
pub struct AdamWState {
    pub config: AdamWConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamWState {
    pub fn new(config: AdamWConfig) -> Self {
        AdamWState {
            config,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update of every parameter of `model` from its accumulated gradients.
    pub fn step<P: Parameterized + ?Sized>(&mut self, model: &mut P) -> Result<()> {
        let AdamWConfig {
            learning_rate: lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let first_step = self.first_moment.is_empty();
        let mut idx = 0usize;
        let mut mismatch = None;
        let (m_all, v_all) = (&mut self.first_moment, &mut self.second_moment);
        model.visit_params(&mut |param, grad| {
            if first_step {
                m_all.push(vec![0.0; param.len()]);
                v_all.push(vec![0.0; param.len()]);
            }
            match (m_all.get_mut(idx), v_all.get_mut(idx)) {
                (Some(m), Some(v)) if m.len() == param.len() && grad.len() == param.len() => {
                    for i in 0..param.len() {
                        let g = grad[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        param[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * param[i]);
                    }
                }
                _ => {
                    mismatch.get_or_insert(idx);
                }
            }
            idx += 1;
        });
        if let Some(i) = mismatch.or((idx != m_all.len()).then_some(idx)) {
            return Err(Error::Data(format!("optimizer state does not match parameter tensor {i}")));
        }
        Ok(())
    }
}
