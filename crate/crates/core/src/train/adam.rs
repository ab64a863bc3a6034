//! Adam with bias correction, one instance spanning every trainable tensor.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("non-finite gradient in tensor '{tensor}' at element {index}: {value}")]
    NonFiniteGradient {
        tensor: String,
        index: usize,
        value: f64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moments per registered tensor plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub cfg: AdamConfig,
}

impl AdamState {
    pub fn new(shapes: &[usize], cfg: AdamConfig) -> Self {
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            cfg,
        }
    }

    /// Increments the shared step counter; call once per optimizer step,
    /// before updating tensors.
    pub fn begin_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    /// Updates one tensor in place. `t` is the current step (from
    /// [`AdamState::begin_step`]).
    pub fn update_tensor(
        &mut self,
        tensor_idx: usize,
        name: &str,
        params: &mut [f64],
        grads: &[f64],
        lr: f64,
        t: u64,
    ) -> Result<(), AdamError> {
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        let m = &mut self.m[tensor_idx];
        let v = &mut self.v[tensor_idx];
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), m.len());
        for i in 0..params.len() {
            let g = grads[i];
            if !g.is_finite() {
                return Err(AdamError::NonFiniteGradient {
                    tensor: name.to_string(),
                    index: i,
                    value: g,
                });
            }
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
