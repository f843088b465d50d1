use super::mlp::{Mlp, MlpGrads};
use crate::error::{AslError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment buffers for one network. Decoupled weight decay is applied as
/// `p -= lr * wd * p` before the bias-corrected Adam update.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        let grad_tensors = grads.tensors();
        let shapes_match = grad_tensors.len() == self.m.len()
            && grad_tensors.iter().zip(&self.m).all(|(g, m)| g.len() == m.len())
            && params.tensors().iter().zip(&self.m).all(|(p, m)| p.len() == m.len());
        if !shapes_match {
            return Err(AslError::shape(
                "adam_step",
                format!("{} tensors", self.m.len()),
                format!("{} gradient tensors", grad_tensors.len()),
            ));
        }
        let mut offset = 0;
        for g in &grad_tensors {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(AslError::NonFinite {
                    what: "gradient".into(),
                    index: offset + i,
                });
            }
            offset += g.len();
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad_tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                if weight_decay != 0.0 {
                    p[i] -= lr * weight_decay * p[i];
                }
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
