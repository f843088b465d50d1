use crate::error::{AslError, Result};

/// Floor applied inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Loss used to train the actionness network on `T_pos` / `T_neg`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionnessLoss {
    /// Generalized cross entropy `(1 - p^q) / q`.
    Gce,
    /// Binary cross entropy, the `q → 0` limit of [`ActionnessLoss::Gce`].
    Bce,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_cls: f64,
    pub l_asl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l_cls: f64, l_asl: f64) -> Self {
        LossBreakdown {
            l_cls,
            l_asl,
            total: l_cls + l_asl,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_cls.is_finite() && self.l_asl.is_finite() && self.total.is_finite()
    }
}

/// Multiple-instance classification loss `-(1/|Y|) Σ_{c∈Y} ln p_c`.
pub fn classification_loss(probs: &[f64], labels: &[usize]) -> Result<f64> {
    check_labels(probs.len(), labels)?;
    let sum: f64 = labels.iter().map(|&c| probs[c].max(PROB_FLOOR).ln()).sum();
    Ok(-sum / labels.len() as f64)
}

/// Gradient of [`classification_loss`] w.r.t. the pooled class scores fed to
/// the softmax: `p_j - [j ∈ Y] / |Y|`, with floored labels contributing none.
pub fn classification_loss_grad(probs: &[f64], labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(probs.len(), labels)?;
    let w = 1.0 / labels.len() as f64;
    let mut grad = vec![0.0; probs.len()];
    for &c in labels {
        if probs[c] <= PROB_FLOOR {
            continue;
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g += w * probs[j];
        }
        grad[c] -= w;
    }
    Ok(grad)
}

fn check_labels(num_classes: usize, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(AslError::Contract(
            "classification loss needs a non-empty label set".into(),
        ));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= num_classes) {
        return Err(AslError::Contract(format!("label {c} outside {num_classes} classes")));
    }
    Ok(())
}

/// Actionness loss: mean over `T_pos` of the positive term plus mean over
/// `T_neg` of the negative term. An empty set contributes zero.
pub fn asl_loss(actionness: &[f64], t_pos: &[usize], t_neg: &[usize], q: f64, variant: ActionnessLoss) -> f64 {
    let term = |set: &[usize], f: &dyn Fn(f64) -> f64| -> f64 {
        if set.is_empty() {
            0.0
        } else {
            set.iter().map(|&t| f(actionness[t])).sum::<f64>() / set.len() as f64
        }
    };
    match variant {
        ActionnessLoss::Gce => {
            term(t_pos, &|a| (1.0 - a.powf(q)) / q) + term(t_neg, &|a| (1.0 - (1.0 - a).powf(q)) / q)
        }
        ActionnessLoss::Bce => {
            term(t_pos, &|a| -a.max(PROB_FLOOR).ln()) + term(t_neg, &|a| -(1.0 - a).max(PROB_FLOOR).ln())
        }
    }
}

/// Gradient of [`asl_loss`] w.r.t. the actionness logits `z_t`, where
/// `a_t = σ(z_t)`. Written in closed form so saturated sigmoids stay finite.
pub fn asl_loss_logit_grad(
    actionness: &[f64],
    t_pos: &[usize],
    t_neg: &[usize],
    q: f64,
    variant: ActionnessLoss,
) -> Vec<f64> {
    let mut grad = vec![0.0; actionness.len()];
    if !t_pos.is_empty() {
        let w = 1.0 / t_pos.len() as f64;
        for &t in t_pos {
            let a = actionness[t];
            grad[t] += match variant {
                // d/dz (1 - a^q)/q = -a^q (1 - a)
                ActionnessLoss::Gce => -w * a.powf(q) * (1.0 - a),
                ActionnessLoss::Bce if a > PROB_FLOOR => -w * (1.0 - a),
                ActionnessLoss::Bce => 0.0,
            };
        }
    }
    if !t_neg.is_empty() {
        let w = 1.0 / t_neg.len() as f64;
        for &t in t_neg {
            let a = actionness[t];
            grad[t] += match variant {
                // d/dz (1 - (1-a)^q)/q = a (1 - a)^q
                ActionnessLoss::Gce => w * a * (1.0 - a).powf(q),
                ActionnessLoss::Bce if 1.0 - a > PROB_FLOOR => w * a,
                ActionnessLoss::Bce => 0.0,
            };
        }
    }
    grad
}
