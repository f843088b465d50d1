//! Finite-difference verification of [`backward`] on random tiny problems.

use super::{backward, forward_selection, losses_with_frozen_selection, ActionnessLoss, AslModel, ModelConfig};
use crate::data::VideoRecord;
use crate::error::{AslError, Result};
use crate::numerics::{finite_diff_check, Matrix, MlpGrads, Prng};

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub seeds: usize,
    pub first_seed: u64,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub length: usize,
    pub k: usize,
    pub hidden: usize,
    pub eps: f64,
    pub tolerance: f64,
    /// Negates one analytic coordinate before comparing; the check must
    /// then fail.
    pub inject_sign_flip: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seeds: 25,
            first_seed: 0,
            num_classes: 3,
            feature_dim: 8,
            length: 16,
            k: 2,
            hidden: 16,
            eps: 1e-5,
            tolerance: 1e-4,
            inject_sign_flip: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckCase {
    pub seed: u64,
    pub loss: ActionnessLoss,
    /// Max relative error of `∂L_CLS/∂F`.
    pub cls_error: f64,
    /// Max relative error of `∂L_ASL/∂G`.
    pub asl_error: f64,
}

impl GradcheckCase {
    pub fn max_error(&self) -> f64 {
        self.cls_error.max(self.asl_error)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub cases: Vec<GradcheckCase>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.cases.iter().map(GradcheckCase::max_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.tolerance
    }
}

/// Checks both losses (GCE and BCE actionness) for every seed.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.k == 0 || config.k > config.length {
        return Err(AslError::Config(format!(
            "k {} outside 1..={}",
            config.k, config.length
        )));
    }
    if config.num_classes == 0 || config.feature_dim == 0 || config.hidden == 0 {
        return Err(AslError::Config("gradcheck dimensions must be positive".into()));
    }
    let mut cases = Vec::with_capacity(2 * config.seeds);
    for i in 0..config.seeds {
        let seed = config.first_seed + i as u64;
        for loss in [ActionnessLoss::Gce, ActionnessLoss::Bce] {
            cases.push(check_seed(config, seed, loss)?);
        }
    }
    Ok(GradcheckReport {
        cases,
        tolerance: config.tolerance,
    })
}

fn check_seed(config: &GradcheckConfig, seed: u64, loss: ActionnessLoss) -> Result<GradcheckCase> {
    let mut prng = Prng::new(seed);
    let model_config = ModelConfig {
        hidden: config.hidden,
        // k_for rounds down, so aim at the middle of the bucket for k
        k_ratio: (config.k as f64 + 0.5) / config.length as f64,
        actionness_loss: loss,
        ..ModelConfig::new(config.num_classes, config.feature_dim)
    };
    let mut model = AslModel::new(&model_config, &mut prng)?;
    // nonzero biases so every parameter block is exercised
    for net in [&mut model.classifier, &mut model.actionness] {
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = 0.1 * prng.normal());
        }
    }
    let (t, d) = (config.length, config.feature_dim);
    let x = Matrix::from_vec(t, d, (0..t * d).map(|_| prng.normal()).collect())?;
    let num_labels = 1 + prng.below(config.num_classes.min(2));
    let mut labels: Vec<usize> = (0..config.num_classes).collect();
    prng.shuffle(&mut labels);
    labels.truncate(num_labels);
    let record = VideoRecord::new(format!("gradcheck_{seed}"), x, labels, None)?;

    let state = forward_selection(&model, &record)?;
    if state.k != config.k {
        return Err(AslError::Contract(format!(
            "selected k = {}, asked for {}",
            state.k, config.k
        )));
    }
    let grads = backward(&model, &record, &state)?;
    let frozen = |m: &AslModel| -> Result<(f64, f64)> {
        let l = losses_with_frozen_selection(m, &record, &state.topk, &state.t_pos, &state.t_neg)?;
        Ok((l.l_cls, l.l_asl))
    };

    let analytic = |g: &MlpGrads| {
        let mut flat = g.flatten();
        if config.inject_sign_flip {
            if let Some(i) = (0..flat.len()).max_by(|&a, &b| flat[a].abs().total_cmp(&flat[b].abs())) {
                flat[i] = -flat[i];
            }
        }
        flat
    };

    let cls_error = finite_diff_check(
        |w| {
            let mut m = model.clone();
            m.classifier.set_flat(w).expect("parameter count unchanged");
            frozen(&m).map_or(f64::NAN, |l| l.0)
        },
        &model.classifier.flatten(),
        &analytic(&grads.classifier),
        config.eps,
    )?;
    let asl_error = finite_diff_check(
        |w| {
            let mut m = model.clone();
            m.actionness.set_flat(w).expect("parameter count unchanged");
            frozen(&m).map_or(f64::NAN, |l| l.1)
        },
        &model.actionness.flatten(),
        &analytic(&grads.actionness),
        config.eps,
    )?;
    Ok(GradcheckCase {
        seed,
        loss,
        cls_error,
        asl_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> GradcheckConfig {
        GradcheckConfig {
            seeds: 3,
            ..GradcheckConfig::default()
        }
    }

    #[test]
    fn passes_and_is_deterministic() {
        let a = run_gradcheck(&quick()).unwrap();
        assert!(a.passed(), "max error {}", a.max_error());
        assert_eq!(a.cases.len(), 6);
        assert_eq!(a, run_gradcheck(&quick()).unwrap());
    }

    #[test]
    fn sign_flip_is_caught() {
        let report = run_gradcheck(&GradcheckConfig {
            inject_sign_flip: true,
            ..quick()
        })
        .unwrap();
        assert!(!report.passed());
        assert!(report.cases.iter().all(|c| c.cls_error > 1e-4 && c.asl_error > 1e-4));
    }

    #[test]
    fn rejects_bad_k() {
        let bad = GradcheckConfig { k: 0, ..quick() };
        assert!(matches!(run_gradcheck(&bad), Err(AslError::Config(_))));
    }
}
