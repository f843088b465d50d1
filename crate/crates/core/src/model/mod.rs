//! The action selection model: classifier `F` producing the class
//! activation sequence, actionness network `G`, fused top-k selection and
//! the two training losses.

mod checkpoint;
mod gradcheck;
mod loss;
mod selection;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{run_gradcheck, GradcheckCase, GradcheckConfig, GradcheckReport};
pub use loss::{
    asl_loss, asl_loss_logit_grad, classification_loss, classification_loss_grad, ActionnessLoss, LossBreakdown,
    PROB_FLOOR,
};
pub(crate) use selection::split_mask;
pub use selection::{build_pos_neg, fuse_selection, pooled_scores, softmax, topk_per_class, video_class_probs};

use crate::data::VideoRecord;
use crate::error::{AslError, Result};
use crate::numerics::{sigmoid, Matrix, Mlp, MlpCache, MlpGrads, Prng};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub beta: f64,
    pub k_ratio: f64,
    pub q: f64,
    pub actionness_loss: ActionnessLoss,
}

impl ModelConfig {
    pub fn new(num_classes: usize, feature_dim: usize) -> Self {
        ModelConfig {
            num_classes,
            feature_dim,
            hidden: 512,
            beta: 0.5,
            k_ratio: 0.125,
            q: 0.7,
            actionness_loss: ActionnessLoss::Gce,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AslModel {
    /// `F`: per-instance class scores, `d → C`.
    pub classifier: Mlp,
    /// `G`: per-instance actionness logit, `d → 1`.
    pub actionness: Mlp,
    pub beta: f64,
    pub k_ratio: f64,
    pub q: f64,
    pub actionness_loss: ActionnessLoss,
}

impl AslModel {
    /// Initialises `F` then `G` from `prng`.
    pub fn new(config: &ModelConfig, prng: &mut Prng) -> Result<Self> {
        let classifier = Mlp::new(config.feature_dim, config.hidden, config.num_classes, prng)?;
        let actionness = Mlp::new(config.feature_dim, config.hidden, 1, prng)?;
        AslModel::from_parts(
            classifier,
            actionness,
            config.beta,
            config.k_ratio,
            config.q,
            config.actionness_loss,
        )
    }

    pub fn from_parts(
        classifier: Mlp,
        actionness: Mlp,
        beta: f64,
        k_ratio: f64,
        q: f64,
        actionness_loss: ActionnessLoss,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(AslError::Config(format!("beta {beta} outside [0, 1]")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(AslError::Config(format!("q {q} outside (0, 1]")));
        }
        if !(k_ratio > 0.0 && k_ratio <= 1.0) {
            return Err(AslError::Config(format!("k_ratio {k_ratio} outside (0, 1]")));
        }
        if classifier.in_dim() != actionness.in_dim() {
            return Err(AslError::shape(
                "AslModel feature dims",
                classifier.in_dim(),
                actionness.in_dim(),
            ));
        }
        if actionness.out_dim() != 1 {
            return Err(AslError::shape("AslModel actionness output", 1, actionness.out_dim()));
        }
        Ok(AslModel {
            classifier,
            actionness,
            beta,
            k_ratio,
            q,
            actionness_loss,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.in_dim()
    }

    /// `k = max(1, floor(T · k_ratio))`, never above `T`.
    pub fn k_for(&self, len: usize) -> usize {
        // tolerance so that e.g. 0.3 · 10 floors to 3
        let k = (len as f64 * self.k_ratio + 1e-9).floor() as usize;
        k.clamp(1, len.max(1))
    }
}

/// Class activation sequence, `C × T`, raw scores.
pub fn compute_cas(classifier: &Mlp, features: &Matrix) -> Result<Matrix> {
    Ok(classifier.predict(features)?.transpose())
}

/// `a_t = σ(G(x_t))`.
pub fn compute_actionness(actionness: &Mlp, features: &Matrix) -> Result<Vec<f64>> {
    let logits = actionness.predict(features)?;
    Ok(logits.as_slice().iter().map(|&z| sigmoid(z)).collect())
}

/// Everything the forward pass decides for one video.
#[derive(Clone, Debug)]
pub struct SelectionState {
    /// `s_{c,t}`, `C × T`.
    pub cas: Matrix,
    /// `a_t`.
    pub actionness: Vec<f64>,
    /// `h_{c,t}`, `C × T`.
    pub fused: Matrix,
    /// `T^c` for every class, ascending indices.
    pub topk: Vec<Vec<usize>>,
    pub t_pos: Vec<usize>,
    pub t_neg: Vec<usize>,
    pub class_probs: Vec<f64>,
    pub k: usize,
    classifier_cache: MlpCache,
    actionness_cache: MlpCache,
}

impl SelectionState {
    /// Replaces the actionness targets, e.g. after subsampling `T_pos`.
    pub fn set_partition(&mut self, t_pos: Vec<usize>, t_neg: Vec<usize>) -> Result<()> {
        let len = self.actionness.len();
        let mut seen = vec![false; len];
        for &t in t_pos.iter().chain(&t_neg) {
            if t >= len || seen[t] {
                return Err(AslError::Contract(format!(
                    "T_pos/T_neg must partition 0..{len}, index {t} repeated or out of range"
                )));
            }
            seen[t] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(AslError::Contract(format!("T_pos/T_neg do not cover 0..{len}")));
        }
        self.t_pos = t_pos;
        self.t_neg = t_neg;
        Ok(())
    }
}

/// Forward pass of both networks plus selection, without losses.
pub fn forward_selection(model: &AslModel, record: &VideoRecord) -> Result<SelectionState> {
    let features = &record.features;
    if features.rows() == 0 {
        return Err(AslError::Contract(format!("video {} has no instances", record.id)));
    }
    let (class_out, classifier_cache) = model.classifier.forward(features)?;
    let (logits, actionness_cache) = model.actionness.forward(features)?;
    let cas = class_out.transpose();
    let actionness: Vec<f64> = logits.as_slice().iter().map(|&z| sigmoid(z)).collect();
    let fused = fuse_selection(&actionness, &cas, model.beta)?;
    let k = model.k_for(features.rows());
    let topk = topk_per_class(&fused, k)?;
    let class_probs = video_class_probs(&cas, &topk);
    let (t_pos, t_neg) = if record.labels.is_empty() {
        (Vec::new(), (0..features.rows()).collect())
    } else {
        build_pos_neg(&topk, &record.labels, features.rows())?
    };
    Ok(SelectionState {
        cas,
        actionness,
        fused,
        topk,
        t_pos,
        t_neg,
        class_probs,
        k,
        classifier_cache,
        actionness_cache,
    })
}

/// Both losses for the selections recorded in `state`.
pub fn state_losses(model: &AslModel, record: &VideoRecord, state: &SelectionState) -> Result<LossBreakdown> {
    let l_cls = classification_loss(&state.class_probs, &record.labels)?;
    let l_asl = asl_loss(
        &state.actionness,
        &state.t_pos,
        &state.t_neg,
        model.q,
        model.actionness_loss,
    );
    Ok(LossBreakdown::new(l_cls, l_asl))
}

pub fn forward_and_loss(model: &AslModel, record: &VideoRecord) -> Result<(SelectionState, LossBreakdown)> {
    if record.labels.is_empty() {
        return Err(AslError::Contract(format!("video {} has no labels", record.id)));
    }
    let state = forward_selection(model, record)?;
    let losses = state_losses(model, record, &state)?;
    Ok((state, losses))
}

/// Losses with the discrete choices (`T^c`, `T_pos`, `T_neg`) held fixed and
/// the networks re-evaluated. This is the function [`backward`] differentiates.
pub fn losses_with_frozen_selection(
    model: &AslModel,
    record: &VideoRecord,
    topk: &[Vec<usize>],
    t_pos: &[usize],
    t_neg: &[usize],
) -> Result<LossBreakdown> {
    let cas = compute_cas(&model.classifier, &record.features)?;
    let actionness = compute_actionness(&model.actionness, &record.features)?;
    let probs = video_class_probs(&cas, topk);
    let l_cls = classification_loss(&probs, &record.labels)?;
    let l_asl = asl_loss(&actionness, t_pos, t_neg, model.q, model.actionness_loss);
    Ok(LossBreakdown::new(l_cls, l_asl))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub classifier: MlpGrads,
    pub actionness: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_for(model: &AslModel) -> Self {
        ModelGrads {
            classifier: MlpGrads::zeros_for(&model.classifier),
            actionness: MlpGrads::zeros_for(&model.actionness),
        }
    }

    pub fn accumulate(&mut self, other: &ModelGrads) {
        self.classifier.accumulate(&other.classifier);
        self.actionness.accumulate(&other.actionness);
    }

    pub fn scale(&mut self, factor: f64) {
        self.classifier.scale(factor);
        self.actionness.scale(factor);
    }
}

/// Gradients of `l_cls + l_asl` with the selections in `state` frozen.
///
/// `F` only receives gradient from `l_cls` through the pooled means, `G`
/// only from `l_asl`; nothing flows through the top-k choice.
pub fn backward(model: &AslModel, record: &VideoRecord, state: &SelectionState) -> Result<ModelGrads> {
    let c_count = model.num_classes();
    let len = state.actionness.len();
    if state.cas.shape() != (c_count, len) || state.classifier_cache.rows() != len {
        return Err(AslError::shape(
            "backward state",
            format!("{c_count}x{len}"),
            format!("{:?}", state.cas.shape()),
        ));
    }

    let pooled_grad = classification_loss_grad(&state.class_probs, &record.labels)?;
    // dL/dF_out is T × C (network output layout)
    let mut cas_grad = Matrix::zeros(len, c_count);
    for (c, set) in state.topk.iter().enumerate() {
        let g = pooled_grad[c] / set.len() as f64;
        for &t in set {
            cas_grad[(t, c)] += g;
        }
    }
    let (classifier, _) = model.classifier.backward(&state.classifier_cache, &cas_grad)?;

    let logit_grad = asl_loss_logit_grad(
        &state.actionness,
        &state.t_pos,
        &state.t_neg,
        model.q,
        model.actionness_loss,
    );
    let logit_grad = Matrix::from_vec(len, 1, logit_grad)?;
    let (actionness, _) = model.actionness.backward(&state.actionness_cache, &logit_grad)?;

    Ok(ModelGrads { classifier, actionness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;

    fn tiny_model(seed: u64, c: usize, d: usize, hidden: usize) -> AslModel {
        let mut config = ModelConfig::new(c, d);
        config.hidden = hidden;
        AslModel::new(&config, &mut Prng::new(seed)).unwrap()
    }

    fn tiny_record(seed: u64, t: usize, d: usize, labels: Vec<usize>) -> VideoRecord {
        let mut p = Prng::new(seed);
        let x = Matrix::from_vec(t, d, (0..t * d).map(|_| p.normal()).collect()).unwrap();
        VideoRecord::new("v", x, labels, None).unwrap()
    }

    #[test]
    fn k_rounding() {
        let m = tiny_model(0, 2, 3, 4);
        assert_eq!(m.k_for(64), 8);
        assert_eq!(m.k_for(750), 93);
        assert_eq!(m.k_for(5), 1);
        assert_eq!(m.k_for(1), 1);
    }

    #[test]
    fn zero_model_losses() {
        let mut m = tiny_model(1, 4, 3, 5);
        m.classifier = m.classifier.zeros_like();
        m.actionness = m.actionness.zeros_like();
        let r = tiny_record(2, 16, 3, vec![1]);
        let (state, losses) = forward_and_loss(&m, &r).unwrap();
        assert!(state.class_probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(state.actionness.iter().all(|&a| a == 0.5));
        assert!((losses.l_cls - 4f64.ln()).abs() < 1e-12);
        let expect = 2.0 * (1.0 - 0.5f64.powf(0.7)) / 0.7;
        assert!((losses.l_asl - expect).abs() < 1e-12);
        assert_eq!(losses.total, losses.l_cls + losses.l_asl);
    }

    #[test]
    fn cas_and_actionness_match_network_outputs() {
        let m = tiny_model(3, 3, 4, 6);
        let r = tiny_record(4, 5, 4, vec![0]);
        let cas = compute_cas(&m.classifier, &r.features).unwrap();
        assert_eq!(cas, m.classifier.predict(&r.features).unwrap().transpose());
        let a = compute_actionness(&m.actionness, &r.features).unwrap();
        let logits = m.actionness.predict(&r.features).unwrap();
        for (x, z) in a.iter().zip(logits.as_slice()) {
            assert!((*x - 1.0 / (1.0 + (-z).exp())).abs() < 1e-15);
        }
        let one = tiny_record(5, 1, 4, vec![0]);
        assert_eq!(compute_cas(&m.classifier, &one.features).unwrap().shape(), (3, 1));
    }

    #[test]
    fn beta_zero_selects_by_cas_only() {
        let mut m = tiny_model(6, 3, 4, 6);
        m.beta = 0.0;
        let r = tiny_record(7, 16, 4, vec![2]);
        let state = forward_selection(&m, &r).unwrap();
        assert_eq!(state.topk, topk_per_class(&state.cas, state.k).unwrap());
    }

    #[test]
    fn loss_recomposes_from_parts() {
        let m = tiny_model(8, 3, 4, 6);
        let r = tiny_record(9, 16, 4, vec![0, 2]);
        let (state, losses) = forward_and_loss(&m, &r).unwrap();
        let l_cls = classification_loss(&video_class_probs(&state.cas, &state.topk), &r.labels).unwrap();
        let l_asl = asl_loss(&state.actionness, &state.t_pos, &state.t_neg, 0.7, ActionnessLoss::Gce);
        assert_eq!(losses, LossBreakdown::new(l_cls, l_asl));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for variant in [ActionnessLoss::Gce, ActionnessLoss::Bce] {
            let mut m = tiny_model(10, 3, 5, 7);
            m.actionness_loss = variant;
            let r = tiny_record(11, 16, 5, vec![1]);
            let state = forward_selection(&m, &r).unwrap();
            let grads = backward(&m, &r, &state).unwrap();
            let frozen = |model: &AslModel| {
                losses_with_frozen_selection(model, &r, &state.topk, &state.t_pos, &state.t_neg)
                    .unwrap()
                    .total
            };
            let err_f = finite_diff_check(
                |w| {
                    let mut mm = m.clone();
                    mm.classifier.set_flat(w).unwrap();
                    frozen(&mm)
                },
                &m.classifier.flatten(),
                &grads.classifier.flatten(),
                1e-5,
            )
            .unwrap();
            let err_g = finite_diff_check(
                |w| {
                    let mut mm = m.clone();
                    mm.actionness.set_flat(w).unwrap();
                    frozen(&mm)
                },
                &m.actionness.flatten(),
                &grads.actionness.flatten(),
                1e-5,
            )
            .unwrap();
            assert!(err_f < 1e-4 && err_g < 1e-4, "{variant:?}: F {err_f}, G {err_g}");
        }
    }

    #[test]
    fn cross_terms_have_no_gradient() {
        let m = tiny_model(12, 3, 4, 6);
        let r = tiny_record(13, 16, 4, vec![0]);
        let state = forward_selection(&m, &r).unwrap();
        let zeros = vec![0.0; m.classifier.num_params()];
        // l_asl does not depend on F once T_pos is frozen
        let err = finite_diff_check(
            |w| {
                let mut mm = m.clone();
                mm.classifier.set_flat(w).unwrap();
                losses_with_frozen_selection(&mm, &r, &state.topk, &state.t_pos, &state.t_neg)
                    .unwrap()
                    .l_asl
            },
            &m.classifier.flatten(),
            &zeros,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
        let zeros = vec![0.0; m.actionness.num_params()];
        let err = finite_diff_check(
            |w| {
                let mut mm = m.clone();
                mm.actionness.set_flat(w).unwrap();
                losses_with_frozen_selection(&mm, &r, &state.topk, &state.t_pos, &state.t_neg)
                    .unwrap()
                    .l_cls
            },
            &m.actionness.flatten(),
            &zeros,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn set_partition_validates() {
        let m = tiny_model(14, 2, 3, 4);
        let r = tiny_record(15, 4, 3, vec![0]);
        let mut state = forward_selection(&m, &r).unwrap();
        assert!(state.set_partition(vec![0, 1], vec![2, 3]).is_ok());
        assert!(state.set_partition(vec![0, 1], vec![1, 2, 3]).is_err());
        assert!(state.set_partition(vec![0], vec![2, 3]).is_err());
    }
}
