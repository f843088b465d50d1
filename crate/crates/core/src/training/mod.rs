//! Mini-batch training of `F` and `G` under the joint, sequential and
//! alternating schedules, with per-epoch selection diagnostics.

mod diagnostics;
mod log;

pub use diagnostics::{g_membership_accuracy, subsample_tpos, tpos_action_fraction, tpos_consecutive_iou};
pub use log::{read_epoch_log_csv, write_epoch_log_csv, EPOCH_LOG_HEADER};

use crate::data::{batch_iter, Dataset};
use crate::error::{AslError, Result};
use crate::evaluation::{recall_at_n, RecallAtN};
use crate::model::{
    backward, compute_actionness, forward_selection, state_losses, ActionnessLoss, AslModel, ModelConfig, ModelGrads,
};
use crate::numerics::{AdamConfig, AdamState, Prng};

/// Stream offset for `T_pos` subsampling draws.
const CAP_STREAM: u64 = 2 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Update `F` and `G` on every step.
    Joint,
    /// `F` alone for the first half of the epochs, then `G` alone.
    Sequential,
    /// `F` alone for `f_epochs`, then `G` alone for `g_epochs`, repeating.
    Alternating { f_epochs: usize, g_epochs: usize },
}

impl Schedule {
    /// Which networks are updated in `epoch` out of `total`: `(F, G)`.
    pub fn active(&self, epoch: usize, total: usize) -> (bool, bool) {
        match *self {
            Schedule::Joint => (true, true),
            Schedule::Sequential => {
                let f_phase = epoch < total.div_ceil(2);
                (f_phase, !f_phase)
            }
            Schedule::Alternating { f_epochs, g_epochs } => {
                let f_phase = epoch % (f_epochs + g_epochs) < f_epochs;
                (f_phase, !f_phase)
            }
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = AslError;

    /// `joint`, `f-then-g`, or `alternate:N:M`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Schedule::Joint),
            "f-then-g" | "sequential" => Ok(Schedule::Sequential),
            _ => {
                let bad = || AslError::Config(format!("unknown schedule {s:?}"));
                let rest = s.strip_prefix("alternate:").ok_or_else(bad)?;
                let (n, m) = rest.split_once(':').ok_or_else(bad)?;
                let f_epochs: usize = n.parse().map_err(|_| bad())?;
                let g_epochs: usize = m.parse().map_err(|_| bad())?;
                if f_epochs == 0 || g_epochs == 0 {
                    return Err(bad());
                }
                Ok(Schedule::Alternating { f_epochs, g_epochs })
            }
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::Joint => write!(f, "joint"),
            Schedule::Sequential => write!(f, "f-then-g"),
            Schedule::Alternating { f_epochs, g_epochs } => write!(f, "alternate:{f_epochs}:{g_epochs}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub q: f64,
    pub beta: f64,
    pub k_ratio: f64,
    pub hidden: usize,
    pub actionness_loss: ActionnessLoss,
    /// Caps the fraction of action instances in `T_pos` (needs ground truth).
    pub class_rate_cap: Option<f64>,
    /// Stop once the epoch loss improves by less than 1e-5 for 10 epochs.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            lr: 1e-4,
            weight_decay: 1e-4,
            schedule: Schedule::Joint,
            seed: 0,
            q: 0.7,
            beta: 0.5,
            k_ratio: 0.125,
            hidden: 512,
            actionness_loss: ActionnessLoss::Gce,
            class_rate_cap: None,
            early_stop: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(AslError::Config("batch_size and hidden must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(AslError::Config(
                "lr must be positive, weight_decay non-negative".into(),
            ));
        }
        if let Some(cap) = self.class_rate_cap {
            if !(cap > 0.0 && cap <= 1.0) {
                return Err(AslError::Config(format!("class_rate_cap {cap} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, num_classes: usize, feature_dim: usize) -> ModelConfig {
        ModelConfig {
            num_classes,
            feature_dim,
            hidden: self.hidden,
            beta: self.beta,
            k_ratio: self.k_ratio,
            q: self.q,
            actionness_loss: self.actionness_loss,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub f_updated: bool,
    pub g_updated: bool,
    pub l_cls: f64,
    pub l_asl: f64,
    pub tpos_action_fraction: Option<f64>,
    pub g_membership_accuracy: f64,
    pub tpos_iou_mean: f64,
    pub tpos_iou_std: f64,
}

impl EpochLog {
    pub fn total(&self) -> f64 {
        self.l_cls + self.l_asl
    }
}

/// Model initialised the way [`train`] does before its first step.
pub fn initial_model(dataset: &Dataset, config: &TrainConfig) -> Result<AslModel> {
    let mc = config.model_config(dataset.num_classes, dataset.feature_dim);
    AslModel::new(&mc, &mut Prng::new(config.seed))
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(AslModel, Vec<EpochLog>)> {
    train_with(dataset, config, |_, _| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(dataset: &Dataset, config: &TrainConfig, mut on_epoch: F) -> Result<(AslModel, Vec<EpochLog>)>
where
    F: FnMut(&AslModel, &EpochLog),
{
    config.validate()?;
    let mut model = initial_model(dataset, config)?;
    if config.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    if dataset.is_empty() {
        return Err(AslError::Config("cannot train on an empty dataset".into()));
    }
    if let Some(r) = dataset.records.iter().find(|r| r.labels.is_empty()) {
        return Err(AslError::Contract(format!("training video {} has no labels", r.id)));
    }
    let masks: Vec<Option<Vec<bool>>> = dataset.records.iter().map(|r| r.action_mask()).collect();
    if config.class_rate_cap.is_some() && masks.iter().any(Option::is_none) {
        return Err(AslError::Config(
            "class_rate_cap needs ground truth on every training video".into(),
        ));
    }

    let adam = AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam_f = AdamState::new(&model.classifier, adam);
    let mut adam_g = AdamState::new(&model.actionness, adam);

    let mut prev_tpos = epoch_pass(&model, dataset, &masks, None)?.1;
    let mut logs = Vec::with_capacity(config.epochs);
    let mut stalled = 0usize;

    for epoch in 0..config.epochs {
        let (f_active, g_active) = config.schedule.active(epoch, config.epochs);
        let mut cap_prng = Prng::with_stream(config.seed, CAP_STREAM + epoch as u64);
        for batch in batch_iter(dataset.len(), config.batch_size, epoch, config.seed) {
            let mut grads = ModelGrads::zeros_for(&model);
            for &i in &batch {
                let record = &dataset.records[i];
                let mut state = forward_selection(&model, record)?;
                if let (Some(cap), Some(mask)) = (config.class_rate_cap, &masks[i]) {
                    let (pos, neg) = subsample_tpos(&state.t_pos, &state.t_neg, mask, cap, &mut cap_prng);
                    state.set_partition(pos, neg)?;
                }
                grads.accumulate(&backward(&model, record, &state)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            let step = |r: Result<()>| {
                r.map_err(|e| match e {
                    AslError::NonFinite { .. } => AslError::Divergence { epoch },
                    other => other,
                })
            };
            if f_active {
                step(adam_f.step(&mut model.classifier, &grads.classifier))?;
            }
            if g_active {
                step(adam_g.step(&mut model.actionness, &grads.actionness))?;
            }
        }

        let (mut log, tpos) = epoch_pass(&model, dataset, &masks, Some(&prev_tpos))?;
        log.epoch = epoch;
        log.f_updated = f_active;
        log.g_updated = g_active;
        if !log.total().is_finite() {
            return Err(AslError::Divergence { epoch });
        }
        prev_tpos = tpos;
        on_epoch(&model, &log);
        let improved = logs
            .last()
            .is_none_or(|last: &EpochLog| last.total() - log.total() >= 1e-5);
        logs.push(log);
        stalled = if improved { 0 } else { stalled + 1 };
        if config.early_stop && stalled >= 10 {
            break;
        }
    }
    Ok((model, logs))
}

/// Losses and selection diagnostics of a fixed model over `dataset`, with
/// the consecutive-epoch IoU taken against `previous_tpos` when given.
/// Returns each video's `T_pos` alongside.
pub fn dataset_diagnostics(
    model: &AslModel,
    dataset: &Dataset,
    previous_tpos: Option<&[Vec<usize>]>,
) -> Result<(EpochLog, Vec<Vec<usize>>)> {
    if dataset.records.iter().any(|r| r.labels.is_empty()) {
        return Err(AslError::Contract(
            "diagnostics need video labels on every record".into(),
        ));
    }
    if let Some(prev) = previous_tpos {
        if prev.len() != dataset.len() {
            return Err(AslError::shape("dataset_diagnostics", dataset.len(), prev.len()));
        }
    }
    let masks: Vec<Option<Vec<bool>>> = dataset.records.iter().map(|r| r.action_mask()).collect();
    epoch_pass(model, dataset, &masks, previous_tpos)
}

/// Recall@N of the actionness ranking pooled over every instance of
/// `dataset`, in dataset order.
pub fn actionness_recall(model: &AslModel, dataset: &Dataset, n: usize) -> Result<RecallAtN> {
    let mut scores = Vec::new();
    let mut gt = Vec::new();
    for r in &dataset.records {
        let mask = r
            .action_mask()
            .ok_or_else(|| AslError::MissingGroundTruth(r.id.clone()))?;
        scores.extend(compute_actionness(&model.actionness, &r.features)?);
        gt.extend(mask);
    }
    recall_at_n(&scores, &gt, n)
}

/// Losses and selection diagnostics of `model` over the whole dataset,
/// plus each video's `T_pos`.
fn epoch_pass(
    model: &AslModel,
    dataset: &Dataset,
    masks: &[Option<Vec<bool>>],
    prev_tpos: Option<&[Vec<usize>]>,
) -> Result<(EpochLog, Vec<Vec<usize>>)> {
    let n = dataset.len() as f64;
    let (mut l_cls, mut l_asl, mut acc) = (0.0, 0.0, 0.0);
    let (mut action_hits, mut tpos_total) = (0usize, 0usize);
    let mut have_gt = true;
    let mut ious = Vec::with_capacity(dataset.len());
    let mut tpos_sets = Vec::with_capacity(dataset.len());
    for (i, record) in dataset.records.iter().enumerate() {
        let state = forward_selection(model, record)?;
        let losses = state_losses(model, record, &state)?;
        l_cls += losses.l_cls;
        l_asl += losses.l_asl;
        acc += g_membership_accuracy(&state.actionness, &state.t_pos, &state.t_neg);
        match &masks[i] {
            Some(mask) => {
                action_hits += state.t_pos.iter().filter(|&&t| mask[t]).count();
                tpos_total += state.t_pos.len();
            }
            None => have_gt = false,
        }
        if let Some(prev) = prev_tpos {
            ious.push(tpos_consecutive_iou(&prev[i], &state.t_pos));
        }
        tpos_sets.push(state.t_pos);
    }
    let (iou_mean, iou_std) = diagnostics::mean_std(&ious).unwrap_or((1.0, 0.0));
    let log = EpochLog {
        epoch: 0,
        f_updated: false,
        g_updated: false,
        l_cls: l_cls / n,
        l_asl: l_asl / n,
        tpos_action_fraction: (have_gt && tpos_total > 0).then(|| action_hits as f64 / tpos_total as f64),
        g_membership_accuracy: acc / n,
        tpos_iou_mean: iou_mean,
        tpos_iou_std: iou_std,
    };
    Ok((log, tpos_sets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn tiny_data() -> Dataset {
        let config = SyntheticConfig {
            num_classes: 3,
            feature_dim: 6,
            length: 24,
            videos_train: 24,
            videos_test: 1,
            noise_sigma: 0.0,
            seed: 4,
            ..SyntheticConfig::default()
        };
        generate_synthetic(&config).unwrap().0
    }

    fn tiny_train() -> TrainConfig {
        TrainConfig {
            epochs: 20,
            batch_size: 8,
            lr: 1e-3,
            hidden: 16,
            seed: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_phases() {
        assert_eq!(Schedule::Joint.active(3, 10), (true, true));
        let seq: Vec<bool> = (0..5).map(|e| Schedule::Sequential.active(e, 5).0).collect();
        assert_eq!(seq, vec![true, true, true, false, false]);
        let alt = Schedule::Alternating {
            f_epochs: 2,
            g_epochs: 1,
        };
        let f: Vec<bool> = (0..6).map(|e| alt.active(e, 6).0).collect();
        assert_eq!(f, vec![true, true, false, true, true, false]);
        for s in ["joint", "f-then-g", "alternate:3:2"] {
            assert_eq!(s.parse::<Schedule>().unwrap().to_string(), s);
        }
        assert!("alternate:0:1".parse::<Schedule>().is_err());
        assert!("sometimes".parse::<Schedule>().is_err());
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let data = tiny_data();
        let config = TrainConfig {
            epochs: 0,
            ..tiny_train()
        };
        let (model, logs) = train(&data, &config).unwrap();
        assert!(logs.is_empty());
        assert_eq!(model, initial_model(&data, &config).unwrap());
    }

    #[test]
    fn loss_decreases_on_clean_data() {
        let (_, logs) = train(&tiny_data(), &tiny_train()).unwrap();
        assert_eq!(logs.len(), 20);
        assert!(
            logs[19].total() < logs[0].total(),
            "{} !< {}",
            logs[19].total(),
            logs[0].total()
        );
        for log in &logs {
            assert!((0.0..=1.0).contains(&log.g_membership_accuracy));
            assert!((0.0..=1.0).contains(&log.tpos_iou_mean));
            assert!(log.tpos_action_fraction.is_some());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let config = TrainConfig {
            epochs: 3,
            ..tiny_train()
        };
        assert_eq!(
            train(&tiny_data(), &config).unwrap(),
            train(&tiny_data(), &config).unwrap()
        );
    }

    #[test]
    fn frozen_network_is_untouched() {
        let data = tiny_data();
        let config = TrainConfig {
            epochs: 4,
            schedule: Schedule::Alternating {
                f_epochs: 2,
                g_epochs: 2,
            },
            ..tiny_train()
        };
        let init = initial_model(&data, &config).unwrap();
        let mut snapshots = Vec::new();
        train_with(&data, &config, |m, _| snapshots.push(m.clone())).unwrap();
        // epochs 0, 1 update only F
        assert_eq!(snapshots[0].actionness, init.actionness);
        assert_eq!(snapshots[1].actionness, init.actionness);
        assert_ne!(snapshots[1].classifier, init.classifier);
        // epochs 2, 3 update only G
        assert_eq!(snapshots[3].classifier, snapshots[1].classifier);
        assert_ne!(snapshots[3].actionness, snapshots[1].actionness);
    }

    #[test]
    fn class_rate_cap_requires_ground_truth() {
        let mut data = tiny_data();
        data.records[0].gt_segments = None;
        let config = TrainConfig {
            epochs: 1,
            class_rate_cap: Some(0.5),
            ..tiny_train()
        };
        assert!(matches!(train(&data, &config), Err(AslError::Config(_))));
    }

    #[test]
    fn class_rate_cap_runs() {
        let config = TrainConfig {
            epochs: 2,
            class_rate_cap: Some(0.3),
            ..tiny_train()
        };
        let (_, logs) = train(&tiny_data(), &config).unwrap();
        assert_eq!(logs.len(), 2);
    }

    #[test]
    fn divergence_is_reported() {
        let config = TrainConfig {
            epochs: 2,
            lr: 1e300,
            ..tiny_train()
        };
        assert!(matches!(train(&tiny_data(), &config), Err(AslError::Divergence { .. })));
    }

    #[test]
    fn same_model_twice_gives_unit_iou() {
        let data = tiny_data();
        let model = initial_model(&data, &tiny_train()).unwrap();
        let (_, tpos) = dataset_diagnostics(&model, &data, None).unwrap();
        let (log, again) = dataset_diagnostics(&model, &data, Some(&tpos)).unwrap();
        assert_eq!(tpos, again);
        assert_eq!((log.tpos_iou_mean, log.tpos_iou_std), (1.0, 0.0));
        assert!(log.tpos_action_fraction.is_some());
    }

    #[test]
    fn recall_pools_every_instance() {
        let data = tiny_data();
        let model = initial_model(&data, &tiny_train()).unwrap();
        let r = actionness_recall(&model, &data, 10_000).unwrap();
        assert_eq!(r.used, data.len() * 24);
        let actions: usize = data
            .records
            .iter()
            .map(|x| x.action_mask().unwrap().iter().filter(|&&m| m).count())
            .sum();
        assert!((r.value - actions as f64 / r.used as f64).abs() < 1e-12);
        assert!(actionness_recall(&model, &data, 0).is_err());
    }
}
