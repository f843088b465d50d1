//! From selection scores to temporal proposals: multi-threshold segment
//! extraction, proposal scoring and per-class temporal NMS.

mod io;

pub use io::{read_proposals_csv, write_proposals_csv, ProposalRow, PROPOSAL_CSV_HEADER};

use std::collections::BTreeMap;

use crate::data::{Dataset, VideoRecord};
use crate::error::{AslError, Result};
use crate::evaluation::segment_iou;
use crate::model::{forward_selection, AslModel};
use crate::numerics::Matrix;

/// A scored, class-labelled segment in instance indices (inclusive).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub class_index: usize,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl Proposal {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which per-instance sequence is thresholded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalizationMode {
    /// Fused selection scores `h_{c,t}`.
    Asl,
    /// Class activation sequence `s_{c,t}` alone.
    AslS,
    /// Actionness `a_t` alone, labelled with the top video-level class.
    AslA,
}

impl std::str::FromStr for LocalizationMode {
    type Err = AslError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asl" => Ok(LocalizationMode::Asl),
            "asl-s" => Ok(LocalizationMode::AslS),
            "asl-a" => Ok(LocalizationMode::AslA),
            _ => Err(AslError::Config(format!(
                "unknown localization mode {s:?}, expected asl, asl-s or asl-a"
            ))),
        }
    }
}

impl std::fmt::Display for LocalizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LocalizationMode::Asl => "asl",
            LocalizationMode::AslS => "asl-s",
            LocalizationMode::AslA => "asl-a",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceConfig {
    pub alphas: Vec<f64>,
    pub nms_iou: f64,
    pub mode: LocalizationMode,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            alphas: default_alphas(),
            nms_iou: 0.4,
            mode: LocalizationMode::Asl,
        }
    }
}

/// Ten thresholds `j / 11`, `j = 1..=10`.
pub fn default_alphas() -> Vec<f64> {
    (1..=10).map(|j| j as f64 / 11.0).collect()
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(AslError::Config("at least one threshold is required".into()));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(AslError::Config("thresholds must lie in (0, 1)".into()));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AslError::Config("thresholds must be strictly increasing".into()));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return Err(AslError::Config(format!("nms_iou {} outside (0, 1)", self.nms_iou)));
        }
        Ok(())
    }
}

/// The `C × T` sequence that `mode` thresholds.
pub fn selection_sequence(model: &AslModel, record: &VideoRecord, mode: LocalizationMode) -> Result<Matrix> {
    let state = forward_selection(model, record)?;
    Ok(match mode {
        LocalizationMode::Asl => state.fused,
        LocalizationMode::AslS => state.cas,
        LocalizationMode::AslA => {
            let mut m = Matrix::zeros(model.num_classes(), state.actionness.len());
            for c in 0..m.rows() {
                m.row_mut(c).copy_from_slice(&state.actionness);
            }
            m
        }
    })
}

/// Maximal runs of consecutive instances with value strictly above `alpha`.
pub fn threshold_segments(row: &[f64], alpha: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &v) in row.iter().enumerate() {
        match (v > alpha, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push((s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, row.len() - 1));
    }
    out
}

/// Mean of `row` over `start..=end`.
pub fn score_proposal(row: &[f64], start: usize, end: usize) -> f64 {
    let span = &row[start..=end];
    span.iter().sum::<f64>() / span.len() as f64
}

/// Greedy temporal NMS over proposals of one class.
///
/// Candidates are visited by descending score, then earlier start, then
/// longer span; each kept proposal discards every remaining one whose IoU
/// with it exceeds `iou_threshold`.
pub fn nms(proposals: &[Proposal], iou_threshold: f64) -> Vec<Proposal> {
    let mut order: Vec<Proposal> = proposals.to_vec();
    order.sort_by(nms_order);
    let mut kept: Vec<Proposal> = Vec::new();
    for p in order {
        let span = (p.start, p.end);
        if kept
            .iter()
            .all(|k| segment_iou((k.start, k.end), span) <= iou_threshold)
        {
            kept.push(p);
        }
    }
    kept
}

pub(crate) fn nms_order(a: &Proposal, b: &Proposal) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.cmp(&b.start))
        .then(b.end.cmp(&a.end))
}

/// Proposals for one video, sorted by descending score.
pub fn localize(model: &AslModel, record: &VideoRecord, config: &InferenceConfig) -> Result<Vec<Proposal>> {
    config.validate()?;
    let state = forward_selection(model, record)?;
    let (sequence, classes): (Matrix, Vec<usize>) = match config.mode {
        LocalizationMode::Asl => (state.fused, (0..model.num_classes()).collect()),
        LocalizationMode::AslS => (state.cas, (0..model.num_classes()).collect()),
        LocalizationMode::AslA => {
            let best = argmax(&state.class_probs);
            let mut m = Matrix::zeros(1, state.actionness.len());
            m.row_mut(0).copy_from_slice(&state.actionness);
            let mut out = localize_sequence(m.row(0), best, config);
            sort_output(&mut out);
            return Ok(out);
        }
    };
    let mut out = Vec::new();
    for c in classes {
        out.extend(localize_sequence(sequence.row(c), c, config));
    }
    sort_output(&mut out);
    Ok(out)
}

/// Proposal rows for every video of `dataset`, in dataset order.
pub fn localize_dataset(model: &AslModel, dataset: &Dataset, config: &InferenceConfig) -> Result<Vec<ProposalRow>> {
    if model.num_classes() != dataset.num_classes || model.feature_dim() != dataset.feature_dim {
        return Err(AslError::ModelMismatch {
            model_classes: model.num_classes(),
            model_dim: model.feature_dim(),
            data_classes: dataset.num_classes,
            data_dim: dataset.feature_dim,
        });
    }
    let mut rows = Vec::new();
    for record in &dataset.records {
        for p in localize(model, record, config)? {
            rows.push(ProposalRow::new(&record.id, &dataset.class_names[p.class_index], &p));
        }
    }
    Ok(rows)
}

/// Thresholds one class row at every alpha, deduplicates identical spans
/// (keeping the best score) and applies NMS.
pub fn localize_sequence(row: &[f64], class_index: usize, config: &InferenceConfig) -> Vec<Proposal> {
    let mut candidates: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &alpha in &config.alphas {
        for (start, end) in threshold_segments(row, alpha) {
            let score = score_proposal(row, start, end);
            candidates
                .entry((start, end))
                .and_modify(|s| *s = s.max(score))
                .or_insert(score);
        }
    }
    let pool: Vec<Proposal> = candidates
        .into_iter()
        .map(|((start, end), score)| Proposal {
            class_index,
            start,
            end,
            score,
        })
        .collect();
    nms(&pool, config.nms_iou)
}

fn sort_output(props: &mut [Proposal]) {
    props.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.class_index.cmp(&b.class_index))
            .then(a.start.cmp(&b.start))
            .then(a.end.cmp(&b.end))
    });
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
