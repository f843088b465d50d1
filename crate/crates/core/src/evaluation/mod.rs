//! Localization metrics: segment IoU, AP@IoU and mAP over a threshold grid,
//! instance-level confusion, Recall@N over actionness, and a small false
//! positive taxonomy.

mod report;

pub use report::{render_table, write_ap_csv, write_summary, AP_CSV_HEADER};

use std::collections::HashMap;

use crate::data::{Dataset, GtSegment};
use crate::error::{AslError, Result};
use crate::inference::ProposalRow;

/// Matching threshold for the false positive taxonomy.
pub const TAXONOMY_IOU: f64 = 0.5;

/// Inclusive-count IoU of two `(start, end)` segments.
pub fn segment_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if lo > hi {
        return 0.0;
    }
    let inter = (hi - lo + 1) as f64;
    let union = (a.1 - a.0 + 1 + b.1 - b.0 + 1) as f64 - inter;
    inter / union
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
}

impl EvalConfig {
    /// `{0.1, 0.2, ..., 0.9}`.
    pub fn thumos() -> Self {
        EvalConfig {
            iou_thresholds: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }

    /// `{0.5, 0.55, ..., 0.95}`.
    pub fn anet() -> Self {
        EvalConfig {
            iou_thresholds: (10..=19).map(|i| i as f64 * 0.05).collect(),
        }
    }

    pub fn from_grid(name: &str) -> Result<Self> {
        match name {
            "thumos" => Ok(Self::thumos()),
            "anet" => Ok(Self::anet()),
            _ => Err(AslError::Config(format!(
                "unknown IoU grid {name:?}, expected thumos or anet"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(AslError::Config("IoU grid is empty".into()));
        }
        if self.iou_thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(AslError::Config("IoU thresholds must lie in (0, 1)".into()));
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AslError::Config("IoU thresholds must be strictly increasing".into()));
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self::thumos()
    }
}

/// One scored detection of a fixed class; `video` indexes the dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub video: usize,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// One ground-truth segment of a fixed class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GtInstance {
    pub video: usize,
    pub start: usize,
    pub end: usize,
}

fn detection_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.start.cmp(&b.start))
        .then(a.video.cmp(&b.video))
        .then(a.end.cmp(&b.end))
}

/// Greedy score-ordered matching. Returns the detections in ranking order,
/// each paired with the index of the GT it matched.
pub fn match_detections(dets: &[Detection], gts: &[GtInstance], iou_thr: f64) -> Vec<(Detection, Option<usize>)> {
    let mut order = dets.to_vec();
    order.sort_by(detection_order);
    let mut taken = vec![false; gts.len()];
    order
        .into_iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if taken[g] || gt.video != d.video {
                    continue;
                }
                let iou = segment_iou((d.start, d.end), (gt.start, gt.end));
                if iou >= iou_thr && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (d, best.map(|(g, _)| g))
        })
        .collect()
}

/// Unsmoothed AP: sum of precision at each true-positive rank over the GT
/// count. `None` when there is no GT.
pub fn ap_at_iou(dets: &[Detection], gts: &[GtInstance], iou_thr: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank, (_, m)) in match_detections(dets, gts, iou_thr).iter().enumerate() {
        if m.is_some() {
            tp += 1;
            sum += tp as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / gts.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

pub fn instance_confusion(selected: &[bool], gt: &[bool]) -> Result<Confusion> {
    if selected.len() != gt.len() {
        return Err(AslError::shape("instance_confusion", gt.len(), selected.len()));
    }
    let mut c = Confusion::default();
    for (&s, &g) in selected.iter().zip(gt) {
        match (s, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecallAtN {
    pub requested: usize,
    /// Instances actually ranked; below `requested` when the pool is small.
    pub used: usize,
    pub value: f64,
}

/// Fraction of the `n` highest-actionness instances (ties to the lower
/// index) that contain an action.
pub fn recall_at_n(actionness: &[f64], gt: &[bool], n: usize) -> Result<RecallAtN> {
    if actionness.len() != gt.len() {
        return Err(AslError::shape("recall_at_n", gt.len(), actionness.len()));
    }
    if n == 0 {
        return Err(AslError::Config("Recall@N needs n >= 1".into()));
    }
    let mut idx: Vec<usize> = (0..actionness.len()).collect();
    idx.sort_by(|&i, &j| actionness[j].total_cmp(&actionness[i]).then(i.cmp(&j)));
    let used = n.min(idx.len());
    let hits = idx[..used].iter().filter(|&&i| gt[i]).count();
    let value = if used == 0 { 0.0 } else { hits as f64 / used as f64 };
    Ok(RecallAtN {
        requested: n,
        used,
        value,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FpTaxonomy {
    pub background: usize,
    pub localization: usize,
    pub double_detection: usize,
    pub wrong_label: usize,
}

impl FpTaxonomy {
    pub fn total(&self) -> usize {
        self.background + self.localization + self.double_detection + self.wrong_label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FpCategory {
    Background,
    Localization,
    DoubleDetection,
    WrongLabel,
}

/// Categorizes one unmatched detection of class `class` against all GT of
/// its video. Overlaps with a same-class GT take precedence; a detection
/// touching only other-class GT below the threshold counts as wrong-label.
pub fn categorize_false_positive(
    class: usize,
    span: (usize, usize),
    video_gt: &[GtSegment],
    iou_thr: f64,
) -> FpCategory {
    let mut same_best: f64 = 0.0;
    let mut other_best: f64 = 0.0;
    for g in video_gt {
        let iou = segment_iou(span, (g.start, g.end));
        if g.class == class {
            same_best = same_best.max(iou);
        } else {
            other_best = other_best.max(iou);
        }
    }
    if same_best >= iou_thr {
        FpCategory::DoubleDetection
    } else if other_best >= iou_thr {
        FpCategory::WrongLabel
    } else if same_best > 0.0 {
        FpCategory::Localization
    } else if other_best > 0.0 {
        FpCategory::WrongLabel
    } else {
        FpCategory::Background
    }
}

/// Taxonomy of every false positive at `iou_thr`, matching per class.
pub fn classify_false_positives(
    proposals: &[(usize, usize, crate::inference::Proposal)],
    gt: &[Vec<GtSegment>],
    num_classes: usize,
    iou_thr: f64,
) -> FpTaxonomy {
    let mut tax = FpTaxonomy::default();
    for c in 0..num_classes {
        let (dets, gts) = class_slices(proposals, gt, c);
        for (d, m) in match_detections(&dets, &gts, iou_thr) {
            if m.is_some() {
                continue;
            }
            match categorize_false_positive(c, (d.start, d.end), &gt[d.video], iou_thr) {
                FpCategory::Background => tax.background += 1,
                FpCategory::Localization => tax.localization += 1,
                FpCategory::DoubleDetection => tax.double_detection += 1,
                FpCategory::WrongLabel => tax.wrong_label += 1,
            }
        }
    }
    tax
}

fn class_slices(
    proposals: &[(usize, usize, crate::inference::Proposal)],
    gt: &[Vec<GtSegment>],
    class: usize,
) -> (Vec<Detection>, Vec<GtInstance>) {
    let dets = proposals
        .iter()
        .filter(|(_, c, _)| *c == class)
        .map(|&(video, _, p)| Detection {
            video,
            start: p.start,
            end: p.end,
            score: p.score,
        })
        .collect();
    let gts = gt
        .iter()
        .enumerate()
        .flat_map(|(video, segs)| {
            segs.iter().filter(move |s| s.class == class).map(move |s| GtInstance {
                video,
                start: s.start,
                end: s.end,
            })
        })
        .collect();
    (dets, gts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    pub class_names: Vec<String>,
    /// `ap[class][iou]`; `None` for classes without GT.
    pub ap: Vec<Vec<Option<f64>>>,
    pub ap_at_iou: Vec<f64>,
    pub map: f64,
    pub confusion: Confusion,
    pub recall_at_n: Option<RecallAtN>,
    pub fp_taxonomy: FpTaxonomy,
    pub num_proposals: usize,
    pub num_gt: usize,
}

/// Scores a proposal set against a dataset's ground truth.
///
/// An instance counts as selected when a proposal for one of the video's
/// ground-truth classes covers it.
pub fn evaluate(proposals: &[ProposalRow], dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let index: HashMap<&str, usize> = dataset
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut gt: Vec<Vec<GtSegment>> = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let segs = r
            .gt_segments
            .clone()
            .ok_or_else(|| AslError::MissingGroundTruth(r.id.clone()))?;
        gt.push(segs);
    }
    let mut resolved = Vec::with_capacity(proposals.len());
    for row in proposals {
        let &video = index
            .get(row.video_id.as_str())
            .ok_or_else(|| AslError::UnknownVideo(row.video_id.clone()))?;
        if row.class_index >= dataset.num_classes {
            return Err(AslError::LabelOutOfRange {
                video: row.video_id.clone(),
                label: row.class_index,
                num_classes: dataset.num_classes,
            });
        }
        if row.end >= dataset.records[video].len() {
            return Err(AslError::Contract(format!(
                "proposal {}..={} outside video {} of length {}",
                row.start,
                row.end,
                row.video_id,
                dataset.records[video].len()
            )));
        }
        resolved.push((video, row.class_index, row.proposal()));
    }

    let mut ap = vec![vec![None; config.iou_thresholds.len()]; dataset.num_classes];
    for (c, class_ap) in ap.iter_mut().enumerate() {
        let (dets, gts) = class_slices(&resolved, &gt, c);
        for (slot, &thr) in class_ap.iter_mut().zip(&config.iou_thresholds) {
            *slot = ap_at_iou(&dets, &gts, thr);
        }
    }
    let ap_at_iou: Vec<f64> = (0..config.iou_thresholds.len())
        .map(|i| {
            let vals: Vec<f64> = ap.iter().filter_map(|row| row[i]).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let map = ap_at_iou.iter().sum::<f64>() / ap_at_iou.len() as f64;

    let mut selected: Vec<Vec<bool>> = dataset.records.iter().map(|r| vec![false; r.len()]).collect();
    for &(video, class, p) in &resolved {
        if dataset.records[video].labels.binary_search(&class).is_ok() {
            selected[video][p.start..=p.end].iter_mut().for_each(|s| *s = true);
        }
    }
    let mut confusion = Confusion::default();
    for (r, sel) in dataset.records.iter().zip(&selected) {
        let mask = r.action_mask().expect("ground truth checked above");
        confusion.add(instance_confusion(sel, &mask)?);
    }

    Ok(EvalReport {
        iou_thresholds: config.iou_thresholds.clone(),
        class_names: dataset.class_names.clone(),
        ap,
        ap_at_iou,
        map,
        confusion,
        recall_at_n: None,
        fp_taxonomy: classify_false_positives(&resolved, &gt, dataset.num_classes, TAXONOMY_IOU),
        num_proposals: resolved.len(),
        num_gt: gt.iter().map(Vec::len).sum(),
    })
}

#[cfg(test)]
mod tests;
