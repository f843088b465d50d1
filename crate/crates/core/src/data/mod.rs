//! Videos as instance feature sequences, manifests, resampling and the
//! synthetic corpus.

mod batch;
mod manifest;
mod resample;
mod synthetic;

pub use batch::batch_iter;
pub use manifest::{load_dataset, save_dataset};
pub use resample::resample_linear;
pub use synthetic::{generate_synthetic, synthetic_prototypes, Prototypes, SyntheticConfig};

use crate::error::{AslError, Result};
use crate::numerics::Matrix;

/// An action segment in instance indices, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GtSegment {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    /// `T × d`, one row per instance.
    pub features: Matrix,
    /// Video-level classes, sorted and unique.
    pub labels: Vec<usize>,
    pub gt_segments: Option<Vec<GtSegment>>,
}

impl VideoRecord {
    pub fn new(
        id: impl Into<String>,
        features: Matrix,
        mut labels: Vec<usize>,
        gt_segments: Option<Vec<GtSegment>>,
    ) -> Result<Self> {
        let id = id.into();
        labels.sort_unstable();
        labels.dedup();
        let t = features.rows();
        if let Some(gt) = &gt_segments {
            for seg in gt {
                if seg.start > seg.end || seg.end >= t {
                    return Err(AslError::Contract(format!(
                        "video {id}: segment {}..={} outside 0..{t}",
                        seg.start, seg.end
                    )));
                }
                if labels.binary_search(&seg.class).is_err() {
                    return Err(AslError::Contract(format!(
                        "video {id}: segment class {} not among labels {labels:?}",
                        seg.class
                    )));
                }
            }
        }
        Ok(VideoRecord {
            id,
            features,
            labels,
            gt_segments,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    /// Per-instance flag: does the instance lie inside any action segment.
    pub fn action_mask(&self) -> Option<Vec<bool>> {
        let gt = self.gt_segments.as_ref()?;
        let mut mask = vec![false; self.len()];
        for seg in gt {
            mask[seg.start..=seg.end].iter_mut().for_each(|m| *m = true);
        }
        Some(mask)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<VideoRecord>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        records: Vec<VideoRecord>,
        num_classes: usize,
        feature_dim: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.len() != num_classes {
            return Err(AslError::Config(format!(
                "{} class names for {num_classes} classes",
                class_names.len()
            )));
        }
        for r in &records {
            if r.features.cols() != feature_dim {
                return Err(AslError::shape("Dataset::new", feature_dim, r.features.cols()));
            }
            if let Some(&label) = r.labels.iter().find(|&&l| l >= num_classes) {
                return Err(AslError::LabelOutOfRange {
                    video: r.id.clone(),
                    label,
                    num_classes,
                });
            }
        }
        Ok(Dataset {
            records,
            num_classes,
            feature_dim,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn find(&self, id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}
