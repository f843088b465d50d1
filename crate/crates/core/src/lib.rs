//! Action selection learning for weakly supervised temporal action
//! localization.
//!
//! A classifier `F` scores every instance of a video per class; an
//! actionness network `G` scores how likely each instance contains any
//! action. Both are fused into selection scores whose per-class top-k sets
//! drive a multiple-instance classification loss for `F`, and whose union
//! over the video's labels becomes the (noisy) target set for `G`, trained
//! with a generalized cross-entropy loss. At test time the selection
//! scores are thresholded into temporal proposals.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{AslError, ErrorKind, Result};
