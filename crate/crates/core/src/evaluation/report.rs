//! Report files.
//!
//! `ap.csv` columns `class_index,class_name,iou,ap`: one row per class and
//! threshold (`NA` for classes without ground truth), then one row per
//! threshold with class_index `all` and class_name `mean`.
//!
//! `summary.txt` holds `key=value` lines, in this order:
//! `iou_thresholds`, `map`, `ap_at_iou.<thr>` per threshold, `num_proposals`,
//! `num_gt`, `confusion.tp`, `confusion.fp`, `confusion.fn`, `confusion.tn`,
//! `recall_at_n.requested`, `recall_at_n.used`, `recall_at_n.value` (all `NA`
//! when absent), `fp.background`, `fp.localization`, `fp.double_detection`,
//! `fp.wrong_label`.

use std::fmt::Write as _;
use std::path::Path;

use super::EvalReport;
use crate::error::{AslError, Result};

pub const AP_CSV_HEADER: &str = "class_index,class_name,iou,ap";

fn thr_label(t: f64) -> String {
    format!("{t:.2}")
}

pub(crate) fn render_ap_csv(report: &EvalReport) -> String {
    let mut out = String::from(AP_CSV_HEADER);
    out.push('\n');
    for (c, row) in report.ap.iter().enumerate() {
        for (&thr, ap) in report.iou_thresholds.iter().zip(row) {
            let ap = ap.map_or_else(|| "NA".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{c},{},{},{ap}", report.class_names[c], thr_label(thr));
        }
    }
    for (&thr, mean) in report.iou_thresholds.iter().zip(&report.ap_at_iou) {
        let _ = writeln!(out, "all,mean,{},{mean}", thr_label(thr));
    }
    out
}

pub(crate) fn render_summary(report: &EvalReport) -> String {
    let mut out = String::new();
    let grid: Vec<String> = report.iou_thresholds.iter().map(|&t| thr_label(t)).collect();
    let _ = writeln!(out, "iou_thresholds={}", grid.join(","));
    let _ = writeln!(out, "map={}", report.map);
    for (label, v) in grid.iter().zip(&report.ap_at_iou) {
        let _ = writeln!(out, "ap_at_iou.{label}={v}");
    }
    let _ = writeln!(out, "num_proposals={}", report.num_proposals);
    let _ = writeln!(out, "num_gt={}", report.num_gt);
    let c = &report.confusion;
    let _ = writeln!(out, "confusion.tp={}", c.tp);
    let _ = writeln!(out, "confusion.fp={}", c.fp);
    let _ = writeln!(out, "confusion.fn={}", c.fn_);
    let _ = writeln!(out, "confusion.tn={}", c.tn);
    match &report.recall_at_n {
        Some(r) => {
            let _ = writeln!(out, "recall_at_n.requested={}", r.requested);
            let _ = writeln!(out, "recall_at_n.used={}", r.used);
            let _ = writeln!(out, "recall_at_n.value={}", r.value);
        }
        None => {
            out.push_str("recall_at_n.requested=NA\nrecall_at_n.used=NA\nrecall_at_n.value=NA\n");
        }
    }
    let f = &report.fp_taxonomy;
    let _ = writeln!(out, "fp.background={}", f.background);
    let _ = writeln!(out, "fp.localization={}", f.localization);
    let _ = writeln!(out, "fp.double_detection={}", f.double_detection);
    let _ = writeln!(out, "fp.wrong_label={}", f.wrong_label);
    out
}

/// Fixed-width table for terminals.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "class");
    for &t in &report.iou_thresholds {
        let _ = write!(out, "{:>7}", thr_label(t));
    }
    out.push('\n');
    for (name, row) in report.class_names.iter().zip(&report.ap) {
        let _ = write!(out, "{name:<12}");
        for ap in row {
            match ap {
                Some(v) => {
                    let _ = write!(out, "{:>7.1}", v * 100.0);
                }
                None => {
                    let _ = write!(out, "{:>7}", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<12}", "mean");
    for v in &report.ap_at_iou {
        let _ = write!(out, "{:>7.1}", v * 100.0);
    }
    let _ = writeln!(out, "\nmAP {:.2}", report.map * 100.0);
    let c = &report.confusion;
    let _ = writeln!(out, "instances TP {} FP {} FN {} TN {}", c.tp, c.fp, c.fn_, c.tn);
    if let Some(r) = &report.recall_at_n {
        let _ = writeln!(out, "Recall@{} {:.4} over {} instances", r.requested, r.value, r.used);
    }
    let f = &report.fp_taxonomy;
    let _ = writeln!(
        out,
        "false positives @0.5: background {} localization {} double {} wrong-label {}",
        f.background, f.localization, f.double_detection, f.wrong_label
    );
    out
}

pub fn write_ap_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_ap_csv(report)).map_err(|e| AslError::io(path, e))
}

pub fn write_summary(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_summary(report)).map_err(|e| AslError::io(path, e))
}
