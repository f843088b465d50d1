//! Epoch log CSV. Columns, in order:
//! `epoch,phase,l_cls,l_asl,l_total,tpos_action_fraction,g_membership_accuracy,tpos_iou_mean,tpos_iou_std`
//! where `phase` is `FG`, `F` or `G` (the networks updated that epoch) and
//! an absent value is written as `NA`. Floats use the shortest
//! representation that round-trips.

use std::fs;
use std::path::Path;

use super::EpochLog;
use crate::error::{AslError, Result};

pub const EPOCH_LOG_HEADER: &str =
    "epoch,phase,l_cls,l_asl,l_total,tpos_action_fraction,g_membership_accuracy,tpos_iou_mean,tpos_iou_std";

pub fn write_epoch_log_csv(logs: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render(logs)).map_err(|e| AslError::io(path, e))
}

pub(crate) fn render(logs: &[EpochLog]) -> String {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for log in logs {
        let phase = match (log.f_updated, log.g_updated) {
            (true, true) => "FG",
            (true, false) => "F",
            (false, true) => "G",
            (false, false) => "-",
        };
        let frac = log
            .tpos_action_fraction
            .map_or_else(|| "NA".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            log.epoch,
            phase,
            log.l_cls,
            log.l_asl,
            log.total(),
            frac,
            log.g_membership_accuracy,
            log.tpos_iou_mean,
            log.tpos_iou_std
        ));
    }
    out
}

pub fn read_epoch_log_csv(path: impl AsRef<Path>) -> Result<Vec<EpochLog>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(AslError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| AslError::io(path, e))?;
    let err = |line: usize, message: String| AslError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == EPOCH_LOG_HEADER => {}
        _ => return Err(err(1, "missing epoch log header".into())),
    }
    let mut logs = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(i + 1, format!("expected 9 columns, got {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| err(i + 1, format!("bad number {s:?}"))) };
        let (f_updated, g_updated) = match f[1] {
            "FG" => (true, true),
            "F" => (true, false),
            "G" => (false, true),
            "-" => (false, false),
            other => return Err(err(i + 1, format!("bad phase {other:?}"))),
        };
        logs.push(EpochLog {
            epoch: f[0].parse().map_err(|_| err(i + 1, format!("bad epoch {:?}", f[0])))?,
            f_updated,
            g_updated,
            l_cls: num(f[2])?,
            l_asl: num(f[3])?,
            tpos_action_fraction: if f[5] == "NA" { None } else { Some(num(f[5])?) },
            g_membership_accuracy: num(f[6])?,
            tpos_iou_mean: num(f[7])?,
            tpos_iou_std: num(f[8])?,
        });
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let logs = vec![
            EpochLog {
                epoch: 0,
                f_updated: true,
                g_updated: false,
                l_cls: 1.5,
                l_asl: 0.1 + 0.2,
                tpos_action_fraction: None,
                g_membership_accuracy: 0.75,
                tpos_iou_mean: 1.0,
                tpos_iou_std: 0.0,
            },
            EpochLog {
                epoch: 1,
                f_updated: true,
                g_updated: true,
                l_cls: 1.25,
                l_asl: 1e-7,
                tpos_action_fraction: Some(2.0 / 3.0),
                g_membership_accuracy: 0.5,
                tpos_iou_mean: 0.9,
                tpos_iou_std: 0.05,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_epoch_log_csv(&logs, &path).unwrap();
        assert_eq!(read_epoch_log_csv(&path).unwrap(), logs);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,F,1.5,"));
    }
}
