//! Proposal CSV: `video_id,class_index,class_name,start,end,score`, one row
//! per post-NMS proposal, `start`/`end` inclusive instance indices.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Proposal;
use crate::error::{AslError, Result};

pub const PROPOSAL_CSV_HEADER: &str = "video_id,class_index,class_name,start,end,score";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalRow {
    pub video_id: String,
    pub class_index: usize,
    pub class_name: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl ProposalRow {
    pub fn new(video_id: &str, class_name: &str, p: &Proposal) -> Self {
        ProposalRow {
            video_id: video_id.to_string(),
            class_index: p.class_index,
            class_name: class_name.to_string(),
            start: p.start,
            end: p.end,
            score: p.score,
        }
    }

    pub fn proposal(&self) -> Proposal {
        Proposal {
            class_index: self.class_index,
            start: self.start,
            end: self.end,
            score: self.score,
        }
    }
}

pub fn write_proposals_csv(rows: &[ProposalRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AslError::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    if rows.is_empty() {
        writer
            .write_record(PROPOSAL_CSV_HEADER.split(','))
            .map_err(|e| csv_error(path, e))?;
    }
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| AslError::io(path, e))
}

pub fn read_proposals_csv(path: impl AsRef<Path>) -> Result<Vec<ProposalRow>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(AslError::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path).map_err(|e| AslError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != PROPOSAL_CSV_HEADER {
        return Err(AslError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {PROPOSAL_CSV_HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<ProposalRow>().enumerate() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        if row.start > row.end || !row.score.is_finite() {
            return Err(AslError::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: "invalid segment or score".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> AslError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => AslError::io(path, source),
        other => AslError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}
