//! Manifest text format and raw float32 feature files.
//!
//! ```text
//! <C> <d>
//! <class name 0>
//! ...
//! <class name C-1>
//! <id> <T> <labels> <feature_path> [<gt>]
//! ```
//!
//! `labels` is a comma-separated list of class indices, or `-` for none.
//! `gt` is a comma-separated list of `class:start-end` (inclusive instance
//! indices), or `-` for an explicitly empty list; when omitted the record
//! carries no ground truth. Feature paths are relative to the manifest's
//! directory. After the class names, blank lines and lines starting with
//! `#` are ignored. Feature files hold `T·d` little-endian `f32` values,
//! row-major, with no header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, GtSegment, VideoRecord};
use crate::error::{AslError, Result};
use crate::numerics::Matrix;

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let path = manifest_path.as_ref();
    if !path.exists() {
        return Err(AslError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| AslError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let parse_err = |line: usize, message: String| AslError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty manifest".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [c, d] = dims[..] else {
        return Err(parse_err(hline, format!("expected `C d`, got {header:?}")));
    };
    let num_classes: usize = c
        .parse()
        .map_err(|_| parse_err(hline, format!("bad class count {c:?}")))?;
    let feature_dim: usize = d
        .parse()
        .map_err(|_| parse_err(hline, format!("bad feature dim {d:?}")))?;

    let mut class_names = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let (_, name) = lines
            .next()
            .ok_or_else(|| parse_err(hline, "manifest ends inside class names".into()))?;
        class_names.push(name.trim().to_string());
    }

    let mut records = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(parse_err(
                lineno,
                format!("expected `id T labels path [gt]`, got {} fields", fields.len()),
            ));
        }
        let id = fields[0].to_string();
        let t: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad length {:?}", fields[1])))?;
        let labels = parse_labels(fields[2]).map_err(|m| parse_err(lineno, m))?;
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(AslError::LabelOutOfRange {
                video: id,
                label,
                num_classes,
            });
        }
        let gt = match fields.get(4) {
            Some(s) => Some(parse_gt(s).map_err(|m| parse_err(lineno, m))?),
            None => None,
        };
        if let Some(seg) = gt.iter().flatten().find(|s| s.class >= num_classes) {
            return Err(AslError::LabelOutOfRange {
                video: id,
                label: seg.class,
                num_classes,
            });
        }
        let features = read_features(&base.join(fields[3]), t, feature_dim)?;
        let record = VideoRecord::new(id, features, labels, gt).map_err(|e| parse_err(lineno, e.to_string()))?;
        records.push(record);
    }
    Dataset::new(records, num_classes, feature_dim, class_names)
}

/// Writes `manifest_path` plus one feature file per record under
/// `features/<manifest stem>/` next to the manifest.
pub fn save_dataset(dataset: &Dataset, manifest_path: impl AsRef<Path>) -> Result<()> {
    let path = manifest_path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let rel_dir = PathBuf::from("features").join(&stem);
    let feat_dir = base.join(&rel_dir);
    fs::create_dir_all(&feat_dir).map_err(|e| AslError::io(&feat_dir, e))?;

    let mut out = String::new();
    out.push_str(&format!("{} {}\n", dataset.num_classes, dataset.feature_dim));
    for name in &dataset.class_names {
        out.push_str(name);
        out.push('\n');
    }
    for r in &dataset.records {
        if r.id.is_empty() || r.id.chars().any(char::is_whitespace) {
            return Err(AslError::Config(format!("video id {:?} must be a single token", r.id)));
        }
        let file = format!("{}.f32", r.id);
        write_features(&feat_dir.join(&file), &r.features)?;
        let labels = if r.labels.is_empty() {
            "-".to_string()
        } else {
            join(r.labels.iter().map(usize::to_string))
        };
        // manifest paths always use forward slashes
        let rel = format!("features/{stem}/{file}");
        out.push_str(&format!("{} {} {} {}", r.id, r.len(), labels, rel));
        if let Some(gt) = &r.gt_segments {
            let gt = if gt.is_empty() {
                "-".to_string()
            } else {
                join(gt.iter().map(|s| format!("{}:{}-{}", s.class, s.start, s.end)))
            };
            out.push(' ');
            out.push_str(&gt);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AslError::io(path, e))
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

fn parse_labels(s: &str) -> std::result::Result<Vec<usize>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| p.parse().map_err(|_| format!("bad label {p:?}")))
        .collect()
}

fn parse_gt(s: &str) -> std::result::Result<Vec<GtSegment>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| {
            let bad = || format!("bad segment {item:?}, expected class:start-end");
            let (class, span) = item.split_once(':').ok_or_else(bad)?;
            let (start, end) = span.split_once('-').ok_or_else(bad)?;
            Ok(GtSegment {
                class: class.parse().map_err(|_| bad())?,
                start: start.parse().map_err(|_| bad())?,
                end: end.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn read_features(path: &Path, t: usize, d: usize) -> Result<Matrix> {
    if !path.exists() {
        return Err(AslError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| AslError::io(path, e))?;
    if bytes.len() % 4 != 0 || bytes.len() / 4 != t * d {
        return Err(AslError::DimensionMismatch {
            path: path.to_path_buf(),
            expected: t * d,
            actual: bytes.len() / 4,
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Matrix::from_vec(t, d, values)
}

fn write_features(path: &Path, features: &Matrix) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| AslError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for &v in features.as_slice() {
        w.write_all(&(v as f32).to_le_bytes())
            .map_err(|e| AslError::io(path, e))?;
    }
    w.flush().map_err(|e| AslError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, contents: &[u8]) {
        fs::write(dir.join(name), contents).unwrap();
    }

    fn f32_bytes(values: &[f32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn zero_videos() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "m.txt", b"3 8\na\nb\nc\n");
        let ds = load_dataset(dir.path().join("m.txt")).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.num_classes, 3);
        assert_eq!(ds.class_names, vec!["a", "b", "c"]);
    }

    #[test]
    fn three_by_four_record() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<f32> = (0..12).map(|i| i as f32 * 0.5).collect();
        write(dir.path(), "v.f32", &f32_bytes(&vals));
        write(dir.path(), "m.txt", b"2 4\nx\ny\nvid 3 1 v.f32 1:0-1\n");
        let ds = load_dataset(dir.path().join("m.txt")).unwrap();
        let r = &ds.records[0];
        assert_eq!(r.len(), 3);
        assert_eq!(r.features[(2, 3)], 5.5);
        assert_eq!(r.labels, vec![1]);
        assert_eq!(
            r.gt_segments.as_deref(),
            Some(
                &[GtSegment {
                    class: 1,
                    start: 0,
                    end: 1
                }][..]
            )
        );
    }

    #[test]
    fn distinct_error_paths() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "v.f32", &f32_bytes(&[0.0; 12]));

        write(dir.path(), "missing.txt", b"2 4\nx\ny\nvid 3 1 nope.f32\n");
        assert!(matches!(
            load_dataset(dir.path().join("missing.txt")),
            Err(AslError::MissingFile(_))
        ));

        write(dir.path(), "dims.txt", b"2 5\nx\ny\nvid 3 1 v.f32\n");
        assert!(matches!(
            load_dataset(dir.path().join("dims.txt")),
            Err(AslError::DimensionMismatch {
                expected: 15,
                actual: 12,
                ..
            })
        ));

        write(dir.path(), "label.txt", b"2 4\nx\ny\nvid 3 0,2 v.f32\n");
        assert!(matches!(
            load_dataset(dir.path().join("label.txt")),
            Err(AslError::LabelOutOfRange { label: 2, .. })
        ));

        write(dir.path(), "syntax.txt", b"2 4\nx\ny\nvid three 1 v.f32\n");
        assert!(matches!(
            load_dataset(dir.path().join("syntax.txt")),
            Err(AslError::Parse { line: 4, .. })
        ));

        assert!(matches!(
            load_dataset(dir.path().join("absent.txt")),
            Err(AslError::MissingFile(_))
        ));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..15).map(|i| f64::from((i as f32).sin())).collect();
        let gt = Some(vec![GtSegment {
            class: 0,
            start: 1,
            end: 3,
        }]);
        let records = vec![
            VideoRecord::new("a", Matrix::from_vec(5, 3, values).unwrap(), vec![0, 1], gt).unwrap(),
            VideoRecord::new("b", Matrix::filled(2, 3, 0.25), vec![], Some(vec![])).unwrap(),
        ];
        let names = vec!["jump".to_string(), "long jump".to_string()];
        let ds = Dataset::new(records, 2, 3, names).unwrap();
        let path = dir.path().join("train.manifest");
        save_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
