//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes   "ASLCKPT\0"
//! version          u32       1
//! num_classes      u32
//! feature_dim      u32
//! beta             f64
//! k_ratio          f64
//! q                f64
//! actionness_loss  u32       0 = GCE, 1 = BCE
//! f_layers         u32       layers in F
//! g_layers         u32       layers in G
//! tensors          F then G; per layer the weight (in × out) then the
//!                  bias (1 × out), each as u32 rows, u32 cols and
//!                  rows·cols f32 values row-major
//! ```
//!
//! Hidden layers use ReLU, the last layer of each network is linear.

use std::fs;
use std::path::Path;

use super::{ActionnessLoss, AslModel};
use crate::error::{AslError, Result};
use crate::numerics::{Activation, Layer, Matrix, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ASLCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &AslModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| AslError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AslModel> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(AslError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| AslError::io(path, e))?;
    from_bytes(&bytes).map_err(|message| AslError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    })
}

pub(crate) fn to_bytes(model: &AslModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    u32le(&mut out, CHECKPOINT_VERSION as usize);
    u32le(&mut out, model.num_classes());
    u32le(&mut out, model.feature_dim());
    for v in [model.beta, model.k_ratio, model.q] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let loss_tag = match model.actionness_loss {
        ActionnessLoss::Gce => 0,
        ActionnessLoss::Bce => 1,
    };
    u32le(&mut out, loss_tag);
    u32le(&mut out, model.classifier.layers().len());
    u32le(&mut out, model.actionness.layers().len());
    for layer in model.classifier.layers().iter().chain(model.actionness.layers()) {
        u32le(&mut out, layer.weight.rows());
        u32le(&mut out, layer.weight.cols());
        for &v in layer.weight.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        u32le(&mut out, 1);
        u32le(&mut out, layer.bias.len());
        for &v in &layer.bias {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("checkpoint truncated at byte {}", self.pos))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self) -> std::result::Result<Matrix, String> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or("tensor size overflow")?;
        let raw = self.take(n)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Matrix::from_vec(rows, cols, values).map_err(|e| e.to_string())
    }

    fn network(&mut self, layers: usize) -> std::result::Result<Mlp, String> {
        let mut out = Vec::with_capacity(layers);
        for i in 0..layers {
            let weight = self.matrix()?;
            let bias = self.matrix()?;
            if bias.rows() != 1 {
                return Err(format!("bias tensor must be 1 x n, got {:?}", bias.shape()));
            }
            let activation = if i + 1 == layers {
                Activation::Identity
            } else {
                Activation::Relu
            };
            out.push(Layer::new(weight, bias.into_vec(), activation).map_err(|e| e.to_string())?);
        }
        Mlp::from_layers(out).map_err(|e| e.to_string())
    }
}

pub(crate) fn from_bytes(bytes: &[u8]) -> std::result::Result<AslModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let num_classes = r.u32()?;
    let feature_dim = r.u32()?;
    let beta = r.f64()?;
    let k_ratio = r.f64()?;
    let q = r.f64()?;
    let actionness_loss = match r.u32()? {
        0 => ActionnessLoss::Gce,
        1 => ActionnessLoss::Bce,
        other => return Err(format!("unknown actionness loss tag {other}")),
    };
    let f_layers = r.u32()?;
    let g_layers = r.u32()?;
    if f_layers == 0 || g_layers == 0 {
        return Err("networks need at least one layer".into());
    }
    let classifier = r.network(f_layers)?;
    let actionness = r.network(g_layers)?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    if classifier.out_dim() != num_classes || classifier.in_dim() != feature_dim {
        return Err("header dimensions disagree with F".into());
    }
    AslModel::from_parts(classifier, actionness, beta, k_ratio, q, actionness_loss).map_err(|e| e.to_string())
}
