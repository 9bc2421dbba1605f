//! Model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "GDOAMODL"
//! version      u32      1
//! n, m         u32 ×2
//! normalize    u32      0 or 1
//! layers       u32      3
//! per layer:   outputs u32, inputs u32
//! per layer:   weights f64 × outputs·inputs (row-major), bias f64 × outputs
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::dataset::Cursor;
use super::{Dense, ToyModel};
use crate::error::{DoaError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GDOAMODL";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, model: &ToyModel) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + 8 * model.parameter_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let header = [
        CHECKPOINT_VERSION,
        model.n() as u32,
        model.m() as u32,
        model.normalize_input() as u32,
        model.layers().len() as u32,
    ];
    for v in header {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for layer in model.layers() {
        buf.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
    }
    for layer in model.layers() {
        for i in 0..layer.outputs() {
            for j in 0..layer.inputs() {
                buf.extend_from_slice(&layer.weights[(i, j)].to_le_bytes());
            }
        }
        for b in layer.bias.iter() {
            buf.extend_from_slice(&b.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ToyModel> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    if cur.take(8)? != CHECKPOINT_MAGIC {
        return Err(DoaError::Format(
            "not a model checkpoint (bad magic)".into(),
        ));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(DoaError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n = cur.u32()? as usize;
    let m = cur.u32()? as usize;
    let normalize = match cur.u32()? {
        0 => false,
        1 => true,
        other => return Err(DoaError::Format(format!("bad normalize flag {other}"))),
    };
    let count = cur.u32()? as usize;
    if count != 3 {
        return Err(DoaError::Format(format!(
            "expected 3 layers, found {count}"
        )));
    }
    let shapes = (0..count)
        .map(|_| Ok((cur.u32()? as usize, cur.u32()? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        let weights = DMatrix::from_row_slice(rows, cols, &cur.f64s(rows * cols)?);
        let bias = DVector::from_vec(cur.f64s(rows)?);
        layers.push(Dense { weights, bias });
    }
    cur.finish()?;
    ToyModel::from_parts(n, m, layers, normalize)
}
