//! Training examples and their on-disk formats.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "GDOADATA"
//! version      u32      1
//! n, m, k      u32 ×3
//! count        u64
//! d/λ          f64
//! sensors      u32 × n  (1-based positions)
//! count records of f64:
//!   snr_db, snapshots, θ_1..θ_k,
//!   realify(R̂_S)  (2·n·n),
//!   realify(R)    (2·m·m)
//! ```
//!
//! Only the noiseless covariance `R` is stored; the subspace targets are
//! derived from it when a loss needs them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{complexify, realify};
use crate::array_model::{
    exact_covariances, sample_covariance, synthesize_with_rng, ArrayGeometry, HermitianMatrix,
    SourceScene,
};
use crate::error::{DoaError, Result};
use crate::evaluation::{sample_directions, snr_to_noise_power};
use crate::linalg::CMatrix;
use crate::losses::{LossKind, LossTarget};
use crate::rng::{point_key, stream, StreamDomain};

pub const DATASET_MAGIC: &[u8; 8] = b"GDOADATA";
pub const DATASET_VERSION: u32 = 1;

/// Training direction range `[π/6, 5π/6]`.
pub const TRAINING_RANGE: (f64, f64) = (PI / 6.0, 5.0 * PI / 6.0);
/// Training minimum separation `π/60`.
pub const TRAINING_MIN_SEPARATION: f64 = PI / 60.0;
/// Training SNR set `{−11, −9, …, 21}` dB.
pub const TRAINING_SNR_DB: [f64; 17] = [
    -11.0, -9.0, -7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0,
    21.0,
];

/// One example: the SLA sample covariance and the noiseless ULA covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub input: CMatrix,
    pub covariance: HermitianMatrix,
    pub directions: Vec<f64>,
    pub snr_db: f64,
    pub snapshots: usize,
}

impl DatasetPair {
    pub fn k(&self) -> usize {
        self.directions.len()
    }

    /// The target `kind` is trained against.
    pub fn target(&self, kind: LossKind) -> Result<LossTarget> {
        LossTarget::for_loss(kind, &self.covariance, self.k())
    }
}

/// `size` examples with `k` sources at unit power, each drawn from its own
/// stream so the result does not depend on the thread count.
pub fn generate_dataset(
    geometry: &ArrayGeometry,
    k: usize,
    size: usize,
    snapshots: usize,
    snr_set: &[f64],
    seed: u64,
) -> Result<Vec<DatasetPair>> {
    if size == 0 || snapshots == 0 || snr_set.is_empty() {
        return Err(DoaError::domain(
            "dataset size, snapshot count and SNR set must be nonempty",
        ));
    }
    if k == 0 || k >= geometry.m() {
        return Err(DoaError::domain(format!(
            "k = {k} outside [1, {}]",
            geometry.m() - 1
        )));
    }
    let point = point_key(&[k as u64, snapshots as u64]);
    (0..size)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream(seed, StreamDomain::Dataset, point, index as u64);
            let directions =
                sample_directions(k, TRAINING_RANGE, TRAINING_MIN_SEPARATION, &mut rng)?;
            let snr_db = snr_set[rng.random_range(0..snr_set.len())];
            let scene = SourceScene::equal_power(
                directions.clone(),
                1.0,
                snr_to_noise_power(snr_db, 1.0)?,
                snapshots,
            )?;
            let batch = synthesize_with_rng(&scene, geometry, &mut rng)?;
            let input = sample_covariance(&batch)?.into_inner();
            let (covariance, _) = exact_covariances(&scene, geometry)?;
            Ok(DatasetPair {
                input,
                covariance,
                directions,
                snr_db,
                snapshots,
            })
        })
        .collect()
}

/// What a dataset file declares about its contents.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub geometry: ArrayGeometry,
    pub k: usize,
    pub count: usize,
}

fn check_consistent(geometry: &ArrayGeometry, pairs: &[DatasetPair]) -> Result<usize> {
    let k = pairs.first().map(DatasetPair::k).unwrap_or(0);
    let (n, m) = (geometry.n(), geometry.m());
    for p in pairs {
        if p.k() != k || p.input.shape() != (n, n) || p.covariance.dim() != m {
            return Err(DoaError::Format(
                "examples disagree on k or matrix shapes".into(),
            ));
        }
    }
    Ok(k)
}

pub fn write_dataset(path: &Path, geometry: &ArrayGeometry, pairs: &[DatasetPair]) -> Result<()> {
    let k = check_consistent(geometry, pairs)?;
    let (n, m) = (geometry.n(), geometry.m());
    let record = 2 + k + 2 * n * n + 2 * m * m;
    let mut buf = Vec::with_capacity(40 + 4 * n + 8 * record * pairs.len());
    buf.extend_from_slice(DATASET_MAGIC);
    for v in [DATASET_VERSION, n as u32, m as u32, k as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(pairs.len() as u64).to_le_bytes());
    buf.extend_from_slice(&geometry.spacing_ratio().to_le_bytes());
    for &e in geometry.sensors() {
        buf.extend_from_slice(&(e as u32).to_le_bytes());
    }
    for p in pairs {
        let values = [p.snr_db, p.snapshots as f64]
            .into_iter()
            .chain(p.directions.iter().copied())
            .chain(realify(&p.input))
            .chain(realify(p.covariance.entries()));
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Little-endian reader over a byte slice.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                DoaError::Format(format!(
                    "file truncated at byte {} (wanted {len} more)",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64()).collect()
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(DoaError::Format(format!(
                "{} trailing bytes after the last record",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetPair>)> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor::new(&bytes);
    if cur.take(8)? != DATASET_MAGIC {
        return Err(DoaError::Format("not a dataset file (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(DoaError::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let n = cur.u32()? as usize;
    let m = cur.u32()? as usize;
    let k = cur.u32()? as usize;
    let count = cur.u64()? as usize;
    let spacing = cur.f64()?;
    let sensors = (0..n)
        .map(|_| cur.u32().map(|e| e as usize))
        .collect::<Result<Vec<_>>>()?;
    let geometry = ArrayGeometry::new(sensors, m, spacing)
        .map_err(|e| DoaError::Format(format!("bad geometry: {e}")))?;

    let mut pairs = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        let snr_db = cur.f64()?;
        let snapshots = cur.f64()? as usize;
        let directions = cur.f64s(k)?;
        let input = complexify(&cur.f64s(2 * n * n)?, n, n)?;
        let covariance = HermitianMatrix::new(complexify(&cur.f64s(2 * m * m)?, m, m)?)
            .map_err(|e| DoaError::Format(format!("stored covariance rejected: {e}")))?;
        pairs.push(DatasetPair {
            input,
            covariance,
            directions,
            snr_db,
            snapshots,
        });
    }
    cur.finish()?;
    Ok((DatasetHeader { geometry, k, count }, pairs))
}

/// One row per example: metadata, then the real and imaginary parts of
/// `R̂_S` and `R` in row-major order.
pub fn export_dataset_csv(
    path: &Path,
    geometry: &ArrayGeometry,
    pairs: &[DatasetPair],
) -> Result<()> {
    let k = check_consistent(geometry, pairs)?;
    let (n, m) = (geometry.n(), geometry.m());
    let mut out = String::from("index,snr_db,snapshots");
    for i in 1..=k {
        write!(out, ",theta_{i}").unwrap();
    }
    for (name, dim) in [("rs", n), ("r", m)] {
        for part in ["re", "im"] {
            for i in 0..dim {
                for j in 0..dim {
                    write!(out, ",{name}_{part}_{i}_{j}").unwrap();
                }
            }
        }
    }
    out.push('\n');
    for (idx, p) in pairs.iter().enumerate() {
        write!(out, "{idx},{:.16e},{}", p.snr_db, p.snapshots).unwrap();
        for v in p
            .directions
            .iter()
            .copied()
            .chain(realify(&p.input))
            .chain(realify(p.covariance.entries()))
        {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
