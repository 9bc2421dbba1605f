//! Root-MUSIC and the two direction-finding pipelines built on it.
//!
//! The steering vectors use the centered phase `i − 1 − (m − 1)/2`. That
//! convention multiplies every steering vector by the common unit scalar
//! `z^{−(m−1)/2}`, which cancels in `a(θ)ᴴ C a(θ)`, so the root-MUSIC
//! polynomial is built with the plain Vandermonde vector `(1, z, …, z^{m−1})`
//! and has the same roots.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array_model::{sample_covariance, ArrayGeometry, HermitianMatrix, SnapshotBatch};
use crate::covariance_ops::{gram_entries, redundancy_average_entries, EigenDecomposition};
use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, ONE, ZERO};
use crate::losses::LossKind;
use crate::toy_model::ToyModel;

/// Directions found by an estimator, with the numbers needed to diagnose it.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaEstimate {
    /// `k` angles in `[0, π]`, ascending.
    pub directions: Vec<f64>,
    /// `"da"` or `"model:<loss id>"`.
    pub method: String,
    /// Moduli of every root of the root-MUSIC polynomial, ascending.
    pub root_moduli: Vec<f64>,
    /// Eigenvalues of the matrix handed to root-MUSIC, descending.
    pub spectrum: Vec<f64>,
}

impl DoaEstimate {
    pub fn k(&self) -> usize {
        self.directions.len()
    }
}

/// Root-MUSIC on a Hermitian `m × m` covariance with `k` sources.
///
/// The noise projector comes from the `m − k` smallest eigenvalues, so the
/// estimate is unchanged by positive scaling of `R` and by adding `cI`.
pub fn root_music(r: &HermitianMatrix, k: usize, geometry: &ArrayGeometry) -> Result<DoaEstimate> {
    root_music_entries(r.entries(), k, geometry)
}

fn root_music_entries(r: &CMatrix, k: usize, geometry: &ArrayGeometry) -> Result<DoaEstimate> {
    let m = check_dims(r, k, geometry)?;
    let eig = EigenDecomposition::of_entries(r);
    let noise = eig.vectors().columns(k, m - k);
    let projector = noise * noise.adjoint();
    roots_to_estimate(&projector, k, geometry, eig.values().to_vec())
}

/// Root-MUSIC from an explicit noise-subspace projector `C = E_n E_nᴴ`.
pub fn root_music_from_projector(
    projector: &CMatrix,
    k: usize,
    geometry: &ArrayGeometry,
) -> Result<DoaEstimate> {
    check_dims(projector, k, geometry)?;
    let spectrum = EigenDecomposition::of_entries(projector).values().to_vec();
    roots_to_estimate(projector, k, geometry, spectrum)
}

fn check_dims(r: &CMatrix, k: usize, geometry: &ArrayGeometry) -> Result<usize> {
    let m = geometry.m();
    if r.shape() != (m, m) {
        return Err(DoaError::dims(
            format!("{m}x{m}"),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    if k == 0 || k >= m {
        return Err(DoaError::domain(format!("k = {k} outside [1, {}]", m - 1)));
    }
    Ok(m)
}

fn roots_to_estimate(
    projector: &CMatrix,
    k: usize,
    geometry: &ArrayGeometry,
    spectrum: Vec<f64>,
) -> Result<DoaEstimate> {
    let coeffs = music_polynomial(projector);
    let roots = polynomial_roots(&coeffs);
    let mut root_moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
    root_moduli.sort_by(f64::total_cmp);

    let mut candidates = reciprocal_representatives(&roots);
    if candidates.len() < k {
        return Err(DoaError::EstimationFailure {
            reason: format!("found {} admissible roots for k = {k}", candidates.len()),
            root_moduli,
            spectrum,
        });
    }
    candidates.sort_by(|a, b| {
        (1.0 - a.norm())
            .total_cmp(&(1.0 - b.norm()))
            .then(a.arg().total_cmp(&b.arg()))
    });

    let kd = 2.0 * PI * geometry.spacing_ratio();
    let mut directions: Vec<f64> = candidates[..k]
        .iter()
        .map(|z| (z.arg() / kd).clamp(-1.0, 1.0).acos())
        .collect();
    directions.sort_by(f64::total_cmp);
    Ok(DoaEstimate {
        directions,
        method: String::new(),
        root_moduli,
        spectrum,
    })
}

/// Coefficients, lowest degree first, of `z^{m−1} · Σ_ℓ c_ℓ z^ℓ` where `c_ℓ`
/// is the sum of the `ℓ`-th diagonal of `C`.
pub(crate) fn music_polynomial(c: &CMatrix) -> Vec<Complex64> {
    let m = c.nrows();
    let mut coeffs = vec![ZERO; 2 * m - 1];
    for p in 0..m {
        for q in 0..m {
            // z^{q−p} shifted by m − 1
            coeffs[q + m - 1 - p] += c[(p, q)];
        }
    }
    coeffs
}

/// All roots of `Σ c_i z^i` via the eigenvalues of the companion matrix,
/// after dropping negligible leading and trailing coefficients.
pub(crate) fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let tiny = 1e-14 * scale;
    let lo = coeffs.iter().position(|c| c.norm() > tiny).unwrap_or(0);
    let hi = coeffs.iter().rposition(|c| c.norm() > tiny).unwrap_or(0);
    let trimmed = &coeffs[lo..=hi];
    let degree = trimmed.len() - 1;
    if degree == 0 {
        return Vec::new();
    }

    let lead = trimmed[degree];
    let mut companion = CMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = ONE;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -trimmed[i] / lead;
    }
    let roots: Vec<Complex64> = match companion.clone().try_schur(1e-15, 10_000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            (0..degree).map(|i| t[(i, i)]).collect()
        }
        None => return Vec::new(),
    };
    roots.into_iter().map(|z| polish(trimmed, z)).collect()
}

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// A few Newton steps, each kept only if it reduces `|p(z)|`.
fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = horner(coeffs, z);
    for _ in 0..3 {
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let (pn, dpn) = horner(coeffs, next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
        p = pn;
        dp = dpn;
    }
    z
}

/// The polynomial of a Hermitian projector is self-reciprocal, so its roots
/// come in pairs `z ↔ 1/z̄` sharing a phase. Pairs are formed greedily from
/// the smallest modulus up, and each pair contributes one representative
/// inside the unit circle: modulus `sqrt(|z|/|w|)` and the phase of the mean
/// unit phasor. Roots on the circle whose pair split tangentially instead
/// of radially are therefore counted once.
pub(crate) fn reciprocal_representatives(roots: &[Complex64]) -> Vec<Complex64> {
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&a, &b| roots[a].norm().total_cmp(&roots[b].norm()));
    let mut used = vec![false; roots.len()];
    let mut reps = Vec::with_capacity(roots.len() / 2);
    for (pos, &i) in order.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        if z.norm() == 0.0 {
            continue;
        }
        let mirror = ONE / z.conj();
        let partner = order[pos + 1..]
            .iter()
            .copied()
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                (roots[a] - mirror)
                    .norm()
                    .total_cmp(&(roots[b] - mirror).norm())
            });
        let Some(j) = partner else {
            if z.norm() <= 1.0 {
                reps.push(z);
            }
            continue;
        };
        used[j] = true;
        let w = roots[j];
        let modulus = (z.norm() / w.norm()).sqrt();
        let phase = (z / z.norm() + w / w.norm()).arg();
        reps.push(Complex64::from_polar(modulus, phase));
    }
    reps
}

/// Direct augmentation: sample covariance, redundancy averaging, root-MUSIC.
pub fn da_pipeline(
    batch: &SnapshotBatch,
    k: usize,
    geometry: &ArrayGeometry,
) -> Result<DoaEstimate> {
    let rs = sample_covariance(batch)?;
    let r = redundancy_average_entries(rs.entries(), geometry)?;
    let mut est = root_music_entries(&r, k, geometry)?;
    est.method = "da".to_string();
    Ok(est)
}

/// Network pipeline: sample covariance through the model, Gram map, then
/// root-MUSIC. For `si-noise` the Gram approximates the noise projector, so
/// its top `m − k` eigenvectors span the noise subspace; every other loss
/// yields a covariance-like or signal-projector-like matrix whose top `k`
/// eigenvectors span the signal subspace.
pub fn model_pipeline(
    batch: &SnapshotBatch,
    k: usize,
    model: &ToyModel,
    loss: LossKind,
    delta: f64,
) -> Result<DoaEstimate> {
    let geometry = batch.geometry();
    if model.n() != geometry.n() || model.m() != geometry.m() {
        return Err(DoaError::dims(
            format!("model for n = {}, m = {}", geometry.n(), geometry.m()),
            format!("n = {}, m = {}", model.n(), model.m()),
        ));
    }
    let rs = sample_covariance(batch)?;
    let e = model.predict(rs.entries())?;
    let gram = gram_entries(&e, delta)?;
    let mut est = if loss == LossKind::SiNoise {
        let m = geometry.m();
        check_dims(&gram, k, geometry)?;
        let eig = EigenDecomposition::of_entries(&gram);
        let noise = eig.vectors().columns(0, m - k);
        let projector = noise * noise.adjoint();
        roots_to_estimate(&projector, k, geometry, eig.values().to_vec())?
    } else {
        root_music_entries(&gram, k, geometry)?
    };
    est.method = format!("model:{}", loss.id());
    Ok(est)
}
