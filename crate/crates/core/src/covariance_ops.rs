//! Structured covariance constructions: the Gram map, redundancy averaging
//! (direct augmentation), sorted Hermitian eigendecomposition and the
//! signal/noise subspace split.

use num_complex::Complex64;

use crate::array_model::{ArrayGeometry, HermitianMatrix, HERMITIAN_TOL};
use crate::error::{DoaError, Result};
use crate::linalg::{ensure_square, hermitian_defect, CMatrix, ZERO};

/// Gram-map shift used for training-time predictions.
pub const DEFAULT_GRAM_DELTA: f64 = 0.0;
/// Shift used when the result feeds the affine-invariant distance.
pub const AFFINE_PD_SHIFT: f64 = 1e-4;

/// Orthonormality tolerance for [`SubspaceBasis`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// `E Eᴴ + δI`, positive semidefinite for any `E` and definite when `δ > 0`.
pub fn gram_psd(e: &CMatrix, delta: f64) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::classified(gram_entries(e, delta)?))
}

/// Entries of `E Eᴴ + δI`, computed exactly Hermitian.
pub(crate) fn gram_entries(e: &CMatrix, delta: f64) -> Result<CMatrix> {
    let m = ensure_square(e, "Gram input")?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(DoaError::domain(format!(
            "Gram shift must be nonnegative, got {delta}"
        )));
    }
    let mut g = CMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = ZERO;
            for l in 0..m {
                acc += e[(i, l)] * e[(j, l)].conj();
            }
            if i == j {
                acc = Complex64::new(acc.re + delta, 0.0);
            }
            g[(i, j)] = acc;
            g[(j, i)] = acc.conj();
        }
    }
    Ok(g)
}

/// Redundancy averaging: estimates each co-array lag `r(ℓ)` as the mean of
/// the SLA covariance entries with `e_i − e_j = ℓ` (the mirrored entries
/// contribute conjugates) and returns the Hermitian Toeplitz matrix with first
/// column `(r(0), …, r(m−1))`. No PSD correction is applied.
pub fn redundancy_average(
    rs: &HermitianMatrix,
    geometry: &ArrayGeometry,
) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::classified(redundancy_average_entries(
        rs.entries(),
        geometry,
    )?))
}

pub(crate) fn redundancy_average_entries(
    rs: &CMatrix,
    geometry: &ArrayGeometry,
) -> Result<CMatrix> {
    if !geometry.coarray_complete() {
        return Err(DoaError::UnsupportedGeometry(format!(
            "co-array of {:?} has holes",
            geometry.sensors()
        )));
    }
    let n = geometry.n();
    if rs.shape() != (n, n) {
        return Err(DoaError::dims(
            format!("{n}x{n}"),
            format!("{}x{}", rs.nrows(), rs.ncols()),
        ));
    }
    let m = geometry.m();
    let mut sums = vec![ZERO; m];
    let mut counts = vec![0usize; m];
    let sensors = geometry.sensors();
    for (i, &ei) in sensors.iter().enumerate() {
        for (j, &ej) in sensors.iter().enumerate() {
            let v = rs[(i, j)];
            if ei >= ej {
                let lag = ei - ej;
                sums[lag] += v;
                counts[lag] += 1;
            } else {
                let lag = ej - ei;
                sums[lag] += v.conj();
                counts[lag] += 1;
            }
        }
    }
    let mut lags: Vec<Complex64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    lags[0].im = 0.0;
    Ok(hermitian_toeplitz(&lags))
}

/// Hermitian Toeplitz matrix `T[p, q] = r(p − q)` for `p ≥ q` and `conj(r(q − p))` otherwise.
pub fn hermitian_toeplitz(first_column: &[Complex64]) -> CMatrix {
    let m = first_column.len();
    CMatrix::from_fn(m, m, |p, q| {
        if p >= q {
            first_column[p - q]
        } else {
            first_column[q - p].conj()
        }
    })
}

/// Optional post-step for DA outputs: clips negative eigenvalues to zero.
pub fn clip_to_psd(r: &HermitianMatrix) -> HermitianMatrix {
    let decomp = EigenDecomposition::of(r);
    let clipped: Vec<f64> = decomp.values.iter().map(|v| v.max(0.0)).collect();
    let entries = crate::linalg::spectral_map(&decomp.vectors, &clipped, |v| v);
    HermitianMatrix::classified(crate::linalg::hermitian_part(&entries))
}

/// Eigenvalues sorted descending with matching unitary eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn of(r: &HermitianMatrix) -> Self {
        Self::of_entries(r.entries())
    }

    pub(crate) fn of_entries(r: &CMatrix) -> Self {
        let eig = r.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        // Stable sort keeps the solver's order for exact ties.
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = eig.eigenvectors.select_columns(order.iter());
        Self { values, vectors }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `E Λ Eᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        crate::linalg::spectral_map(&self.vectors, &self.values, |v| v)
    }
}

/// Eigendecomposition of a raw matrix, rejecting inputs that are not
/// Hermitian within the shared tolerance.
pub fn hermitian_eig(r: &CMatrix) -> Result<EigenDecomposition> {
    ensure_square(r, "eigendecomposition input")?;
    let defect = hermitian_defect(r);
    if defect > HERMITIAN_TOL {
        return Err(DoaError::domain(format!(
            "eigendecomposition input is not Hermitian (relative defect {defect:.3e})"
        )));
    }
    Ok(EigenDecomposition::of_entries(r))
}

/// An `m × k` matrix with orthonormal columns, i.e. a point of `Gr(k, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: CMatrix,
}

impl SubspaceBasis {
    /// Validates `BᴴB = I` within 1e-10 and `1 ≤ k ≤ m − 1`.
    pub fn new(basis: CMatrix) -> Result<Self> {
        let (m, k) = basis.shape();
        if k == 0 || k >= m {
            return Err(DoaError::domain(format!(
                "subspace dimension {k} outside [1, {}]",
                m.saturating_sub(1)
            )));
        }
        let gram = basis.adjoint() * &basis;
        let defect = (gram - CMatrix::identity(k, k))
            .iter()
            .fold(0.0_f64, |a, z| a.max(z.norm()));
        if defect > ORTHONORMAL_TOL {
            return Err(DoaError::domain(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes the columns of `a` (thin QR) and wraps the result.
    pub fn orthonormalize(a: &CMatrix) -> Result<Self> {
        let (m, k) = a.shape();
        if k == 0 || k >= m {
            return Err(DoaError::domain(format!(
                "subspace dimension {k} outside [1, {}]",
                m.saturating_sub(1)
            )));
        }
        let q = a.clone().qr().q();
        Self::new(q.columns(0, k).into_owned())
    }

    pub(crate) fn from_orthonormal(basis: CMatrix) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector `B Bᴴ`.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Same subspace expressed in the basis `B Q` for a `k × k` unitary `Q`.
    pub fn rotated(&self, q: &CMatrix) -> Result<Self> {
        Self::new(&self.basis * q)
    }
}

/// Splits a decomposition into the top-`k` (signal) and remaining (noise)
/// eigenvector subspaces.
pub fn subspace_split(
    decomp: &EigenDecomposition,
    k: usize,
) -> Result<(SubspaceBasis, SubspaceBasis)> {
    let m = decomp.dim();
    if k == 0 || k >= m {
        return Err(DoaError::domain(format!(
            "k = {k} outside [1, {}]",
            m.saturating_sub(1)
        )));
    }
    let signal = decomp.vectors.columns(0, k).into_owned();
    let noise = decomp.vectors.columns(k, m - k).into_owned();
    Ok((
        SubspaceBasis::from_orthonormal(signal),
        SubspaceBasis::from_orthonormal(noise),
    ))
}
