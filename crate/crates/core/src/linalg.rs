//! Small complex linear-algebra helpers shared by the estimators and losses.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DoaError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Real part of the Frobenius inner product `tr(Aᴴ B)`.
pub fn frob_inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn frob_norm(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Max entry deviation from Hermitian symmetry, relative to the largest entry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let scale = a.iter().map(|x| x.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn identity(m: usize) -> CMatrix {
    CMatrix::identity(m, m)
}

pub(crate) fn ensure_square(a: &CMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(DoaError::dims(
            format!("square {what}"),
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(a.nrows())
}

pub(crate) fn ensure_same_shape(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DoaError::dims(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// Applies a real function to the eigenvalues of a Hermitian matrix,
/// `U f(Λ) Uᴴ`, with `U` and `Λ` from a prior decomposition.
pub(crate) fn spectral_map(vectors: &CMatrix, values: &[f64], f: impl Fn(f64) -> f64) -> CMatrix {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        scaled.column_mut(j).scale_mut(fv);
    }
    scaled * vectors.adjoint()
}
