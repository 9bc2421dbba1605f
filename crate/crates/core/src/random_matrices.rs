//! Random matrix ensembles used by the gradient checker, the examples and the
//! test suites.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::array_model::HermitianMatrix;
use crate::linalg::CMatrix;

/// Entries i.i.d. `CN(0, 1)`.
pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// `(X + Xᴴ)/2` for Gaussian `X`; indefinite in general.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, m: usize) -> HermitianMatrix {
    let x = random_complex(rng, m, m);
    HermitianMatrix::from_hermitian_part(&x).expect("square")
}

/// `X Xᴴ / m + floor·I`, positive definite with moderate conditioning.
pub fn random_pd<R: Rng + ?Sized>(rng: &mut R, m: usize, floor: f64) -> HermitianMatrix {
    let x = random_complex(rng, m, m);
    let g = crate::covariance_ops::gram_entries(&x, 0.0).expect("square");
    let mut g = g.scale(1.0 / m as f64);
    for i in 0..m {
        g[(i, i)].re += floor;
    }
    HermitianMatrix::new(g).expect("Gram matrices are Hermitian")
}

/// Haar-like unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    random_complex(rng, m, m).qr().q()
}

/// PD matrix with the prescribed spectrum in a random eigenbasis.
pub fn pd_with_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64]) -> HermitianMatrix {
    let u = random_unitary(rng, spectrum.len());
    let entries = crate::linalg::spectral_map(&u, spectrum, |v| v);
    HermitianMatrix::from_hermitian_part(&entries).expect("square")
}
