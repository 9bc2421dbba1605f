//! Frobenius and scale-invariant reconstruction losses.

use crate::array_model::HermitianMatrix;
use crate::covariance_ops::SubspaceBasis;
use crate::error::{DoaError, Result};
use crate::linalg::{ensure_same_shape, frob_inner_re, frob_norm, CMatrix};

use super::{LossConfig, LossEvaluation};

/// `α* = Re⟨R, P⟩ / ‖R‖²`, the minimizer of `‖αR − P‖_F` over real `α`.
pub fn optimal_scale(target: &HermitianMatrix, prediction: &CMatrix) -> Result<f64> {
    ensure_same_shape(target.entries(), prediction)?;
    scale_of(target.entries(), prediction)
}

fn scale_of(target: &CMatrix, prediction: &CMatrix) -> Result<f64> {
    let r2 = frob_inner_re(target, target);
    if r2 == 0.0 {
        return Err(DoaError::SingularTarget);
    }
    Ok(frob_inner_re(target, prediction) / r2)
}

/// `‖P − R‖_F` with gradient `(P − R)/‖P − R‖_F`.
pub fn frobenius_loss(target: &HermitianMatrix, prediction: &CMatrix) -> Result<LossEvaluation> {
    ensure_same_shape(target.entries(), prediction)?;
    let diff = prediction - target.entries();
    let value = frob_norm(&diff);
    if value == 0.0 {
        return Ok(LossEvaluation::singular(0.0, diff.nrows(), diff.ncols()));
    }
    Ok(LossEvaluation::regular(value, diff.unscale(value)))
}

/// `−log(‖α* R‖ / (ε + ‖α* R − P‖))`.
///
/// The ratio inside the log is clamped to `[clamp_floor, 1/clamp_floor]`
/// relative to the prediction's own scale, so the clamp does not break the
/// scale invariance. A clamped evaluation is flagged singular with a zero
/// gradient; for an exact fit with `ε = 0` the unclamped value is `−∞`.
pub fn si_reconstruction_loss(
    target: &HermitianMatrix,
    prediction: &CMatrix,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    ensure_same_shape(target.entries(), prediction)?;
    si_core(target.entries(), prediction, config)
}

fn si_core(target: &CMatrix, prediction: &CMatrix, config: &LossConfig) -> Result<LossEvaluation> {
    let r2 = frob_inner_re(target, target);
    let alpha = scale_of(target, prediction)?;
    let (rows, cols) = target.shape();

    let fitted = target.scale(alpha);
    let resid = &fitted - prediction;
    let resid_norm = frob_norm(&resid);
    let numerator = alpha.abs() * r2.sqrt();
    let denominator = config.epsilon + resid_norm;
    let floor = config.clamp_floor;

    if denominator <= floor * numerator {
        return Ok(LossEvaluation::singular(floor.ln(), rows, cols));
    }
    if numerator <= floor * denominator {
        return Ok(LossEvaluation::singular(-floor.ln(), rows, cols));
    }
    let value = denominator.ln() - numerator.ln();
    if resid_norm <= floor * frob_norm(prediction) {
        // ε > 0 with an exact fit: finite value, but ‖D‖ has no derivative.
        return Ok(LossEvaluation::singular(value, rows, cols));
    }
    // The α-dependence of ‖α R − P‖ vanishes at the optimum since
    // Re⟨α R − P, R⟩ = 0, leaving only the −log|α| term.
    let gradient =
        target.scale(-1.0 / (alpha * r2)) - resid.scale(1.0 / (resid_norm * denominator));
    Ok(LossEvaluation::regular(value, gradient))
}

/// Which projector a subspace-target loss fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceSide {
    /// `E_s E_sᴴ`.
    Signal,
    /// `E_n E_nᴴ = I − E_s E_sᴴ`.
    Noise,
}

/// Scale-invariant loss with a projector target. `basis` is the subspace
/// whose projector is fitted: pass the signal basis with
/// [`SubspaceSide::Signal`] and the noise basis with [`SubspaceSide::Noise`].
pub fn si_subspace_loss(
    basis: &SubspaceBasis,
    prediction: &CMatrix,
    config: &LossConfig,
    side: SubspaceSide,
) -> Result<LossEvaluation> {
    let projector = basis.projector();
    ensure_same_shape(&projector, prediction).map_err(|e| match e {
        DoaError::DimensionMismatch { expected, found } => DoaError::DimensionMismatch {
            expected: format!("{expected} ({side:?} projector)"),
            found,
        },
        other => other,
    })?;
    si_core(&projector, prediction, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance_ops::{subspace_split, EigenDecomposition};
    use crate::random_matrices::{random_complex, random_hermitian, random_pd};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> HermitianMatrix {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        HermitianMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))).unwrap()
    }

    /// Golden-section search on `‖αR − P‖²`, independent of the closed form.
    fn golden_section(r: &CMatrix, p: &CMatrix, mut lo: f64, mut hi: f64) -> f64 {
        let f = |a: f64| (r.scale(a) - p).iter().map(|z| z.norm_sqr()).sum::<f64>();
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..400 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = f(x2);
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn optimal_scale_special_cases() {
        let r = diag(&[1.0, 2.0, 3.0]);
        assert_eq!(optimal_scale(&r, &r.entries().scale(2.0)).unwrap(), 2.0);
        let a = diag(&[1.0, 0.0]);
        let b = diag(&[0.0, 1.0]);
        assert_eq!(optimal_scale(&a, b.entries()).unwrap(), 0.0);
        assert!(matches!(
            optimal_scale(&diag(&[0.0, 0.0]), a.entries()),
            Err(DoaError::SingularTarget)
        ));
    }

    #[test]
    fn optimal_scale_matches_line_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            // The line search resolves the minimizer to about
            // sqrt(eps)·‖αR − P‖/‖R‖, so keep the residual small.
            let r = random_hermitian(&mut rng, 4);
            let a: f64 = rng.random_range(-50.0..50.0);
            let noise = random_hermitian(&mut rng, 4);
            let p =
                HermitianMatrix::new(r.entries().scale(a) + noise.entries().scale(1e-2)).unwrap();
            let alpha = optimal_scale(&r, p.entries()).unwrap();
            let oracle = golden_section(r.entries(), p.entries(), -1e3, 1e3);
            assert!((alpha - oracle).abs() < 1e-8, "{alpha} vs {oracle}");
        }
    }

    #[test]
    fn optimal_scale_is_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let r = random_hermitian(&mut rng, 5);
            let p = random_complex(&mut rng, 5, 5);
            let alpha = optimal_scale(&r, &p).unwrap();
            let best = frob_norm(&(r.entries().scale(alpha) - &p));
            for _ in 0..100 {
                let a: f64 = rng.random_range(-20.0..20.0);
                assert!(best <= frob_norm(&(r.entries().scale(a) - &p)) + 1e-12);
            }
        }
    }

    #[test]
    fn frobenius_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = random_pd(&mut rng, 4, 0.1);
        let same = frobenius_loss(&r, r.entries()).unwrap();
        assert_eq!(same.value, 0.0);
        assert!(same.singular);
        for alpha in [-3.0, 0.5, 2.0, 1e3] {
            let v = frobenius_loss(&r, &r.entries().scale(alpha)).unwrap().value;
            let expected = (alpha - 1.0_f64).abs() * frob_norm(r.entries());
            assert!((v - expected).abs() <= 1e-12 * expected);
        }
        assert!(frobenius_loss(&r, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn si_exact_scaling_is_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = random_pd(&mut rng, 5, 0.1);
        let cfg = LossConfig::default();
        for gamma in [-2.0, 1e-3, 1.0, 7.5, 1e3] {
            let eval = si_reconstruction_loss(&r, &r.entries().scale(gamma), &cfg).unwrap();
            assert!(eval.singular);
            assert!(eval.value < -27.0);
            assert!(eval.gradient.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn si_hand_computed_value() {
        let r = diag(&[1.0, 1.0]);
        let p = diag(&[2.0, 0.0]);
        assert_eq!(optimal_scale(&r, p.entries()).unwrap(), 1.0);
        let eval = si_reconstruction_loss(&r, p.entries(), &LossConfig::default()).unwrap();
        assert!(eval.value.abs() < 1e-15);
        assert!(!eval.singular);
    }

    #[test]
    fn si_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cfg = LossConfig::default();
        for _ in 0..10 {
            let r = random_pd(&mut rng, 4, 0.1);
            let p = random_complex(&mut rng, 4, 4);
            let base = si_reconstruction_loss(&r, &p, &cfg).unwrap().value;
            for c in [1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3, -4.0] {
                let v = si_reconstruction_loss(&r, &p.scale(c), &cfg).unwrap().value;
                assert!((v - base).abs() <= 1e-9, "prediction scale {c}");
            }
            for c in [1e-3, 1e-1, 10.0, 1e3] {
                let v = si_reconstruction_loss(&r.scaled(c).unwrap(), &p, &cfg)
                    .unwrap()
                    .value;
                assert!((v - base).abs() <= 1e-9, "target scale {c}");
            }
        }
    }

    #[test]
    fn si_positive_epsilon_breaks_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cfg = LossConfig {
            epsilon: 1e-3,
            ..LossConfig::default()
        };
        let r1 = random_pd(&mut rng, 3, 0.1);
        let r2 = random_pd(&mut rng, 3, 0.1);
        let v1 = si_reconstruction_loss(&r1, &r1.entries().scale(2.0), &cfg).unwrap();
        let v2 = si_reconstruction_loss(&r2, &r2.entries().scale(2.0), &cfg).unwrap();
        assert!(v1.value.is_finite() && v2.value.is_finite());
        assert!((v1.value - v2.value).abs() > 1e-6);
    }

    #[test]
    fn si_subspace_projector_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let r = random_pd(&mut rng, 6, 0.0);
        let (signal, noise) = subspace_split(&EigenDecomposition::of(&r), 2).unwrap();
        let cfg = LossConfig::default();
        let exact =
            si_subspace_loss(&signal, &signal.projector(), &cfg, SubspaceSide::Signal).unwrap();
        assert!(exact.singular && exact.value < -27.0);

        let p = random_complex(&mut rng, 6, 6);
        let base = si_subspace_loss(&signal, &p, &cfg, SubspaceSide::Signal)
            .unwrap()
            .value;
        for c in [1e-3, 0.1, 10.0, 1e3, -1.0] {
            let v = si_subspace_loss(&signal, &p.scale(c), &cfg, SubspaceSide::Signal)
                .unwrap()
                .value;
            assert!((v - base).abs() < 1e-9);
        }
        let noisy = si_subspace_loss(&noise, &p, &cfg, SubspaceSide::Noise).unwrap();
        assert!(noisy.value.is_finite());
        assert!(
            si_subspace_loss(&signal, &CMatrix::zeros(5, 5), &cfg, SubspaceSide::Signal).is_err()
        );
    }
}
