//! Affine-invariant distance on the positive-definite cone.

use crate::array_model::HermitianMatrix;
use crate::covariance_ops::EigenDecomposition;
use crate::error::{DoaError, Result};
use crate::linalg::{ensure_same_shape, hermitian_defect, hermitian_part, spectral_map, CMatrix};

use super::{LossConfig, LossEvaluation};

/// `‖log(R^{-1/2} P R^{-1/2})‖_F` after shifting both sides by
/// `config.pd_shift · I`.
///
/// The loss is a spectral function `sqrt(Σ log²λ_i)` of
/// `M = R^{-1/2} P R^{-1/2}`, so its gradient is
/// `R^{-1/2} U diag(log λ_i / λ_i) Uᴴ R^{-1/2} / value` with no divided
/// differences, and repeated eigenvalues need no special handling.
pub fn affine_invariant_distance(
    target: &HermitianMatrix,
    prediction: &CMatrix,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    ensure_same_shape(target.entries(), prediction)?;
    let defect = hermitian_defect(prediction);
    if defect > 1e-10 {
        return Err(DoaError::domain(format!(
            "affine-invariant prediction is not Hermitian (defect {defect:.3e})"
        )));
    }
    let m = prediction.nrows();
    let shift = config.pd_shift;

    let mut target_shifted = target.entries().clone();
    let mut pred_shifted = hermitian_part(prediction);
    for i in 0..m {
        target_shifted[(i, i)].re += shift;
        pred_shifted[(i, i)].re += shift;
    }

    let target_eig = EigenDecomposition::of_entries(&target_shifted);
    let min_target = *target_eig.values().last().unwrap();
    if !(min_target > 0.0) {
        return Err(DoaError::domain(format!(
            "target is not positive definite after shift (min eigenvalue {min_target:.3e})"
        )));
    }
    let inv_sqrt = spectral_map(target_eig.vectors(), target_eig.values(), |v| {
        1.0 / v.sqrt()
    });
    let whitened = hermitian_part(&(&inv_sqrt * pred_shifted * &inv_sqrt));
    let eig = EigenDecomposition::of_entries(&whitened);
    let min_pred = *eig.values().last().unwrap();
    if !(min_pred > 0.0) {
        return Err(DoaError::domain(format!(
            "prediction is not positive definite after shift (min whitened eigenvalue {min_pred:.3e})"
        )));
    }

    let value = eig
        .values()
        .iter()
        .map(|v| v.ln().powi(2))
        .sum::<f64>()
        .sqrt();
    if value <= config.clamp_floor {
        return Ok(LossEvaluation::singular(value, m, m));
    }
    let inner = spectral_map(eig.vectors(), eig.values(), |v| v.ln() / v);
    let gradient = (&inv_sqrt * inner * &inv_sqrt).unscale(value);
    Ok(LossEvaluation::regular(value, gradient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_matrices::{random_complex, random_pd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_shift() -> LossConfig {
        LossConfig {
            pd_shift: 0.0,
            ..LossConfig::default()
        }
    }

    #[test]
    fn scaling_law_at_e_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let r = random_pd(&mut rng, 7, 0.2);
        let alpha = std::f64::consts::E.powi(2);
        let d = affine_invariant_distance(&r, &r.entries().scale(alpha), &no_shift()).unwrap();
        assert!((d.value - 2.0 * 7f64.sqrt()).abs() < 1e-10, "{}", d.value);
    }

    #[test]
    fn identical_inputs_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = random_pd(&mut rng, 4, 0.2);
        let d = affine_invariant_distance(&r, r.entries(), &LossConfig::default()).unwrap();
        assert!(d.value < 1e-12);
        assert!(d.singular);
    }

    #[test]
    fn congruence_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let r = random_pd(&mut rng, 4, 0.3);
            let p = random_pd(&mut rng, 4, 0.3);
            let mut mtx = random_complex(&mut rng, 4, 4);
            for i in 0..4 {
                mtx[(i, i)].re += 2.0;
            }
            let base = affine_invariant_distance(&r, p.entries(), &no_shift())
                .unwrap()
                .value;
            let r2 = HermitianMatrix::from_hermitian_part(&(&mtx * r.entries() * mtx.adjoint()))
                .unwrap();
            let p2 = hermitian_part(&(&mtx * p.entries() * mtx.adjoint()));
            let moved = affine_invariant_distance(&r2, &p2, &no_shift())
                .unwrap()
                .value;
            assert!((base - moved).abs() < 1e-8, "{base} vs {moved}");
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let r = random_pd(&mut rng, 5, 0.3);
        let p = random_pd(&mut rng, 5, 0.3);
        let a = affine_invariant_distance(&r, p.entries(), &no_shift())
            .unwrap()
            .value;
        let b = affine_invariant_distance(&p, r.entries(), &no_shift())
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn non_pd_inputs_rejected() {
        let singular = HermitianMatrix::new(CMatrix::zeros(3, 3)).unwrap();
        let id = CMatrix::identity(3, 3);
        assert!(affine_invariant_distance(&singular, &id, &no_shift()).is_err());
        // the default shift makes the zero target admissible
        assert!(affine_invariant_distance(&singular, &id, &LossConfig::default()).is_ok());
        let target = HermitianMatrix::new(id.clone()).unwrap();
        assert!(
            affine_invariant_distance(&target, &id.scale(-1.0), &LossConfig::default()).is_err()
        );
    }
}
