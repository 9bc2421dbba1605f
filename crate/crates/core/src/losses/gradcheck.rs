//! Central finite-difference validation of the analytic loss gradients.

use num_complex::Complex64;
use rand::Rng;

use super::{evaluate, LossConfig, LossKind, LossTarget};
use crate::covariance_ops::SubspaceBasis;
use crate::error::{DoaError, Result};
use crate::linalg::CMatrix;
use crate::random_matrices::{random_complex, random_pd, random_unitary};

/// A point at which to check a loss: target, raw prediction `E` and config.
#[derive(Debug, Clone)]
pub struct GradientInputs {
    pub target: LossTarget,
    pub raw: CMatrix,
    pub config: LossConfig,
}

/// Max-norm relative error `‖g − g_fd‖_∞ / ‖g_fd‖_∞` between the analytic
/// gradient (with respect to the raw matrix `E`, through the Gram map) and
/// central differences over every real and imaginary component of `E`.
pub fn loss_gradient_check(kind: LossKind, inputs: &GradientInputs, step: f64) -> Result<f64> {
    if !(step.is_finite() && step > 0.0) {
        return Err(DoaError::domain("finite-difference step must be positive"));
    }
    let eval = evaluate(kind, &inputs.target, &inputs.raw, &inputs.config)?;
    if eval.singular {
        return Err(DoaError::SingularPoint(format!(
            "`{kind}` is singular at the requested point (value {})",
            eval.value
        )));
    }
    let value_at = |e: &CMatrix| -> Result<f64> {
        let ev = evaluate(kind, &inputs.target, e, &inputs.config)?;
        if ev.singular {
            return Err(DoaError::SingularPoint(format!(
                "`{kind}` became singular inside the stencil"
            )));
        }
        Ok(ev.value)
    };

    let (rows, cols) = inputs.raw.shape();
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..rows {
        for j in 0..cols {
            for (dir, analytic) in [
                (Complex64::new(step, 0.0), eval.gradient[(i, j)].re),
                (Complex64::new(0.0, step), eval.gradient[(i, j)].im),
            ] {
                let mut plus = inputs.raw.clone();
                plus[(i, j)] += dir;
                let mut minus = inputs.raw.clone();
                minus[(i, j)] -= dir;
                let fd = (value_at(&plus)? - value_at(&minus)?) / (2.0 * step);
                worst = worst.max((fd - analytic).abs());
                scale = scale.max(fd.abs());
            }
        }
    }
    Ok(worst / scale.max(f64::MIN_POSITIVE))
}

/// Random, well-conditioned check point for `kind` on an `m × m` problem
/// with a `k`-dimensional signal subspace.
pub fn random_gradient_inputs<R: Rng + ?Sized>(
    kind: LossKind,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<GradientInputs> {
    let raw = random_complex(rng, m, m);
    let target = if kind.uses_subspace_target() {
        let full = random_unitary(rng, m);
        LossTarget::Subspace {
            signal: SubspaceBasis::new(full.columns(0, k).into_owned())?,
            noise: SubspaceBasis::new(full.columns(k, m - k).into_owned())?,
        }
    } else {
        LossTarget::Covariance(random_pd(rng, m, 0.1))
    };
    let config = match kind {
        LossKind::SiCov | LossKind::SiSignal | LossKind::SiNoise => LossConfig {
            epsilon: 1e-3,
            ..LossConfig::default()
        },
        _ => LossConfig::default(),
    };
    Ok(GradientInputs {
        target,
        raw,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_loss_passes_on_random_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for kind in LossKind::ALL {
            for _ in 0..3 {
                let inputs = random_gradient_inputs(kind, 4, 2, &mut rng).unwrap();
                let err = loss_gradient_check(kind, &inputs, 1e-6).unwrap();
                assert!(err < kind.gradient_tolerance(), "{kind}: {err:.3e}");
            }
        }
    }

    #[test]
    fn zero_epsilon_si_cov_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut inputs = random_gradient_inputs(LossKind::SiCov, 4, 2, &mut rng).unwrap();
        inputs.config.epsilon = 0.0;
        assert!(loss_gradient_check(LossKind::SiCov, &inputs, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn singular_points_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut inputs = random_gradient_inputs(LossKind::Frobenius, 3, 1, &mut rng).unwrap();
        // E = I with target I makes the Frobenius residual vanish.
        inputs.raw = CMatrix::identity(3, 3);
        inputs.target =
            LossTarget::Covariance(crate::HermitianMatrix::new(CMatrix::identity(3, 3)).unwrap());
        assert!(matches!(
            loss_gradient_check(LossKind::Frobenius, &inputs, 1e-6),
            Err(DoaError::SingularPoint(_))
        ));
    }

    #[test]
    fn wrong_target_type_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let inputs = random_gradient_inputs(LossKind::Frobenius, 3, 1, &mut rng).unwrap();
        assert!(loss_gradient_check(LossKind::Subspace, &inputs, 1e-6).is_err());
    }
}
