//! Matrix-fitting losses with closed-form values and analytic gradients.
//!
//! # Gradient convention
//!
//! Every loss is a real function of a complex matrix `X`. Its gradient is
//! reported as the single complex matrix
//!
//! ```text
//! G = ∂L/∂Re(X) + j·∂L/∂Im(X)
//! ```
//!
//! so that a first-order perturbation obeys `dL = Re tr(Gᴴ dX)`. The finite
//! difference checker in [`gradcheck`] perturbs the real and imaginary part of
//! every entry independently and compares against exactly this matrix.
//!
//! Losses on a prediction `P` compose with the Gram map `P = E Eᴴ + δI` via
//! `G_E = (G_P + G_Pᴴ) E`; see [`evaluate`].

mod affine;
pub mod gradcheck;
mod grassmann;
mod reconstruction;

use std::fmt;
use std::str::FromStr;

pub use affine::affine_invariant_distance;
pub use gradcheck::{loss_gradient_check, random_gradient_inputs, GradientInputs};
pub use grassmann::{grassmann_distance, principal_angles, subspace_loss};
pub use reconstruction::{
    frobenius_loss, optimal_scale, si_reconstruction_loss, si_subspace_loss, SubspaceSide,
};

use crate::array_model::HermitianMatrix;
use crate::covariance_ops::{
    gram_entries, subspace_split, EigenDecomposition, SubspaceBasis, AFFINE_PD_SHIFT,
};
use crate::error::{DoaError, Result};
use crate::linalg::CMatrix;

/// Stable loss identifiers used in configs, CSV output and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Frobenius,
    SiCov,
    SiSignal,
    SiNoise,
    Affine,
    Subspace,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Frobenius,
        LossKind::SiCov,
        LossKind::SiSignal,
        LossKind::SiNoise,
        LossKind::Affine,
        LossKind::Subspace,
    ];

    pub fn id(self) -> &'static str {
        match self {
            LossKind::Frobenius => "fro",
            LossKind::SiCov => "si-cov",
            LossKind::SiSignal => "si-sig",
            LossKind::SiNoise => "si-noise",
            LossKind::Affine => "aff",
            LossKind::Subspace => "subspace",
        }
    }

    /// True for losses whose target is a subspace rather than a covariance.
    pub fn uses_subspace_target(self) -> bool {
        matches!(
            self,
            LossKind::SiSignal | LossKind::SiNoise | LossKind::Subspace
        )
    }

    /// Finite-difference acceptance threshold for this loss.
    pub fn gradient_tolerance(self) -> f64 {
        match self {
            LossKind::Affine => 1e-4,
            _ => 1e-5,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for LossKind {
    type Err = DoaError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| DoaError::Config(format!("unknown loss identifier `{s}`")))
    }
}

/// Numerical knobs shared by the loss family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Additive constant in the scale-invariant denominator.
    pub epsilon: f64,
    /// Gram-map shift `δ` applied to predictions.
    pub delta: f64,
    /// Shift added to both sides of the affine-invariant distance.
    pub pd_shift: f64,
    /// Floor for log and arccos arguments; hitting it sets the singular flag.
    pub clamp_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            delta: crate::covariance_ops::DEFAULT_GRAM_DELTA,
            pd_shift: AFFINE_PD_SHIFT,
            clamp_floor: 1e-12,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("pd_shift", self.pd_shift),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DoaError::domain(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if !(self.clamp_floor > 0.0 && self.clamp_floor <= 1e-6) {
            return Err(DoaError::domain(format!(
                "clamp_floor must lie in (0, 1e-6], got {}",
                self.clamp_floor
            )));
        }
        Ok(())
    }
}

/// Loss value and its gradient with respect to the evaluated matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    pub gradient: CMatrix,
    /// Set when the evaluation hit a clamp (log of zero, zero norm, …). The
    /// gradient is zero in that case.
    pub singular: bool,
}

impl LossEvaluation {
    pub(crate) fn regular(value: f64, gradient: CMatrix) -> Self {
        Self {
            value,
            gradient,
            singular: false,
        }
    }

    pub(crate) fn singular(value: f64, m: usize, n: usize) -> Self {
        Self {
            value,
            gradient: CMatrix::zeros(m, n),
            singular: true,
        }
    }

    /// Pulls a gradient on `P = E Eᴴ + δI` back to `E`.
    pub fn through_gram(self, e: &CMatrix) -> Self {
        let g = &self.gradient + self.gradient.adjoint();
        Self {
            gradient: g * e,
            ..self
        }
    }
}

/// What a loss compares the prediction against.
#[derive(Debug, Clone, PartialEq)]
pub enum LossTarget {
    Covariance(HermitianMatrix),
    Subspace {
        signal: SubspaceBasis,
        noise: SubspaceBasis,
    },
}

impl LossTarget {
    /// Builds the target appropriate for `kind` from a noiseless covariance
    /// with `k` sources.
    pub fn for_loss(kind: LossKind, covariance: &HermitianMatrix, k: usize) -> Result<Self> {
        if kind.uses_subspace_target() {
            let (signal, noise) = subspace_split(&EigenDecomposition::of(covariance), k)?;
            Ok(LossTarget::Subspace { signal, noise })
        } else {
            Ok(LossTarget::Covariance(covariance.clone()))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossTarget::Covariance(r) => r.dim(),
            LossTarget::Subspace { signal, .. } => signal.ambient(),
        }
    }
}

/// Evaluates `kind` on the raw network output `E`: the prediction is the Gram
/// matrix `E Eᴴ + δI` (the subspace loss uses the top eigenvectors of
/// `E Eᴴ`), and the returned gradient is with respect to `E`.
pub fn evaluate(
    kind: LossKind,
    target: &LossTarget,
    e: &CMatrix,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    let mismatch = || DoaError::Domain(format!("loss `{kind}` does not accept this target type"));
    match kind {
        LossKind::Subspace => {
            let LossTarget::Subspace { signal, .. } = target else {
                return Err(mismatch());
            };
            subspace_loss(signal, e, signal.k(), config)
        }
        LossKind::SiSignal | LossKind::SiNoise => {
            let LossTarget::Subspace { signal, noise } = target else {
                return Err(mismatch());
            };
            let p = gram_entries(e, config.delta)?;
            let eval = match kind {
                LossKind::SiSignal => si_subspace_loss(signal, &p, config, SubspaceSide::Signal)?,
                _ => si_subspace_loss(noise, &p, config, SubspaceSide::Noise)?,
            };
            Ok(eval.through_gram(e))
        }
        LossKind::Frobenius | LossKind::SiCov | LossKind::Affine => {
            let LossTarget::Covariance(r) = target else {
                return Err(mismatch());
            };
            let p = gram_entries(e, config.delta)?;
            let eval = match kind {
                LossKind::Frobenius => frobenius_loss(r, &p)?,
                LossKind::SiCov => si_reconstruction_loss(r, &p, config)?,
                _ => affine_invariant_distance(r, &p, config)?,
            };
            Ok(eval.through_gram(e))
        }
    }
}
