//! Principal angles, the Grassmann geodesic distance and the subspace loss.

use crate::covariance_ops::{gram_entries, EigenDecomposition, SubspaceBasis};
use crate::error::{DoaError, Result};
use crate::linalg::{ensure_square, CMatrix};

use super::{LossConfig, LossEvaluation};

fn ensure_compatible(u1: &SubspaceBasis, u2: &SubspaceBasis) -> Result<()> {
    if u1.basis().shape() != u2.basis().shape() {
        return Err(DoaError::dims(
            format!("Gr({}, {})", u1.k(), u1.ambient()),
            format!("Gr({}, {})", u2.k(), u2.ambient()),
        ));
    }
    Ok(())
}

/// Principal angles `arccos σ_i(U₁ᴴU₂)` in increasing order, each in `[0, π/2]`.
pub fn principal_angles(u1: &SubspaceBasis, u2: &SubspaceBasis) -> Result<Vec<f64>> {
    ensure_compatible(u1, u2)?;
    let cross = u1.basis().adjoint() * u2.basis();
    let mut angles: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Geodesic distance on `Gr(k, m)`: the 2-norm of the principal angles.
pub fn grassmann_distance(u1: &SubspaceBasis, u2: &SubspaceBasis) -> Result<f64> {
    let angles = principal_angles(u1, u2)?;
    Ok(angles.iter().map(|a| a * a).sum::<f64>().sqrt())
}

/// Derivative of `ψ(μ) = arccos²(√μ)`, written in the angle `φ = arccos √μ`
/// as `−2φ / sin 2φ`. The limit at `φ → 0` is `−1`.
fn angle_weight(phi: f64) -> f64 {
    if phi < 1e-6 {
        -(1.0 + 2.0 * phi * phi / 3.0)
    } else {
        -2.0 * phi / (2.0 * phi).sin()
    }
}

/// Grassmann distance between the target signal subspace and the top-`k`
/// eigenvector subspace of `E Eᴴ`, with gradient with respect to `E`.
///
/// Writing `B = U_kᴴ Q U_k` with `Q` the target projector, the squared
/// distance is `Σ ψ(μ_i(B))`. Its gradient flows back through first-order
/// eigenvector perturbation of `E Eᴴ`, which only involves pairs of signal
/// and non-signal eigenvalues. A vanishing eigengap between them flags the
/// evaluation singular.
pub fn subspace_loss(
    target_signal: &SubspaceBasis,
    prediction: &CMatrix,
    k: usize,
    config: &LossConfig,
) -> Result<LossEvaluation> {
    let m = ensure_square(prediction, "subspace-loss prediction")?;
    if k == 0 || k >= m {
        return Err(DoaError::domain(format!(
            "k = {k} outside [1, {}]",
            m.saturating_sub(1)
        )));
    }
    if target_signal.k() != k || target_signal.ambient() != m {
        return Err(DoaError::dims(
            format!("Gr({k}, {m}) target"),
            format!("Gr({}, {})", target_signal.k(), target_signal.ambient()),
        ));
    }

    let gram = gram_entries(prediction, 0.0)?;
    let eig = EigenDecomposition::of_entries(&gram);
    let lambda = eig.values();
    let u_top = eig.vectors().columns(0, k).into_owned();
    let u_rest = eig.vectors().columns(k, m - k).into_owned();
    let predicted = SubspaceBasis::from_orthonormal(u_top.clone());

    let value = grassmann_distance(target_signal, &predicted)?;
    let scale = lambda[0].abs().max(f64::MIN_POSITIVE);
    let gap = lambda[k - 1] - lambda[k];
    if value <= config.clamp_floor || gap <= 1e-12 * scale {
        return Ok(LossEvaluation::singular(value, m, m));
    }

    // dF/dB for F = Σ ψ(μ_i), μ_i = σ_i² clipped away from 0 and 1.
    let q = target_signal.projector();
    let q_u = &q * &u_top;
    let b = crate::linalg::hermitian_part(&(u_top.adjoint() * &q_u));
    let b_eig = EigenDecomposition::of_entries(&b);
    let upper = 1.0 - 1e-12;
    let weights: Vec<f64> = b_eig
        .values()
        .iter()
        .map(|&mu| angle_weight(mu.max(0.0).sqrt().clamp(1e-12, upper).acos()))
        .collect();
    let mut g_b = b_eig.vectors().clone();
    for (j, w) in weights.iter().enumerate() {
        g_b.column_mut(j).scale_mut(*w);
    }
    let g_b = g_b * b_eig.vectors().adjoint();

    // dF/dU_k, then d(value) = dF / (2 value).
    let g_u = (q_u * g_b).scale(2.0 / (2.0 * value));

    // Eigenvector perturbation: du_i = Σ_j u_j (u_jᴴ dP u_i) / (λ_i − λ_j), j outside the top block.
    let mut coupling = u_rest.adjoint() * &g_u;
    for i in 0..k {
        for j in 0..(m - k) {
            coupling[(j, i)] /= lambda[i] - lambda[k + j];
        }
    }
    let g_p = &u_rest * coupling * u_top.adjoint();
    Ok(LossEvaluation::regular(value, g_p).through_gram(prediction))
}
