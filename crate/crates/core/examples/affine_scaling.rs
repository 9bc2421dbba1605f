//! The affine-invariant distance between αR and R is √m·|log α| whatever R
//! is, while the Frobenius distance grows with both α and R.

use gridless_doa::losses::{affine_invariant_distance, frobenius_loss, LossConfig};
use gridless_doa::random_matrices::random_pd;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridless_doa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = LossConfig {
        pd_shift: 0.0,
        ..LossConfig::default()
    };
    let m = 7;
    let r1 = random_pd(&mut rng, m, 0.1);
    let r2 = random_pd(&mut rng, m, 5.0);
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "alpha", "√m|logα|", "aff(R1)", "aff(R2)", "fro(R1)", "fro(R2)"
    );
    for alpha in [1e-3, 0.1, 0.5, 1.0, std::f64::consts::E.powi(2), 10.0, 1e3] {
        let aff = |r: &gridless_doa::HermitianMatrix| -> gridless_doa::Result<f64> {
            Ok(affine_invariant_distance(r, &r.entries().map(|z| z * alpha), &cfg)?.value)
        };
        let fro = |r: &gridless_doa::HermitianMatrix| -> gridless_doa::Result<f64> {
            Ok(frobenius_loss(r, &r.entries().map(|z| z * alpha))?.value)
        };
        println!(
            "{alpha:>8.3} {:>10.4} {:>10.4} {:>10.4} {:>10.3} {:>10.3}",
            (m as f64).sqrt() * f64::ln(alpha).abs(),
            aff(&r1)?,
            aff(&r2)?,
            fro(&r1)?,
            fro(&r2)?
        );
    }
    Ok(())
}
