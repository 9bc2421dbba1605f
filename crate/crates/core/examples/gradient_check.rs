//! Analytic loss gradients against central finite differences.

use gridless_doa::losses::{loss_gradient_check, random_gradient_inputs, LossKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridless_doa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in LossKind::ALL {
        let mut worst = 0.0_f64;
        for _ in 0..10 {
            let inputs = random_gradient_inputs(kind, 7, 3, &mut rng)?;
            worst = worst.max(loss_gradient_check(kind, &inputs, 1e-6)?);
        }
        let tol = kind.gradient_tolerance();
        println!(
            "{:>9}: max rel err {worst:.2e} (tol {tol:.0e}) {}",
            kind.id(),
            if worst < tol { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
