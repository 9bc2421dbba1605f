//! Every loss on the same target, for a prediction that is a scaled copy of
//! the target and for one that is not.

use gridless_doa::array_model::exact_covariances;
use gridless_doa::covariance_ops::gram_psd;
use gridless_doa::losses::{evaluate, optimal_scale, LossConfig, LossKind, LossTarget};
use gridless_doa::random_matrices::random_complex;
use gridless_doa::{ArrayGeometry, EigenDecomposition, SourceScene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gridless_doa::Result<()> {
    let geometry = ArrayGeometry::mra4();
    let scene = SourceScene::equal_power(vec![1.0, 1.7], 1.0, 0.0, 1)?;
    let (r, _) = exact_covariances(&scene, &geometry)?;
    let mut r = r.into_inner();
    for i in 0..7 {
        r[(i, i)].re += 0.05;
    }
    let r = gridless_doa::HermitianMatrix::new(r)?;

    // E with E Eᴴ = 3R, a perfect fit up to scale.
    let eig = EigenDecomposition::of(&r);
    let mut scaled = eig.vectors().clone();
    for (j, l) in eig.values().iter().enumerate() {
        scaled.column_mut(j).scale_mut((3.0 * l).sqrt());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random = random_complex(&mut rng, 7, 7);
    println!(
        "optimal scale α* for 3R: {:.6}",
        optimal_scale(&r, &gram_psd(&scaled, 0.0)?.into_inner())?
    );

    // si-sig and si-noise fit projectors, not R, so 3R is no exact fit for them.
    let cfg = LossConfig::default();
    println!("{:>9} {:>14} {:>14}", "loss", "E Eᴴ = 3R", "random E");
    for kind in LossKind::ALL {
        let target = LossTarget::for_loss(kind, &r, 2)?;
        let a = evaluate(kind, &target, &scaled, &cfg)?;
        let b = evaluate(kind, &target, &random, &cfg)?;
        let show = |v: f64, singular: bool| {
            if singular {
                format!("{v:.4} (clamped)")
            } else {
                format!("{v:.4}")
            }
        };
        println!(
            "{:>9} {:>14} {:>14}",
            kind.id(),
            show(a.value, a.singular),
            show(b.value, b.singular)
        );
    }
    Ok(())
}
