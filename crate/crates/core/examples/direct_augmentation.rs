//! Direct augmentation turns the 4×4 sensor covariance into a 7×7 Toeplitz
//! matrix, which lets root-MUSIC resolve six sources with four sensors.

use std::f64::consts::PI;

use gridless_doa::array_model::{exact_covariances, synthesize_snapshots};
use gridless_doa::covariance_ops::redundancy_average;
use gridless_doa::evaluation::permutation_mse;
use gridless_doa::{da_pipeline, root_music, ArrayGeometry, SourceScene};

fn main() -> gridless_doa::Result<()> {
    let geometry = ArrayGeometry::mra4();
    let truth: Vec<f64> = (0..6).map(|i| PI / 6.0 + 0.35 + i as f64 * 0.32).collect();
    println!("true directions   {truth:.4?}");

    let asymptotic = SourceScene::equal_power(truth.clone(), 1.0, 0.1, 1)?;
    let (_, rs) = exact_covariances(&asymptotic, &geometry)?;
    let est = root_music(&redundancy_average(&rs, &geometry)?, 6, &geometry)?;
    println!("asymptotic DA     {:.4?}", est.directions);
    println!("root moduli       {:.6?}", est.root_moduli);

    for t in [50, 500, 5000] {
        let scene = SourceScene::equal_power(truth.clone(), 1.0, 0.1, t)?;
        let batch = synthesize_snapshots(&scene, &geometry, 3)?;
        let est = da_pipeline(&batch, 6, &geometry)?;
        println!(
            "T = {t:>4}          {:.4?}  mse {:.3e}",
            est.directions,
            permutation_mse(&est.directions, &truth)?
        );
    }
    Ok(())
}
