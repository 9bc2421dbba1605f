//! Simulate snapshots on the 4-element minimum redundancy array and compare
//! the sample covariance with its asymptotic value.
//!
//! `cargo run --release --example array_snapshots`

use gridless_doa::array_model::{
    exact_covariances, sample_covariance, selection_matrix, synthesize_snapshots,
};
use gridless_doa::{ArrayGeometry, SourceScene};

fn main() -> gridless_doa::Result<()> {
    let geometry = ArrayGeometry::mra4();
    println!(
        "sensors {:?}, virtual ULA of {} elements, d/λ = {}",
        geometry.sensors(),
        geometry.m(),
        geometry.spacing_ratio()
    );
    println!("selection matrix Γ:\n{}", selection_matrix(&geometry));

    let scene = SourceScene::equal_power(vec![0.8, 1.9], 1.0, 0.1, 1)?;
    let (_, asymptotic) = exact_covariances(&scene, &geometry)?;
    for t in [10, 100, 1_000, 10_000] {
        let scene = SourceScene::equal_power(scene.directions().to_vec(), 1.0, 0.1, t)?;
        let batch = synthesize_snapshots(&scene, &geometry, 1)?;
        let rs = sample_covariance(&batch)?;
        let err = (rs.entries() - asymptotic.entries()).norm() / asymptotic.entries().norm();
        println!("T = {t:>5}: relative error of the sample covariance {err:.3e}");
    }
    Ok(())
}
