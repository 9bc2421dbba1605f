//! Train the small network with a chosen loss and evaluate it against direct
//! augmentation on a handful of operating points.
//!
//! `cargo run --release --example train_toy_model -- [loss] [epochs]`
//! where `loss` is one of fro, si-cov, si-sig, si-noise, aff, subspace.

use std::sync::Arc;

use gridless_doa::evaluation::{monte_carlo_sweep, SweepConfig, SweepMethod};
use gridless_doa::losses::LossKind;
use gridless_doa::rng::{stream, StreamDomain};
use gridless_doa::toy_model::{generate_dataset, train, TrainConfig, TRAINING_SNR_DB};
use gridless_doa::{ArrayGeometry, ToyModel};

fn main() -> gridless_doa::Result<()> {
    let mut args = std::env::args().skip(1);
    let loss: LossKind = args.next().as_deref().unwrap_or("si-cov").parse()?;
    let epochs = args
        .next()
        .map_or(Ok(10), |e| e.parse())
        .map_err(|_| gridless_doa::DoaError::Config("epochs".into()))?;

    let geometry = ArrayGeometry::mra4();
    let config = TrainConfig {
        loss,
        epochs,
        train_size: 10_000,
        validation_size: 1_000,
        ..TrainConfig::default()
    };
    let k = 2;
    let train_set = generate_dataset(&geometry, k, config.train_size, 50, &TRAINING_SNR_DB, 1)?;
    let validation = generate_dataset(
        &geometry,
        k,
        config.validation_size,
        50,
        &TRAINING_SNR_DB,
        2,
    )?;

    let mut model = ToyModel::random(
        geometry.n(),
        geometry.m(),
        config.hidden,
        &mut stream(1, StreamDomain::Weights, 0, 0),
    )?;
    println!("{} parameters, loss {loss}", model.parameter_count());
    let report = train(&mut model, &config, &train_set, &validation)?;
    for (i, e) in report.history.iter().enumerate() {
        println!(
            "epoch {:>2}: train {:.4}  validation {:.4}",
            i + 1,
            e.train_loss,
            e.validation_loss
        );
    }

    let mut sweep = SweepConfig::protocol(vec![k], vec![0.0, 10.0, 20.0], vec![50], 3);
    sweep.direction_draws = 20;
    sweep.noise_draws = 20;
    sweep.methods.push(SweepMethod::Model {
        loss,
        model: Arc::new(model),
        delta: 0.0,
    });
    for row in monte_carlo_sweep(&sweep)? {
        println!(
            "{:>14} snr {:>5} dB  mse {:.3e}  failures {}",
            row.method, row.snr_db, row.mse, row.failures
        );
    }
    Ok(())
}
