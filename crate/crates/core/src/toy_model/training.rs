//! Gradient-descent training with a one-cycle learning-rate schedule.

use rand::seq::SliceRandom;

use super::{DatasetPair, Gradients, ToyModel};
use crate::error::{DoaError, Result};
use crate::linalg::CMatrix;
use crate::losses::{evaluate, LossConfig, LossKind, LossTarget};
use crate::rng::{stream, StreamDomain};

/// Piecewise-linear one-cycle schedule: from `peak/25` up to `peak` over the
/// first `warm_fraction` of the steps, then down to `peak/10⁴` at the last step.
pub fn one_cycle_lr(
    step: usize,
    total_steps: usize,
    peak_lr: f64,
    warm_fraction: f64,
) -> Result<f64> {
    if step >= total_steps {
        return Err(DoaError::domain(format!(
            "step {step} outside [0, {total_steps})"
        )));
    }
    if !(peak_lr > 0.0 && peak_lr.is_finite()) || !(0.0..1.0).contains(&warm_fraction) {
        return Err(DoaError::domain(format!(
            "invalid schedule: peak {peak_lr}, warm fraction {warm_fraction}"
        )));
    }
    let start = peak_lr / 25.0;
    let end = peak_lr / 1e4;
    let warm = warm_fraction * total_steps as f64;
    let s = step as f64;
    if s < warm {
        return Ok(start + (peak_lr - start) * s / warm);
    }
    let span = (total_steps - 1) as f64 - warm;
    if span <= 0.0 {
        return Ok(peak_lr);
    }
    Ok(peak_lr + (end - peak_lr) * (s - warm) / span)
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub peak_lr: f64,
    pub warm_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub seed: u64,
    /// Gram shift `δ`.
    pub delta: f64,
    /// Scale-invariant denominator constant `ε`.
    pub epsilon: f64,
    /// Heavy-ball coefficient; 0 gives plain gradient descent.
    pub momentum: f64,
    pub hidden: [usize; 2],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::SiCov,
            peak_lr: 0.05,
            warm_fraction: 0.3,
            epochs: 10,
            batch_size: 32,
            train_size: 20_000,
            validation_size: 2_000,
            seed: 0,
            delta: 0.0,
            epsilon: 0.0,
            momentum: 0.0,
            hidden: [64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.train_size == 0 {
            return Err(DoaError::domain(
                "batch size, epochs and training set size must be at least 1",
            ));
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(DoaError::domain(format!(
                "peak learning rate must be positive, got {}",
                self.peak_lr
            )));
        }
        if !(0.0..1.0).contains(&self.warm_fraction) || !(0.0..1.0).contains(&self.momentum) {
            return Err(DoaError::domain(
                "warm fraction and momentum must lie in [0, 1)",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(DoaError::domain("hidden widths must be positive"));
        }
        self.loss_config().validate()
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            ..LossConfig::default()
        }
    }

    pub fn steps_per_epoch(&self, train_len: usize) -> usize {
        train_len.div_ceil(self.batch_size)
    }
}

/// Gradient descent with optional heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Optimizer {
    momentum: f64,
    velocity: Option<Gradients>,
    steps: usize,
}

impl Optimizer {
    pub fn new(momentum: f64) -> Self {
        Self {
            momentum,
            velocity: None,
            steps: 0,
        }
    }

    /// Updates applied so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn apply(&mut self, model: &mut ToyModel, grads: &Gradients, lr: f64) {
        let update = if self.momentum > 0.0 {
            let v = self
                .velocity
                .get_or_insert_with(|| Gradients::zeros_like(model));
            v.scale(self.momentum);
            v.add_scaled(grads, 1.0);
            &*v
        } else {
            grads
        };
        for (layer, g) in model.layers_mut().iter_mut().zip(&update.layers) {
            layer.weights.zip_apply(&g.weights, |x, y| *x += -lr * y);
            layer.bias.axpy(-lr, &g.bias, 1.0);
        }
        self.steps += 1;
    }
}

/// Result of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Mean loss over the samples that contributed, before the update; NaN
    /// if every sample was singular.
    pub loss: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Mean loss and parameter gradient over a batch of `(R̂_S, target)` pairs.
/// Singular evaluations are left out of both.
pub fn batch_loss_gradient(
    model: &ToyModel,
    batch: &[(&CMatrix, &LossTarget)],
    kind: LossKind,
    config: &LossConfig,
) -> Result<(StepOutcome, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let mut total = 0.0;
    let mut used = 0usize;
    for (input, target) in batch {
        let cache = model.forward(input)?;
        let e = cache.output_matrix(model.m());
        let eval = evaluate(kind, target, &e, config)?;
        if eval.singular {
            continue;
        }
        total += eval.value;
        used += 1;
        grads.add_scaled(&model.backward(&cache, &eval.gradient), 1.0);
    }
    let loss = if used > 0 {
        grads.scale(1.0 / used as f64);
        total / used as f64
    } else {
        f64::NAN
    };
    Ok((
        StepOutcome {
            loss,
            used,
            skipped: batch.len() - used,
        },
        grads,
    ))
}

/// One descent step on the batch mean loss.
///
/// A non-finite loss or gradient aborts with [`DoaError::Diverged`] before
/// the weights are touched.
pub fn train_step(
    model: &mut ToyModel,
    optimizer: &mut Optimizer,
    batch: &[(&CMatrix, &LossTarget)],
    kind: LossKind,
    config: &LossConfig,
    lr: f64,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(DoaError::domain("empty training batch"));
    }
    let (outcome, grads) = batch_loss_gradient(model, batch, kind, config)?;
    if outcome.used == 0 {
        optimizer.steps += 1;
        return Ok(outcome);
    }
    if !outcome.loss.is_finite() || !grads.is_finite() {
        return Err(DoaError::Diverged {
            step: optimizer.steps,
        });
    }
    optimizer.apply(model, &grads, lr);
    Ok(outcome)
}

/// Per-epoch summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean pre-update loss over the epoch's non-singular training samples.
    pub train_loss: f64,
    /// Mean loss on the validation set after the epoch (NaN if it is empty).
    pub validation_loss: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub steps: usize,
}

fn prepared_targets(pairs: &[DatasetPair], kind: LossKind) -> Result<Vec<LossTarget>> {
    pairs.iter().map(|p| p.target(kind)).collect()
}

/// Mean non-singular loss over `pairs`.
pub fn mean_loss(
    model: &ToyModel,
    pairs: &[DatasetPair],
    kind: LossKind,
    config: &LossConfig,
) -> Result<f64> {
    let targets = prepared_targets(pairs, kind)?;
    let batch: Vec<(&CMatrix, &LossTarget)> =
        pairs.iter().map(|p| &p.input).zip(&targets).collect();
    if batch.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (input, target) in batch {
        let eval = evaluate(kind, target, &model.predict(input)?, config)?;
        if !eval.singular {
            total += eval.value;
            used += 1;
        }
    }
    Ok(if used > 0 {
        total / used as f64
    } else {
        f64::NAN
    })
}

/// Shuffled mini-batch descent for `config.epochs` epochs.
pub fn train(
    model: &mut ToyModel,
    config: &TrainConfig,
    train_set: &[DatasetPair],
    validation: &[DatasetPair],
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(DoaError::domain("empty training set"));
    }
    let loss_config = config.loss_config();
    let targets = prepared_targets(train_set, config.loss)?;
    let per_epoch = config.steps_per_epoch(train_set.len());
    let total_steps = per_epoch * config.epochs;
    let mut optimizer = Optimizer::new(config.momentum);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut rng = stream(config.seed, StreamDomain::Shuffle, 0, epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut used = 0usize;
        let mut skipped = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&CMatrix, &LossTarget)> = chunk
                .iter()
                .map(|&i| (&train_set[i].input, &targets[i]))
                .collect();
            let lr = one_cycle_lr(
                optimizer.steps(),
                total_steps,
                config.peak_lr,
                config.warm_fraction,
            )?;
            let out = train_step(model, &mut optimizer, &batch, config.loss, &loss_config, lr)?;
            if out.used > 0 {
                total += out.loss * out.used as f64;
            }
            used += out.used;
            skipped += out.skipped;
        }
        history.push(EpochStats {
            train_loss: if used > 0 {
                total / used as f64
            } else {
                f64::NAN
            },
            validation_loss: mean_loss(model, validation, config.loss, &loss_config)?,
            skipped,
        });
    }
    Ok(TrainReport {
        history,
        steps: optimizer.steps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::ArrayGeometry;
    use crate::covariance_ops::SubspaceBasis;
    use crate::random_matrices::random_unitary;
    use crate::toy_model::{generate_dataset, TRAINING_SNR_DB};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(k: usize, size: usize) -> Vec<DatasetPair> {
        generate_dataset(&ArrayGeometry::mra4(), k, size, 50, &TRAINING_SNR_DB, 3).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        let peak = 0.2;
        assert!((one_cycle_lr(0, 1000, peak, 0.3).unwrap() - peak / 25.0).abs() < 1e-15);
        assert!((one_cycle_lr(300, 1000, peak, 0.3).unwrap() - peak).abs() < 1e-15);
        assert!((one_cycle_lr(999, 1000, peak, 0.3).unwrap() - peak / 1e4).abs() < 1e-15);
        assert!(one_cycle_lr(1000, 1000, peak, 0.3).is_err());
        let lrs: Vec<f64> = (0..1000)
            .map(|s| one_cycle_lr(s, 1000, peak, 0.3).unwrap())
            .collect();
        assert!(lrs[..300].windows(2).all(|w| w[0] < w[1]));
        assert!(lrs[300..].windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let pairs = data(2, 4);
        let targets = prepared_targets(&pairs, LossKind::Frobenius).unwrap();
        let batch: Vec<_> = pairs.iter().map(|p| &p.input).zip(&targets).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let mut model = ToyModel::random(4, 7, [8, 8], &mut rng).unwrap();
        let before = model.clone();
        let out = train_step(
            &mut model,
            &mut Optimizer::new(0.0),
            &batch,
            LossKind::Frobenius,
            &LossConfig::default(),
            0.0,
        )
        .unwrap();
        assert_eq!(model, before);
        assert!(out.loss.is_finite() && out.used == 4);
    }

    #[test]
    fn small_step_descends() {
        let pairs = data(2, 1);
        let targets = prepared_targets(&pairs, LossKind::Frobenius).unwrap();
        let batch = vec![(&pairs[0].input, &targets[0])];
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let mut model = ToyModel::random(4, 7, [8, 8], &mut rng).unwrap();
        let cfg = LossConfig::default();
        let before = train_step(
            &mut model,
            &mut Optimizer::new(0.0),
            &batch,
            LossKind::Frobenius,
            &cfg,
            1e-3,
        )
        .unwrap();
        let (after, _) = batch_loss_gradient(&model, &batch, LossKind::Frobenius, &cfg).unwrap();
        assert!(
            after.loss < before.loss,
            "{} -> {}",
            before.loss,
            after.loss
        );
    }

    /// Finite differences of the batch loss over every parameter of a
    /// two-hidden-unit network, for every loss.
    #[test]
    fn composed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let pairs = data(2, 3);
        for kind in LossKind::ALL {
            let cfg = LossConfig {
                epsilon: 1e-3,
                ..LossConfig::default()
            };
            let targets = prepared_targets(&pairs, kind).unwrap();
            let batch: Vec<_> = pairs.iter().map(|p| &p.input).zip(&targets).collect();
            let mut model = ToyModel::random(4, 7, [2, 2], &mut rng).unwrap();
            for b in model.layers_mut()[2].bias.iter_mut() {
                *b += rng.random_range(-1.0..1.0);
            }
            let (_, grads) = batch_loss_gradient(&model, &batch, kind, &cfg).unwrap();
            let loss_at = |m: &ToyModel| batch_loss_gradient(m, &batch, kind, &cfg).unwrap().0.loss;
            let h = 1e-6;
            let mut worst = 0.0_f64;
            let mut scale = 0.0_f64;
            for l in 0..3 {
                let count = model.layers()[l].weights.len() + model.layers()[l].bias.len();
                for idx in 0..count {
                    let bump = |m: &mut ToyModel, d: f64| {
                        let layer = &mut m.layers_mut()[l];
                        let wlen = layer.weights.len();
                        if idx < wlen {
                            layer.weights.as_mut_slice()[idx] += d;
                        } else {
                            layer.bias[idx - wlen] += d;
                        }
                    };
                    let mut plus = model.clone();
                    bump(&mut plus, h);
                    let mut minus = model.clone();
                    bump(&mut minus, -h);
                    let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                    let g = &grads.layers[l];
                    let wlen = g.weights.len();
                    let analytic = if idx < wlen {
                        g.weights.as_slice()[idx]
                    } else {
                        g.bias[idx - wlen]
                    };
                    worst = worst.max((fd - analytic).abs());
                    scale = scale.max(fd.abs());
                }
            }
            assert!(worst / scale < 1e-4, "{kind}: {:.3e}", worst / scale);
        }
    }

    #[test]
    fn subspace_loss_ignores_target_basis() {
        let pairs = data(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let model = ToyModel::random(4, 7, [8, 8], &mut rng).unwrap();
        let cfg = LossConfig::default();
        for p in &pairs {
            let LossTarget::Subspace { signal, noise } = p.target(LossKind::Subspace).unwrap()
            else {
                panic!("subspace target expected");
            };
            let e = model.predict(&p.input).unwrap();
            let base = evaluate(
                LossKind::Subspace,
                &LossTarget::Subspace {
                    signal: signal.clone(),
                    noise: noise.clone(),
                },
                &e,
                &cfg,
            )
            .unwrap();
            let q = random_unitary(&mut rng, 3);
            let rotated = LossTarget::Subspace {
                signal: SubspaceBasis::new(signal.basis() * q).unwrap(),
                noise,
            };
            let moved = evaluate(LossKind::Subspace, &rotated, &e, &cfg).unwrap();
            assert!((base.value - moved.value).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic_and_has_one_entry_per_epoch() {
        let train_set = data(2, 200);
        let validation = data(2, 20);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            train_size: 200,
            validation_size: 20,
            hidden: [16, 16],
            ..TrainConfig::default()
        };
        let run = || {
            let mut rng = crate::rng::stream(cfg.seed, StreamDomain::Weights, 0, 0);
            let mut model = ToyModel::random(4, 7, cfg.hidden, &mut rng).unwrap();
            let report = train(&mut model, &cfg, &train_set, &validation).unwrap();
            (model, report)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(r1.history.len(), 3);
        assert_eq!(r1.steps, 3 * 13);
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn momentum_runs() {
        let train_set = data(2, 64);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 16,
            momentum: 0.9,
            hidden: [8, 8],
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(84);
        let mut model = ToyModel::random(4, 7, cfg.hidden, &mut rng).unwrap();
        let report = train(&mut model, &cfg, &train_set, &[]).unwrap();
        assert!(report.history.iter().all(|h| h.train_loss.is_finite()));
        assert!(report.history[0].validation_loss.is_nan());
    }

    #[test]
    fn divergence_is_reported() {
        let train_set = data(2, 32);
        let cfg = TrainConfig {
            loss: LossKind::Frobenius,
            epochs: 5,
            batch_size: 8,
            peak_lr: 1e300,
            hidden: [8, 8],
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        let mut model = ToyModel::random(4, 7, cfg.hidden, &mut rng).unwrap();
        assert!(matches!(
            train(&mut model, &cfg, &train_set, &[]),
            Err(DoaError::Diverged { .. })
        ));
    }
}
