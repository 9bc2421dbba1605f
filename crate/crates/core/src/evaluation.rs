//! Monte Carlo evaluation: direction sampling, SNR conversion,
//! permutation-matched MSE and sweeps over (k, SNR, T).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::array_model::{synthesize_with_rng, ArrayGeometry, SourceScene};
use crate::error::{DoaError, Result};
use crate::estimators::{da_pipeline, model_pipeline, DoaEstimate};
use crate::losses::LossKind;
use crate::rng::{point_key, stream, StreamDomain};
use crate::toy_model::ToyModel;

/// Rejection budget for [`sample_directions`].
pub const REJECTION_BUDGET: usize = 1_000_000;

/// Evaluation direction range `[π/6, 5π/6]`.
pub const EVAL_RANGE: (f64, f64) = (PI / 6.0, 5.0 * PI / 6.0);
/// Evaluation minimum separation `π/45`.
pub const EVAL_MIN_SEPARATION: f64 = PI / 45.0;

/// `η = p · 10^(−snr/10)`.
pub fn snr_to_noise_power(snr_db: f64, source_power: f64) -> Result<f64> {
    if !(source_power > 0.0 && source_power.is_finite()) || !snr_db.is_finite() {
        return Err(DoaError::domain(format!(
            "invalid SNR {snr_db} dB or source power {source_power}"
        )));
    }
    Ok(source_power * 10f64.powf(-snr_db / 10.0))
}

fn check_sampling(k: usize, range: (f64, f64), min_separation: f64) -> Result<()> {
    let (lo, hi) = range;
    if k == 0 {
        return Err(DoaError::domain("k must be at least 1"));
    }
    if !(0.0 <= lo && lo < hi && hi <= PI) {
        return Err(DoaError::domain(format!(
            "angle range [{lo}, {hi}] not inside [0, π]"
        )));
    }
    if !(min_separation > 0.0) {
        return Err(DoaError::domain("minimum separation must be positive"));
    }
    if k as f64 * min_separation >= hi - lo {
        return Err(DoaError::Infeasible(format!(
            "{k} directions with separation {min_separation} do not fit in [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// `k` i.i.d. uniform angles on `range`, redrawn as a block until every
/// pairwise gap is at least `min_separation`; returned ascending.
pub fn sample_directions<R: Rng + ?Sized>(
    k: usize,
    range: (f64, f64),
    min_separation: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_sampling(k, range, min_separation)?;
    let mut theta = vec![0.0; k];
    for _ in 0..REJECTION_BUDGET {
        theta
            .iter_mut()
            .for_each(|t| *t = rng.random_range(range.0..range.1));
        theta.sort_by(f64::total_cmp);
        if theta.windows(2).all(|w| w[1] - w[0] >= min_separation) {
            return Ok(theta);
        }
    }
    Err(DoaError::Infeasible(format!(
        "no admissible draw of {k} directions within {REJECTION_BUDGET} attempts"
    )))
}

/// `(1/k) min_P ‖P θ̂ − θ‖²` over all permutations.
pub fn permutation_mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    let k = truth.len();
    if estimate.len() != k {
        return Err(DoaError::dims(
            format!("{k} estimated directions"),
            estimate.len(),
        ));
    }
    if k == 0 {
        return Err(DoaError::domain("no directions to compare"));
    }
    let cost = |i: usize, j: usize| (estimate[i] - truth[j]).powi(2);
    let best = if k <= 7 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = f64::INFINITY;
        loop {
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
            best = best.min(total);
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    } else {
        let matrix: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| cost(i, j)).collect())
            .collect();
        let assignment = hungarian(&matrix);
        assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| cost(i, j))
            .sum()
    };
    Ok(best / k as f64)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Minimum-cost perfect assignment on a square cost matrix (row `i` gets
/// column `result[i]`), O(k³) shortest augmenting paths with potentials.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for col in 1..=n {
        result[owner[col] - 1] = col - 1;
    }
    result
}

/// A direction finder evaluated by the sweep.
#[derive(Debug, Clone)]
pub enum SweepMethod {
    Da,
    Model {
        loss: LossKind,
        model: Arc<ToyModel>,
        delta: f64,
    },
}

impl SweepMethod {
    /// Tag written to the `method` CSV column.
    pub fn tag(&self) -> String {
        match self {
            SweepMethod::Da => "da".into(),
            SweepMethod::Model { loss, .. } => format!("model:{}", loss.id()),
        }
    }

    fn estimate(
        &self,
        batch: &crate::SnapshotBatch,
        k: usize,
        geometry: &ArrayGeometry,
    ) -> Result<DoaEstimate> {
        match self {
            SweepMethod::Da => da_pipeline(batch, k, geometry),
            SweepMethod::Model { loss, model, delta } => {
                model_pipeline(batch, k, model, *loss, *delta)
            }
        }
    }
}

/// Grid of operating points and the trial structure at each one.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub geometry: ArrayGeometry,
    pub k_values: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub snapshots: Vec<usize>,
    pub direction_draws: usize,
    pub noise_draws: usize,
    pub range: (f64, f64),
    pub min_separation: f64,
    pub source_power: f64,
    pub seed: u64,
    pub methods: Vec<SweepMethod>,
}

impl SweepConfig {
    /// The evaluation protocol on the 4-element MRA with DA only.
    pub fn protocol(
        k_values: Vec<usize>,
        snr_db: Vec<f64>,
        snapshots: Vec<usize>,
        seed: u64,
    ) -> Self {
        Self {
            geometry: ArrayGeometry::mra4(),
            k_values,
            snr_db,
            snapshots,
            direction_draws: 100,
            noise_draws: 100,
            range: EVAL_RANGE,
            min_separation: EVAL_MIN_SEPARATION,
            source_power: 1.0,
            seed,
            methods: vec![SweepMethod::Da],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty()
            || self.snr_db.is_empty()
            || self.snapshots.is_empty()
            || self.methods.is_empty()
        {
            return Err(DoaError::domain(
                "sweep needs at least one k, SNR, snapshot count and method",
            ));
        }
        if self.direction_draws == 0 || self.noise_draws == 0 {
            return Err(DoaError::domain("trial counts must be positive"));
        }
        if self.snapshots.contains(&0) {
            return Err(DoaError::domain("snapshot counts must be positive"));
        }
        for &k in &self.k_values {
            if k >= self.geometry.m() {
                return Err(DoaError::domain(format!(
                    "k = {k} outside [1, {}]",
                    self.geometry.m() - 1
                )));
            }
            check_sampling(k, self.range, self.min_separation)?;
        }
        for snr in &self.snr_db {
            snr_to_noise_power(*snr, self.source_power)?;
        }
        Ok(())
    }

    pub fn trials_per_point(&self) -> usize {
        self.direction_draws * self.noise_draws
    }

    pub fn point_count(&self) -> usize {
        self.methods.len() * self.k_values.len() * self.snr_db.len() * self.snapshots.len()
    }
}

/// One aggregated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub k: usize,
    pub snr_db: f64,
    pub snapshots: usize,
    /// Mean permutation-matched squared error over successful trials (rad²);
    /// NaN if every trial failed.
    pub mse: f64,
    /// Trials attempted, including failures.
    pub trials: usize,
    pub failures: usize,
    pub seed: u64,
}

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Per-trial squared errors at one point, in trial order; `None` marks a failure.
pub fn point_trials(
    config: &SweepConfig,
    method: &SweepMethod,
    k: usize,
    snr_db: f64,
    snapshots: usize,
) -> Result<Vec<Option<f64>>> {
    let noise_power = snr_to_noise_power(snr_db, config.source_power)?;
    let dir_point = point_key(&[k as u64]);
    let directions: Vec<Vec<f64>> = (0..config.direction_draws)
        .map(|d| {
            let mut rng = stream(config.seed, StreamDomain::Directions, dir_point, d as u64);
            sample_directions(k, config.range, config.min_separation, &mut rng)
        })
        .collect::<Result<_>>()?;
    let snap_point = point_key(&[k as u64, snr_db.to_bits(), snapshots as u64]);
    let total = config.trials_per_point();
    (0..total)
        .into_par_iter()
        .map(|trial| {
            let truth = &directions[trial / config.noise_draws];
            let scene = SourceScene::equal_power(
                truth.clone(),
                config.source_power,
                noise_power,
                snapshots,
            )?;
            let mut rng = stream(
                config.seed,
                StreamDomain::Snapshots,
                snap_point,
                trial as u64,
            );
            let batch = synthesize_with_rng(&scene, &config.geometry, &mut rng)?;
            match method.estimate(&batch, k, &config.geometry) {
                Ok(est) => Ok(Some(permutation_mse(&est.directions, truth)?)),
                Err(DoaError::EstimationFailure { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs every (method, k, SNR, T) point. Rows come out in that nesting order.
///
/// Direction vectors depend only on `(seed, k, draw index)` and snapshot
/// noise only on `(seed, k, SNR, T, trial index)`, so every method sees the
/// same trials and results do not depend on the thread schedule.
pub fn monte_carlo_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.point_count());
    for method in &config.methods {
        for &k in &config.k_values {
            for &snr_db in &config.snr_db {
                for &snapshots in &config.snapshots {
                    let trials = point_trials(config, method, k, snr_db, snapshots)?;
                    rows.push(aggregate(
                        method.tag(),
                        k,
                        snr_db,
                        snapshots,
                        config.seed,
                        &trials,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

/// Folds trial outcomes into a row with a compensated sum in trial order.
pub fn aggregate(
    method: String,
    k: usize,
    snr_db: f64,
    snapshots: usize,
    seed: u64,
    trials: &[Option<f64>],
) -> ResultRow {
    let mut sum = KahanSum::default();
    let mut ok = 0usize;
    for e in trials.iter().flatten() {
        sum.add(*e);
        ok += 1;
    }
    ResultRow {
        method,
        k,
        snr_db,
        snapshots,
        mse: if ok > 0 {
            sum.value() / ok as f64
        } else {
            f64::NAN
        },
        trials: trials.len(),
        failures: trials.len() - ok,
        seed,
    }
}

pub const CSV_HEADER: &str = "method,k,snr_db,snapshots,mse,trials,failures,seed";

/// CSV text with 17 significant digits for every float.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.16e},{},{:.16e},{},{},{}",
            r.method, r.k, r.snr_db, r.snapshots, r.mse, r.trials, r.failures, r.seed
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snr_examples() {
        assert_eq!(snr_to_noise_power(0.0, 1.0).unwrap(), 1.0);
        assert!((snr_to_noise_power(20.0, 1.0).unwrap() - 0.01).abs() < 1e-18);
        assert!((snr_to_noise_power(-10.0, 2.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(snr_to_noise_power(0.0, 0.0).is_err());
    }

    #[test]
    fn permutation_examples() {
        assert_eq!(permutation_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(
            permutation_mse(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert!((permutation_mse(&[2.1, 1.2], &[1.0, 2.0]).unwrap() - 0.025).abs() < 1e-15);
        assert!(permutation_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hungarian_agrees_with_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for k in 1..=7 {
            for _ in 0..20 {
                let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
                let b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
                let exhaustive = permutation_mse(&a, &b).unwrap();
                let cost: Vec<Vec<f64>> = (0..k)
                    .map(|i| (0..k).map(|j| (a[i] - b[j]).powi(2)).collect())
                    .collect();
                let assignment = hungarian(&cost);
                let h: f64 = assignment
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| cost[i][j])
                    .sum::<f64>()
                    / k as f64;
                assert!((h - exhaustive).abs() < 1e-12, "k={k}: {h} vs {exhaustive}");
            }
        }
    }

    #[test]
    fn large_k_uses_assignment() {
        let truth: Vec<f64> = (0..9).map(|i| i as f64 * 0.3).collect();
        let mut est: Vec<f64> = truth.iter().rev().map(|t| t + 0.01).collect();
        est.swap(0, 4);
        assert!((permutation_mse(&est, &truth).unwrap() - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn separated_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..200 {
            let d = sample_directions(6, EVAL_RANGE, EVAL_MIN_SEPARATION, &mut rng).unwrap();
            assert_eq!(d.len(), 6);
            assert!(d.windows(2).all(|w| w[1] - w[0] >= EVAL_MIN_SEPARATION));
            assert!(d.iter().all(|t| (EVAL_RANGE.0..EVAL_RANGE.1).contains(t)));
        }
        assert!(matches!(
            sample_directions(10, (0.0, 1.0), 0.2, &mut rng),
            Err(DoaError::Infeasible(_))
        ));
    }

    #[test]
    fn single_draws_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let (lo, hi) = EVAL_RANGE;
        let mut u: Vec<f64> = (0..100_000)
            .map(|_| {
                (sample_directions(1, EVAL_RANGE, EVAL_MIN_SEPARATION, &mut rng).unwrap()[0] - lo)
                    / (hi - lo)
            })
            .collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn kahan_beats_naive_on_wide_range() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn csv_format() {
        let row = ResultRow {
            method: "da".into(),
            k: 1,
            snr_db: 20.0,
            snapshots: 50,
            mse: 0.375,
            trials: 10_000,
            failures: 0,
            seed: 7,
        };
        let csv = rows_to_csv(&[row]);
        assert_eq!(
            csv,
            "method,k,snr_db,snapshots,mse,trials,failures,seed\nda,1,2.0000000000000000e1,50,3.7500000000000000e-1,10000,0,7\n"
        );
        let x = 8.1278e-7_f64;
        assert_eq!(format!("{x:.16e}").parse::<f64>().unwrap(), x);
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let mut cfg = SweepConfig::protocol(vec![1, 2], vec![10.0], vec![20], 5);
        cfg.direction_draws = 5;
        cfg.noise_draws = 4;
        let a = rows_to_csv(&monte_carlo_sweep(&cfg).unwrap());
        let b = rows_to_csv(&monte_carlo_sweep(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
    }
}
