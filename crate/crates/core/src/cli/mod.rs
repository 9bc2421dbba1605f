//! Command-line front end.
//!
//! Every subcommand reads an optional TOML file (see [`config`]) and honours
//! the global flags `--config`, `--seed`, `--threads` and `--dry-run`. Errors
//! are reported as a single line `error kind=<kind> message=<text>` on
//! stderr; configuration and usage errors exit with 2, runtime failures
//! with 1.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::error::{DoaError, Result};
use crate::evaluation::{monte_carlo_sweep, rows_to_csv, SweepConfig, SweepMethod};
use crate::losses::{
    affine_invariant_distance, loss_gradient_check, random_gradient_inputs, LossConfig, LossKind,
};
use crate::random_matrices::random_pd;
use crate::rng::{point_key, stream, StreamDomain};
use crate::toy_model::{
    export_dataset_csv, generate_dataset, load_checkpoint, read_dataset, save_checkpoint, train,
    write_dataset, DatasetPair, ToyModel,
};

pub use config::{parse_method, ExperimentConfig};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "GRIDLESS_DOA_THREADS";

const DEFAULT_SEED: u64 = 0;
const PROP1_ALPHAS: [f64; 6] = [1e-3, 1e-1, 1.0, std::f64::consts::E, 10.0, 1e3];
const PROP1_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "gridless-doa",
    version,
    about = "Gridless DOA estimation toolkit"
)]
struct Cli {
    /// TOML experiment file; every key has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: $GRIDLESS_DOA_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Validate and print the plan without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo MSE over k, SNR and snapshot count.
    Sweep,
    /// Generate the training and validation datasets.
    GenData,
    /// Train the toy model on the generated datasets.
    Train,
    /// Sweep with the trained model alongside the configured methods.
    EvalModel,
    /// Finite-difference check of the analytic loss gradients.
    Gradcheck {
        /// Loss identifier; all losses when omitted.
        #[arg(long)]
        loss: Option<String>,
        #[arg(long, default_value_t = 7)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
    /// Scaling law of the affine-invariant distance.
    Prop1 {
        /// Matrix size; 2 through 8 when omitted.
        #[arg(long)]
        m: Option<usize>,
        /// Scale factor; the standard set when omitted.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 50)]
        instances: usize,
    },
}

/// Runs the binary with `args` (including the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`dispatch`] with explicit output streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            let _ = writeln!(
                err,
                "error kind=usage message={}",
                first.trim_start_matches("error: ")
            );
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Check(msg)) => {
            let _ = writeln!(err, "error kind=check-failed message={msg}");
            1
        }
        Err(Failure::Doa(e)) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error kind={} message={message}", e.kind());
            if matches!(e, DoaError::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}

enum Failure {
    Doa(DoaError),
    Check(String),
}

impl From<DoaError> for Failure {
    fn from(e: DoaError) -> Self {
        Failure::Doa(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Doa(e.into())
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(DoaError::Config("--threads must be positive".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(DoaError::Config(format!(
                "{THREADS_ENV} must be a positive integer, found `{v}`"
            ))),
        },
        Err(_) => Ok(0),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| DoaError::Config(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let config = load_config(cli.config.as_deref())?;
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    // 0 lets rayon pick the core count.
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DoaError::Config(format!("thread pool: {e}")))?;
    let ctx = Context {
        config: &config,
        seed,
        dry_run: cli.dry_run,
    };
    // Output is buffered inside the pool because the caller's stream need
    // not be `Send`.
    let mut buffer = Vec::new();
    let result = pool.install(|| {
        let out = &mut buffer;
        match &cli.command {
            Command::Sweep => ctx.sweep(out),
            Command::GenData => ctx.gen_data(out),
            Command::Train => ctx.train(out),
            Command::EvalModel => ctx.eval_model(out),
            Command::Gradcheck {
                loss,
                m,
                k,
                instances,
                step,
            } => ctx.gradcheck(out, loss.as_deref(), *m, *k, *instances, *step),
            Command::Prop1 {
                m,
                alpha,
                instances,
            } => ctx.prop1(out, *m, *alpha, *instances),
        }
    });
    out.write_all(&buffer)?;
    result
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    dry_run: bool,
}

/// Writes `contents` to `path`, creating parent directories.
fn write_output(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents)?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

impl Context<'_> {
    fn sweep_config(&self, methods: Vec<SweepMethod>) -> Result<SweepConfig> {
        let s = &self.config.sweep;
        let cfg = SweepConfig {
            geometry: self.config.geometry()?,
            k_values: s.k.clone(),
            snr_db: s.snr_db.clone(),
            snapshots: s.snapshots.clone(),
            direction_draws: s.direction_draws,
            noise_draws: s.noise_draws,
            range: (s.range[0], s.range[1]),
            min_separation: s.min_separation,
            source_power: s.source_power,
            seed: self.seed,
            methods,
        };
        cfg.validate()
            .map_err(|e| DoaError::Config(format!("sweep: {e}")))?;
        Ok(cfg)
    }

    /// Resolves method strings, loading the checkpoint once if any model
    /// method is requested.
    fn methods(&self, names: &[String]) -> Result<Vec<SweepMethod>> {
        let mut model: Option<Arc<ToyModel>> = None;
        let mut methods = Vec::with_capacity(names.len());
        for name in names {
            match parse_method(name)? {
                None => methods.push(SweepMethod::Da),
                Some(loss) => {
                    let model = match &model {
                        Some(m) => Arc::clone(m),
                        None => {
                            let loaded = Arc::new(load_checkpoint(&self.config.output.checkpoint)?);
                            model = Some(Arc::clone(&loaded));
                            loaded
                        }
                    };
                    methods.push(SweepMethod::Model {
                        loss,
                        model,
                        delta: self.config.train.delta,
                    });
                }
            }
        }
        Ok(methods)
    }

    fn print_plan(&self, out: &mut dyn Write, cfg: &SweepConfig, path: &Path) -> Result<()> {
        let tags: Vec<String> = cfg.methods.iter().map(SweepMethod::tag).collect();
        writeln!(
            out,
            "plan: sweep methods={} k={:?} snr_db={:?} snapshots={:?} points={} trials_per_point={} seed={} output={}",
            tags.join(","),
            cfg.k_values,
            cfg.snr_db,
            cfg.snapshots,
            cfg.point_count(),
            cfg.trials_per_point(),
            cfg.seed,
            path.display()
        )?;
        Ok(())
    }

    fn run_sweep(
        &self,
        out: &mut dyn Write,
        cfg: &SweepConfig,
        path: &Path,
    ) -> std::result::Result<(), Failure> {
        self.print_plan(out, cfg, path)?;
        if self.dry_run {
            return Ok(());
        }
        let rows = monte_carlo_sweep(cfg)?;
        for r in &rows {
            writeln!(
                out,
                "{} k={} snr_db={} T={} mse={:.4e} failures={}/{}",
                r.method, r.k, r.snr_db, r.snapshots, r.mse, r.failures, r.trials
            )?;
        }
        write_output(path, &rows_to_csv(&rows))?;
        writeln!(out, "wrote {}", path.display())?;
        Ok(())
    }

    fn sweep(&self, out: &mut dyn Write) -> std::result::Result<(), Failure> {
        let cfg = self.sweep_config(self.methods(&self.config.sweep.methods)?)?;
        self.run_sweep(out, &cfg, &self.config.output.sweep_csv)
    }

    fn eval_model(&self, out: &mut dyn Write) -> std::result::Result<(), Failure> {
        let mut names = self.config.sweep.methods.clone();
        if names.iter().all(|n| !n.starts_with("model:")) {
            names.push(format!("model:{}", self.config.train.loss));
        }
        let cfg = self.sweep_config(self.methods(&names)?)?;
        self.run_sweep(out, &cfg, &self.config.output.eval_csv)
    }

    fn validation_seed(&self) -> u64 {
        point_key(&[self.seed, 0x7661_6c69_6461_7465])
    }

    fn gen_data(&self, out: &mut dyn Write) -> std::result::Result<(), Failure> {
        let geometry = self.config.geometry()?;
        let d = &self.config.data;
        let o = &self.config.output;
        if d.k == 0 || d.k >= geometry.m() {
            return Err(DoaError::Config(format!(
                "data: k = {} outside [1, {}]",
                d.k,
                geometry.m() - 1
            ))
            .into());
        }
        if d.train_size == 0 || d.snapshots == 0 || d.snr_db.is_empty() {
            return Err(DoaError::Config(
                "data: train_size, snapshots and snr_db must be nonempty".into(),
            )
            .into());
        }
        writeln!(
            out,
            "plan: gen-data k={} train={} validation={} snapshots={} snr_db={:?} seed={} output={} {}",
            d.k,
            d.train_size,
            d.validation_size,
            d.snapshots,
            d.snr_db,
            self.seed,
            o.dataset.display(),
            o.validation.display()
        )?;
        if self.dry_run {
            return Ok(());
        }
        let train_set = generate_dataset(
            &geometry,
            d.k,
            d.train_size,
            d.snapshots,
            &d.snr_db,
            self.seed,
        )?;
        ensure_parent(&o.dataset)?;
        write_dataset(&o.dataset, &geometry, &train_set)?;
        writeln!(
            out,
            "wrote {} ({} examples)",
            o.dataset.display(),
            train_set.len()
        )?;
        if let Some(csv) = &o.dataset_csv {
            ensure_parent(csv)?;
            export_dataset_csv(csv, &geometry, &train_set)?;
            writeln!(out, "wrote {}", csv.display())?;
        }
        if d.validation_size > 0 {
            let validation = generate_dataset(
                &geometry,
                d.k,
                d.validation_size,
                d.snapshots,
                &d.snr_db,
                self.validation_seed(),
            )?;
            ensure_parent(&o.validation)?;
            write_dataset(&o.validation, &geometry, &validation)?;
            writeln!(
                out,
                "wrote {} ({} examples)",
                o.validation.display(),
                validation.len()
            )?;
        }
        Ok(())
    }

    fn train(&self, out: &mut dyn Write) -> std::result::Result<(), Failure> {
        let geometry = self.config.geometry()?;
        let cfg = self.config.train_config(self.seed)?;
        let o = &self.config.output;
        writeln!(
            out,
            "plan: train loss={} epochs={} batch={} peak_lr={} hidden={:?} seed={} input={} output={} {}",
            cfg.loss,
            cfg.epochs,
            cfg.batch_size,
            cfg.peak_lr,
            cfg.hidden,
            self.seed,
            o.dataset.display(),
            o.checkpoint.display(),
            o.history_csv.display()
        )?;
        if self.dry_run {
            return Ok(());
        }
        let (header, train_set) = read_dataset(&o.dataset)?;
        if header.geometry != geometry {
            return Err(DoaError::Config(format!(
                "{} was generated for a different array",
                o.dataset.display()
            ))
            .into());
        }
        let validation: Vec<DatasetPair> = if o.validation.exists() {
            let (vh, v) = read_dataset(&o.validation)?;
            if vh.geometry != geometry || vh.k != header.k {
                return Err(DoaError::Config(format!(
                    "{} does not match the training set",
                    o.validation.display()
                ))
                .into());
            }
            v
        } else {
            Vec::new()
        };
        let mut rng = stream(self.seed, StreamDomain::Weights, 0, 0);
        let mut model = ToyModel::random(geometry.n(), geometry.m(), cfg.hidden, &mut rng)?;
        let report = train(&mut model, &cfg, &train_set, &validation)?;

        let mut history = String::from("epoch,train_loss,validation_loss,skipped\n");
        for (i, e) in report.history.iter().enumerate() {
            writeln!(
                out,
                "epoch {} train_loss={:.6e} validation_loss={:.6e} skipped={}",
                i + 1,
                e.train_loss,
                e.validation_loss,
                e.skipped
            )?;
            let _ = writeln!(
                history,
                "{},{:.16e},{:.16e},{}",
                i + 1,
                e.train_loss,
                e.validation_loss,
                e.skipped
            );
        }
        ensure_parent(&o.checkpoint)?;
        save_checkpoint(&o.checkpoint, &model)?;
        write_output(&o.history_csv, &history)?;
        writeln!(
            out,
            "wrote {} {} ({} steps)",
            o.checkpoint.display(),
            o.history_csv.display(),
            report.steps
        )?;
        Ok(())
    }

    fn gradcheck(
        &self,
        out: &mut dyn Write,
        loss: Option<&str>,
        m: usize,
        k: usize,
        instances: usize,
        step: f64,
    ) -> std::result::Result<(), Failure> {
        let kinds: Vec<LossKind> = match loss {
            Some(id) => vec![id.parse()?],
            None => LossKind::ALL.to_vec(),
        };
        if m < 2 || k == 0 || k >= m || instances == 0 {
            return Err(DoaError::Config(format!(
                "gradcheck needs m >= 2, 1 <= k < m and instances > 0 (m={m}, k={k})"
            ))
            .into());
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(DoaError::Config("--step must be positive".into()).into());
        }
        let ids: Vec<&str> = kinds.iter().map(|k| k.id()).collect();
        writeln!(
            out,
            "plan: gradcheck losses={} m={m} k={k} instances={instances} step={step:e} seed={}",
            ids.join(","),
            self.seed
        )?;
        if self.dry_run {
            return Ok(());
        }
        let mut failed = Vec::new();
        for kind in kinds {
            let point = point_key(&[kind as u64, m as u64, k as u64]);
            let mut worst = 0.0_f64;
            let mut done = 0usize;
            let mut draw = 0u64;
            // Random points are almost never singular; redraw if one is.
            while done < instances {
                if draw > 10 * instances as u64 {
                    return Err(DoaError::SingularPoint(format!(
                        "could not find regular points for `{kind}`"
                    ))
                    .into());
                }
                let mut rng = stream(self.seed, StreamDomain::AdHoc, point, draw);
                draw += 1;
                let inputs = random_gradient_inputs(kind, m, k, &mut rng)?;
                match loss_gradient_check(kind, &inputs, step) {
                    Ok(e) => {
                        worst = worst.max(e);
                        done += 1;
                    }
                    Err(DoaError::SingularPoint(_)) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            let tol = kind.gradient_tolerance();
            let verdict = if worst < tol { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "loss={kind} instances={instances} max_rel_err={worst:.3e} tol={tol:.0e} {verdict}"
            )?;
            if worst >= tol {
                failed.push(kind.id());
            }
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Check(format!(
                "gradient check failed for {}",
                failed.join(",")
            )))
        }
    }

    fn prop1(
        &self,
        out: &mut dyn Write,
        m: Option<usize>,
        alpha: Option<f64>,
        instances: usize,
    ) -> std::result::Result<(), Failure> {
        let sizes: Vec<usize> = m.map_or_else(|| (2..=8).collect(), |m| vec![m]);
        let alphas: Vec<f64> = alpha.map_or_else(|| PROP1_ALPHAS.to_vec(), |a| vec![a]);
        if sizes.contains(&0) || instances == 0 {
            return Err(DoaError::Config("prop1 needs m >= 1 and instances > 0".into()).into());
        }
        if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(DoaError::Config("prop1 needs alpha > 0".into()).into());
        }
        writeln!(
            out,
            "plan: prop1 m={sizes:?} alpha={alphas:?} instances={instances} seed={}",
            self.seed
        )?;
        if self.dry_run {
            return Ok(());
        }
        let loss_config = LossConfig {
            pd_shift: 0.0,
            ..LossConfig::default()
        };
        writeln!(out, "m,alpha,value,expected,max_abs_err,verdict")?;
        let mut failures = 0usize;
        for &m in &sizes {
            for &a in &alphas {
                let expected = (m as f64).sqrt() * a.ln().abs();
                let point = point_key(&[m as u64, a.to_bits()]);
                let mut worst = 0.0_f64;
                let mut first = f64::NAN;
                for i in 0..instances {
                    let mut rng = stream(self.seed, StreamDomain::AdHoc, point, i as u64);
                    let r = random_pd(&mut rng, m, 0.1);
                    let value =
                        affine_invariant_distance(&r, &r.entries().map(|z| z * a), &loss_config)?
                            .value;
                    if i == 0 {
                        first = value;
                    }
                    worst = worst.max((value - expected).abs());
                }
                let pass = worst <= PROP1_TOL;
                failures += usize::from(!pass);
                writeln!(
                    out,
                    "{m},{a},{first:.4},{expected:.4},{worst:.3e},{}",
                    if pass { "PASS" } else { "FAIL" }
                )?;
            }
        }
        if failures == 0 {
            writeln!(out, "PASS")?;
            Ok(())
        } else {
            writeln!(out, "FAIL")?;
            Err(Failure::Check(format!(
                "{failures} prop1 cases exceeded {PROP1_TOL:e}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("gridless-doa").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn prop1_single_case() {
        let (code, out, _) = run_args(&["prop1", "--m", "7", "--alpha", "7.389056"]);
        assert_eq!(code, 0);
        assert!(out.contains(",5.2915,5.2915,"), "{out}");
        assert!(out.trim_end().ends_with("PASS"));
    }

    #[test]
    fn gradcheck_si_cov() {
        let (code, out, _) = run_args(&["gradcheck", "--loss", "si-cov", "--instances", "3"]);
        assert_eq!(code, 0);
        assert!(out.contains("loss=si-cov") && out.contains("PASS"), "{out}");
    }

    #[test]
    fn usage_and_config_errors_exit_2() {
        let (code, _, err) = run_args(&["nonsense"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error kind=usage"), "{err}");
        assert_eq!(err.lines().count(), 1);

        let (code, _, err) = run_args(&["gradcheck", "--loss", "l2"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error kind=config"), "{err}");
    }

    #[test]
    fn missing_checkpoint_is_a_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(
            &cfg,
            format!(
                "[sweep]\nmethods = [\"model:si-cov\"]\n[output]\ncheckpoint = \"{}\"\n",
                dir.path().join("absent.bin").display()
            ),
        )
        .unwrap();
        let (code, _, err) = run_args(&["sweep", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 1, "{err}");
        assert!(err.starts_with("error kind=io"), "{err}");
    }
}
