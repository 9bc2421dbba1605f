//! TOML experiment configuration.
//!
//! ```toml
//! seed = 1
//!
//! [geometry]            # defaults to the 4-element MRA {1, 2, 5, 7}
//! sensors = [1, 2, 5, 7]
//! m = 7                 # optional, defaults to the largest sensor position
//! spacing = 0.5         # d/λ
//!
//! [sweep]
//! k = [1]
//! snr_db = [20.0]
//! snapshots = [10, 50, 100]
//! direction_draws = 100
//! noise_draws = 100
//! range = [0.5235987755982988, 2.6179938779914944]
//! min_separation = 0.06981317007977318
//! source_power = 1.0
//! methods = ["da"]      # or "model:<loss id>", which needs output.checkpoint
//!
//! [data]
//! k = 2
//! train_size = 20000
//! validation_size = 2000
//! snapshots = 50
//! snr_db = [-11.0, -9.0, ...]   # optional, defaults to the odd set -11..21
//!
//! [train]
//! loss = "si-cov"
//! peak_lr = 0.05
//! warm_fraction = 0.3
//! epochs = 10
//! batch_size = 32
//! hidden = [64, 64]
//! delta = 0.0
//! epsilon = 0.0
//! momentum = 0.0
//!
//! [output]
//! sweep_csv = "sweep.csv"
//! dataset = "train.bin"
//! validation = "validation.bin"
//! dataset_csv = "train.csv"     # optional
//! checkpoint = "model.bin"
//! history_csv = "history.csv"
//! eval_csv = "eval.csv"
//! ```
//!
//! Every table and key is optional; unknown keys are rejected.

use std::path::PathBuf;

use serde::Deserialize;

use crate::array_model::ArrayGeometry;
use crate::error::{DoaError, Result};
use crate::evaluation::{EVAL_MIN_SEPARATION, EVAL_RANGE};
use crate::losses::LossKind;
use crate::toy_model::{TrainConfig, TRAINING_SNR_DB};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub sensors: Vec<usize>,
    pub m: Option<usize>,
    pub spacing: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            sensors: vec![1, 2, 5, 7],
            m: None,
            spacing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub k: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub snapshots: Vec<usize>,
    pub direction_draws: usize,
    pub noise_draws: usize,
    pub range: [f64; 2],
    pub min_separation: f64,
    pub source_power: f64,
    pub methods: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            k: vec![1],
            snr_db: vec![20.0],
            snapshots: vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            direction_draws: 100,
            noise_draws: 100,
            range: [EVAL_RANGE.0, EVAL_RANGE.1],
            min_separation: EVAL_MIN_SEPARATION,
            source_power: 1.0,
            methods: vec!["da".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub k: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub snapshots: usize,
    pub snr_db: Vec<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            k: 2,
            train_size: 20_000,
            validation_size: 2_000,
            snapshots: 50,
            snr_db: TRAINING_SNR_DB.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub loss: String,
    pub peak_lr: f64,
    pub warm_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: [usize; 2],
    pub delta: f64,
    pub epsilon: f64,
    pub momentum: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            loss: d.loss.id().into(),
            peak_lr: d.peak_lr,
            warm_fraction: d.warm_fraction,
            epochs: d.epochs,
            batch_size: d.batch_size,
            hidden: d.hidden,
            delta: d.delta,
            epsilon: d.epsilon,
            momentum: d.momentum,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub sweep_csv: PathBuf,
    pub dataset: PathBuf,
    pub validation: PathBuf,
    pub dataset_csv: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub history_csv: PathBuf,
    pub eval_csv: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            sweep_csv: "sweep.csv".into(),
            dataset: "train.bin".into(),
            validation: "validation.bin".into(),
            dataset_csv: None,
            checkpoint: "model.bin".into(),
            history_csv: "history.csv".into(),
            eval_csv: "eval.csv".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DoaError::Config(e.message().replace('\n', " ")))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let g = &self.geometry;
        let m =
            g.m.unwrap_or_else(|| g.sensors.iter().copied().max().unwrap_or(0));
        ArrayGeometry::new(g.sensors.clone(), m, g.spacing)
            .map_err(|e| DoaError::Config(format!("geometry: {e}")))
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            loss: t.loss.parse()?,
            peak_lr: t.peak_lr,
            warm_fraction: t.warm_fraction,
            epochs: t.epochs,
            batch_size: t.batch_size,
            train_size: self.data.train_size,
            validation_size: self.data.validation_size,
            seed,
            delta: t.delta,
            epsilon: t.epsilon,
            momentum: t.momentum,
            hidden: t.hidden,
        };
        cfg.validate()
            .map_err(|e| DoaError::Config(format!("train: {e}")))?;
        Ok(cfg)
    }
}

/// A sweep method as written in the config: `da` or `model:<loss id>`.
pub fn parse_method(text: &str) -> Result<Option<LossKind>> {
    match text.split_once(':') {
        None if text == "da" => Ok(None),
        Some(("model", loss)) => Ok(Some(loss.parse()?)),
        _ => Err(DoaError::Config(format!(
            "unknown method `{text}` (expected `da` or `model:<loss>`)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.geometry().unwrap(), ArrayGeometry::mra4());
        assert_eq!(cfg.sweep.direction_draws, 100);
        assert_eq!(cfg.train_config(0).unwrap().loss, LossKind::SiCov);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::parse("[sweep]\ntrails = 3\n").unwrap_err();
        assert!(
            matches!(&err, DoaError::Config(msg) if msg.contains("trails")),
            "{err}"
        );
        assert!(ExperimentConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn methods() {
        assert_eq!(parse_method("da").unwrap(), None);
        assert_eq!(
            parse_method("model:subspace").unwrap(),
            Some(LossKind::Subspace)
        );
        assert!(parse_method("model:l2").is_err());
        assert!(parse_method("music").is_err());
    }
}
