//! Run configuration: one TOML file with a section per pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::MelParams;
use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::laughter::{ClusterConfig, DetectorConfig, PeakConfig};
use crate::losses::LossConfig;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    /// Registered resampler name.
    pub resampler: String,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self { resampler: "sinc".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Frame size for temporal metrics, seconds.
    pub resolution_s: f64,
    pub iou_thresholds: Vec<f64>,
    pub batch_size: usize,
    /// Sliding-window stride for `predict`, seconds.
    pub stride_s: f64,
    /// Registered contribution measure for `export-attention`.
    pub contribution: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            resolution_s: 0.01,
            iou_thresholds: vec![0.3, 0.7],
            batch_size: 64,
            stride_s: 1.0,
            contribution: "occlusion".into(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_s > 0.0 && self.stride_s > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("eval.resolution_s, eval.stride_s and eval.batch_size must be positive".into()));
        }
        if self.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("eval.iou_thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for dataset sampling and augmentation.
    pub seed: u64,
    pub audio: AudioConfig,
    pub mel: MelParams,
    pub peaks: PeakConfig,
    pub cluster: ClusterConfig,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Defaults when `path` is `None`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.mel.validate()?;
        self.peaks.validate()?;
        if self.cluster.k == 0 {
            return Err(Error::Config("cluster.k must be at least 1".into()));
        }
        self.dataset.validate()?;
        self.model.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }

    /// Overrides every stage seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.cluster.seed = seed;
        self.train.seed = seed;
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            peaks: self.peaks.clone(),
            mel: self.mel.clone(),
            cluster: self.cluster.clone(),
            resampler: self.audio.resampler.clone(),
        }
    }

    /// The default configuration as TOML.
    pub fn default_toml() -> String {
        toml::to_string_pretty(&Self::default()).expect("default config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let text = RunConfig::default_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
        assert!(text.contains("[train]") && text.contains("lr = 0.0001"));
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let cfg = RunConfig::parse("[train]\nepochs = 3\n[model]\nd = 64\n").unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.model.d, 64);
        assert_eq!(cfg.dataset.n_s, 8.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[train]\nlearning_rate = 0.1\n").is_err());
        assert!(RunConfig::parse("[nonsense]\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::parse("[loss]\ntau = 0.0\n").is_err());
        assert!(RunConfig::parse("[eval]\nstride_s = -1.0\n").is_err());
    }

    #[test]
    fn set_seed_reaches_every_stage() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(9);
        assert_eq!((cfg.seed, cfg.cluster.seed, cfg.train.seed), (9, 9, 9));
    }
}
