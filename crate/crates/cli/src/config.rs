//! Pipeline configuration file (TOML). Every section and key is optional;
//! command-line flags override file values.
//!
//! ```toml
//! seed = 7                 # overrides every per-stage seed below
//!
//! [features]              # descriptor + window settings
//! window_s = 20.0
//! shift_s = 1.0
//! pitch_max_hz = 500.0
//!
//! [sampling]
//! k_seconds = 6.0
//! n_context = 4
//!
//! [train]
//! variant = "te-dcn"
//! max_epochs = 6
//! val_files = ["synth_1198", "synth_1199"]
//!
//! [synth]                 # labeled evaluation corpus + unlabeled training corpus
//! n_files = 20
//! train_n_files = 200
//!
//! [eval]
//! codes = ["dominant_low"]
//! n = 60
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use behman::features::{LldConfig, DEFAULT_SHIFT_S, DEFAULT_WINDOW_S};
use behman::model::{TrainConfig, Variant};
use behman::sampling::SamplerConfig;
use behman::synth::BenchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub features: FeatureSection,
    pub sampling: SamplerConfig,
    pub train: TrainSection,
    pub synth: BenchConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSection {
    pub window_s: f64,
    pub shift_s: f64,
    #[serde(flatten)]
    pub lld: LldConfig,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            window_s: DEFAULT_WINDOW_S,
            shift_s: DEFAULT_SHIFT_S,
            lld: LldConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub variant: Variant,
    pub val_files: Vec<String>,
    #[serde(flatten)]
    pub params: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            variant: Variant::TeDcn,
            val_files: Vec::new(),
            params: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Behavior codes to evaluate; empty means every code in the labels file.
    pub codes: Vec<String>,
    /// Neighbor count for trajectories.
    pub n: usize,
    pub balance: bool,
    pub per_class: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            codes: Vec::new(),
            n: behman::eval::DEFAULT_TRAJECTORY_N,
            balance: false,
            per_class: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<(Self, Vec<u8>)> {
        let Some(path) = path else {
            return Ok((Self::default(), Vec::new()));
        };
        let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes).context("config is not UTF-8")?;
        let mut cfg: Self = toml::from_str(text)
            .map_err(|e| behman::Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = cfg.seed {
            cfg.apply_seed(seed);
        }
        cfg.validate()
            .map_err(|e| behman::Error::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> behman::Result<()> {
        let f = &self.features;
        f.lld.validate()?;
        if !(f.shift_s > 0.0 && f.window_s >= f.shift_s) {
            return Err(behman::Error::Config("need 0 < shift_s <= window_s".into()));
        }
        self.sampling.validate()?;
        self.train.params.validate()?;
        self.synth.validate()?;
        if self.eval.n == 0 {
            return Err(behman::Error::Config("eval.n must be >= 1".into()));
        }
        Ok(())
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.sampling.seed = seed;
        self.train.params.seed = seed;
        self.synth.corpus.seed = seed;
    }
}
