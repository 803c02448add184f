//! TOML run configuration. Anything affecting reproducibility lives
//! here; command-line flags only select the command and file paths.
//! Unknown keys are rejected and relative paths are resolved against the
//! directory containing the config file.

use std::path::{Path, PathBuf};

use lddmd_core::maps::CouplingParity;
use lddmd_core::{LossMode, SyntheticConfig, TrainConfig};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for data generation, initialization and shuffling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub train: TrainSection,
    pub schema: Option<SchemaSection>,
    pub split: Option<SplitSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Input dataset CSV; required by `train` and `eval`.
    pub data: Option<PathBuf>,
    /// Output directory for all written artifacts.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            data: None,
            out_dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    /// Absolute noise level on the target; omitted selects 5% of the
    /// clean target's standard deviation.
    pub noise_sigma_y: Option<f64>,
    #[serde(default)]
    pub noise_sigma_x: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            n_steps: default_n_steps(),
            noise_sigma_y: None,
            noise_sigma_x: 0.0,
        }
    }
}

fn default_n_steps() -> usize {
    2000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossModeCfg {
    Norm,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityCfg {
    Odd,
    Even,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "d2")]
    pub latent_dim: usize,
    #[serde(default = "d256")]
    pub batch_size: usize,
    #[serde(default = "dlr")]
    pub learning_rate: f64,
    #[serde(default = "dbeta1")]
    pub beta1: f64,
    #[serde(default = "dbeta2")]
    pub beta2: f64,
    #[serde(default = "deps")]
    pub epsilon: f64,
    #[serde(default = "d1000")]
    pub epochs: usize,
    #[serde(default = "d2")]
    pub coupling_hidden_layers: usize,
    #[serde(default = "d2")]
    pub coupling_hidden_dim: usize,
    #[serde(default = "d4")]
    pub readout_hidden_dim: usize,
    #[serde(default = "dnorm")]
    pub loss_mode: LossModeCfg,
    #[serde(default)]
    pub mu_learnable: bool,
    pub gradient_clip: Option<f64>,
    #[serde(default = "dodd")]
    pub coupling_parity: ParityCfg,
}

fn d2() -> usize {
    2
}
fn d4() -> usize {
    4
}
fn d256() -> usize {
    256
}
fn d1000() -> usize {
    1000
}
fn dlr() -> f64 {
    1e-3
}
fn dbeta1() -> f64 {
    0.9
}
fn dbeta2() -> f64 {
    0.99
}
fn deps() -> f64 {
    1e-8
}
fn dnorm() -> LossModeCfg {
    LossModeCfg::Norm
}
fn dodd() -> ParityCfg {
    ParityCfg::Odd
}

impl Default for TrainSection {
    fn default() -> Self {
        toml::from_str("").expect("empty train section has defaults")
    }
}

/// How rows with empty or non-numeric cells are handled at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// The load fails, naming the offending row.
    #[default]
    Fail,
    /// The row is dropped; a resulting stride gap still fails the load.
    Drop,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub time_column: String,
    pub feature_columns: Vec<String>,
    pub target_column: String,
    /// Z-score the feature columns after loading (targets untouched).
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Length of the training prefix; the rest is validation.
    pub train_count: usize,
}

impl RunConfig {
    /// Parses `path` and remembers its directory so relative paths in the
    /// file resolve against it.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, base))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            latent_dim: t.latent_dim,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            epochs: t.epochs,
            seed: self.seed,
            coupling_hidden_layers: t.coupling_hidden_layers,
            coupling_hidden_dim: t.coupling_hidden_dim,
            readout_hidden_dim: t.readout_hidden_dim,
            loss_mode: match t.loss_mode {
                LossModeCfg::Norm => LossMode::Norm,
                LossModeCfg::Squared => LossMode::Squared,
            },
            mu_learnable: t.mu_learnable,
            gradient_clip: t.gradient_clip,
            coupling_parity: match t.coupling_parity {
                ParityCfg::Odd => CouplingParity::OddModified,
                ParityCfg::Even => CouplingParity::EvenModified,
            },
        }
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n_steps: self.synthetic.n_steps,
            noise_sigma_y: self.synthetic.noise_sigma_y,
            noise_sigma_x: self.synthetic.noise_sigma_x,
            seed: self.seed,
        }
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}
