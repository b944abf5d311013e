//! Run configuration files.
//!
//! A run is described by a TOML file. Every table rejects unknown keys so a
//! typo fails loudly instead of silently falling back to a default.
//!
//! ```toml
//! name = "mnist"
//! seed = 1
//!
//! [model]
//! kind = "rbm"            # or "dense"
//! visible = 784
//! hidden = 500
//!
//! [training]
//! epochs = 20
//! batch_size = 50
//! q_negative = 5
//!
//! [optimizer]
//! kind = "cd1"            # or "sgd", "adam"
//! learning_rate = 0.1
//!
//! [data]
//! root = "../data"
//! normal = "idx:mnist/train-images-idx3-ubyte?labels=mnist/train-labels-idx1-ubyte&exclude=3,5&sample=10000"
//! anomaly = "idx:mnist/train-images-idx3-ubyte?labels=mnist/train-labels-idx1-ubyte&include=3,5&take=1000"
//! ```

use std::path::{Path, PathBuf};

use neglearn::dense::{OptimizerConfig, OptimizerKind, OutputActivation};
use neglearn::rbm::{CdConfig, HiddenSampling};
use neglearn::Sign;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable overriding `[data] root`.
pub const DATA_ROOT_ENV: &str = "NEGLEARN_DATA";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Run name; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub training: TrainingSpec,
    pub optimizer: OptimizerSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rbm,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub visible: usize,
    pub hidden: usize,
    /// Dense only.
    #[serde(default)]
    pub output_activation: Option<OutputActivation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub q_negative: usize,
    #[serde(default = "one")]
    pub negative_rate_ratio: f64,
    #[serde(default = "yes")]
    pub shuffle: bool,
    #[serde(default)]
    pub shared_optimizer_state: bool,
    /// Write a model checkpoint every this many epochs; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Cd1,
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerName,
    pub learning_rate: f64,
    #[serde(default)]
    pub hidden_sampling: Option<HiddenSampling>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Base directory for relative paths in source strings, itself relative
    /// to the config file.
    #[serde(default)]
    pub root: Option<PathBuf>,
    pub normal: String,
    #[serde(default)]
    pub anomaly: Option<String>,
    /// Held-out sets. When absent, `normal` and `anomaly` are split.
    #[serde(default)]
    pub eval_normal: Option<String>,
    #[serde(default)]
    pub eval_anomaly: Option<String>,
    #[serde(default = "seventy")]
    pub train_fraction: f64,
    /// Standardize with the global mean and std of the normal training set.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn seventy() -> f64 {
    0.7
}

/// A parsed config plus where it came from.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub spec: RunSpec,
    pub path: PathBuf,
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<RunSpec> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<LoadedSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let spec = RunSpec::parse(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_owned(),
            message: match e {
                CliError::Config(m) => m,
                other => other.to_string(),
            },
        })?;
        Ok(LoadedSpec {
            spec,
            path: path.to_owned(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::config(m));
        if self.model.visible == 0 || self.model.hidden == 0 {
            return bad("model.visible and model.hidden must be positive".into());
        }
        match (self.model.kind, self.optimizer.kind) {
            (ModelKind::Rbm, OptimizerName::Cd1) => {}
            (ModelKind::Dense, OptimizerName::Sgd | OptimizerName::Adam) => {}
            (m, o) => return bad(format!("optimizer {o:?} cannot train a {m:?} model")),
        }
        if self.model.kind == ModelKind::Rbm && self.model.output_activation.is_some() {
            return bad("model.output_activation applies to dense models only".into());
        }
        if self.optimizer.kind != OptimizerName::Cd1 && self.optimizer.hidden_sampling.is_some() {
            return bad("optimizer.hidden_sampling applies to cd1 only".into());
        }
        if self.optimizer.kind != OptimizerName::Adam
            && (self.optimizer.beta1.is_some()
                || self.optimizer.beta2.is_some()
                || self.optimizer.epsilon.is_some())
        {
            return bad("beta1, beta2 and epsilon apply to adam only".into());
        }
        if self.training.q_negative > 0 && self.data.anomaly.is_none() {
            return bad("training.q_negative > 0 needs data.anomaly".into());
        }
        if self.data.eval_normal.is_some() != self.data.eval_anomaly.is_some() {
            return bad("data.eval_normal and data.eval_anomaly go together".into());
        }
        if matches!(self.output.histogram_bins, Some(b) if b < 2) {
            return bad("output.histogram_bins must be at least 2".into());
        }
        self.training_config_rbm().validate()?;
        self.training_config_dense().validate()?;
        match self.optimizer.kind {
            OptimizerName::Cd1 => self.cd_config().validate()?,
            _ => self.optimizer_config().validate()?,
        }
        Ok(())
    }

    /// Short hex digest identifying the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.model.output_activation.unwrap_or(if self.data.normalize {
            OutputActivation::Identity
        } else {
            OutputActivation::Sigmoid
        })
    }

    pub fn cd_config(&self) -> CdConfig {
        CdConfig {
            learning_rate: self.optimizer.learning_rate,
            zeta: Sign::Positive,
            hidden_sampling: self
                .optimizer
                .hidden_sampling
                .unwrap_or(HiddenSampling::StochasticBinary),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::adam(self.optimizer.learning_rate);
        if self.optimizer.kind == OptimizerName::Sgd {
            cfg.kind = OptimizerKind::Sgd;
        }
        if let Some(b) = self.optimizer.beta1 {
            cfg.adam_beta1 = b;
        }
        if let Some(b) = self.optimizer.beta2 {
            cfg.adam_beta2 = b;
        }
        if let Some(e) = self.optimizer.epsilon {
            cfg.adam_epsilon = e;
        }
        cfg
    }

    fn training_config<S>(&self, settings: S) -> neglearn::trainer::TrainingConfig<S> {
        let t = &self.training;
        neglearn::trainer::TrainingConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            q_negative: t.q_negative,
            settings,
            seed: self.seed,
            shuffle: t.shuffle,
            negative_rate_ratio: t.negative_rate_ratio,
            shared_optimizer_state: t.shared_optimizer_state,
        }
    }

    pub fn training_config_rbm(&self) -> neglearn::trainer::TrainingConfig<CdConfig> {
        self.training_config(self.cd_config())
    }

    pub fn training_config_dense(&self) -> neglearn::trainer::TrainingConfig<OptimizerConfig> {
        self.training_config(self.optimizer_config())
    }
}

impl LoadedSpec {
    /// Directory that relative data paths resolve against: the environment
    /// override if set, else `[data] root` relative to the config file.
    pub fn data_root(&self) -> PathBuf {
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            return PathBuf::from(root);
        }
        let base = self.path.parent().unwrap_or(Path::new("."));
        match &self.spec.data.root {
            Some(r) => base.join(r),
            None => base.to_owned(),
        }
    }

    pub fn run_name(&self) -> String {
        self.spec.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into())
        })
    }
}
