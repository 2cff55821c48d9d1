use std::path::{Path, PathBuf};

use dilseg::data::PhantomParams;
use dilseg::ops::ConvBackend;
use dilseg::train::{HyperParams, SplitSpec};
use serde::Deserialize;

use crate::CliError;

/// Training fraction of the reference split.
pub const REFERENCE_FRACTION: f64 = 0.8;
pub const REFERENCE_EPOCHS: usize = 60;

/// One experiment, read from a TOML file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the split, weight init and batch shuffling; also the phantom
    /// unless `data.seed` is set.
    pub seed: u64,
    pub out: PathBuf,
    /// `"direct"` or `"lowered"`.
    pub conv_backend: String,
    /// Epochs between progress lines on stderr; 0 disables them.
    pub log_every: usize,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory with a manifest; when absent a phantom is generated in memory.
    pub path: Option<PathBuf>,
    pub image_size: usize,
    pub slices: usize,
    pub seed: Option<u64>,
    pub anatomy_scale: f64,
    pub jitter: f64,
    pub noise: f64,
    pub shift: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base_channels: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Unset: 60 at the 80% split, scaled by `0.8 / train_fraction` otherwise
    /// so every split gets the same number of parameter updates.
    pub epochs: Option<usize>,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Unset: 0.8 for `compare`, 0.2 for `propagate`.
    pub train_fraction: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("runs"),
            conv_backend: "lowered".into(),
            log_every: 10,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        let p = PhantomParams::default();
        Self {
            path: None,
            image_size: p.image_size,
            slices: p.n_slices,
            seed: None,
            anatomy_scale: p.anatomy_scale,
            jitter: p.jitter,
            noise: p.noise,
            shift: p.shift,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_channels: 12,
            num_classes: dilseg::NUM_CLASSES,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        let hp = HyperParams::default();
        Self {
            learning_rate: hp.learning_rate,
            momentum: hp.momentum,
            epochs: None,
            batch_size: hp.batch_size,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn backend(&self) -> Result<ConvBackend, CliError> {
        self.conv_backend.parse().map_err(|e: dilseg::Error| CliError::Config(e.to_string()))
    }

    pub fn phantom(&self) -> PhantomParams {
        PhantomParams {
            image_size: self.data.image_size,
            n_slices: self.data.slices,
            seed: self.data.seed.unwrap_or(self.seed),
            anatomy_scale: self.data.anatomy_scale,
            jitter: self.data.jitter,
            noise: self.data.noise,
            shift: self.data.shift,
        }
    }

    pub fn split_spec(&self, default_fraction: f64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction.unwrap_or(default_fraction),
            seed: self.seed,
        }
    }

    pub fn hyper_params(&self, train_fraction: f64) -> HyperParams {
        let epochs = self.train.epochs.unwrap_or_else(|| {
            (REFERENCE_EPOCHS as f64 * REFERENCE_FRACTION / train_fraction).round() as usize
        });
        HyperParams {
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
        }
    }
}
