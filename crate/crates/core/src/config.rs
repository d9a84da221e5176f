//! Run configuration.
//!
//! Config files are flat `key = value` text. Every key is dotted by section,
//! which is also valid TOML, so a file may equally use `[section]` headers.
//!
//! | key                      | default                         | meaning                                        |
//! |--------------------------|---------------------------------|------------------------------------------------|
//! | `entropy.bins`           | 16                              | soft-histogram bin count                        |
//! | `entropy.temperature`    | 0.5                             | soft-assignment temperature                     |
//! | `entropy.range`          | 4.0                             | bins span `[-range, range]`                     |
//! | `model.feature_maps`     | 16                              | encoder output maps (twice the selectable count)|
//! | `model.s1_channels`      | `[32, 64, 64]`                  | widths of the three front convolutions          |
//! | `model.gate_hidden`      | 32                              | hidden width of the SNR gating perceptron       |
//! | `model.policy_hidden`    | 64                              | hidden width of both policy perceptrons         |
//! | `model.seed`             | 0                               | weight initialization seed                      |
//! | `rate.prune_ratios`      | `[0, 0.2, 0.25, 0.3, 0.35]`     | pruning ratio table (first entry must be 0)     |
//! | `rate.gumbel_temperature`| 1.0                             | Gumbel-Softmax temperature for the map policy   |
//! | `rate.disable_p2`        | false                           | force every pruning ratio to 0                  |
//! | `train.alpha`            | 2e-4                            | rate penalty weight                             |
//! | `train.beta`             | 1e-5                            | entropy reward weight                           |
//! | `train.batch_size`       | 512                             |                                                 |
//! | `train.stage_epochs`     | `[200, 200, 100, 100]`          | epochs per schedule stage                       |
//! | `train.learning_rates`   | `[5e-4, 5e-5, 1e-5, 1e-5]`      | Adam learning rate per stage                    |
//! | `train.snr_min`          | 0.0                             | lower end of the training SNR draw (dB)         |
//! | `train.snr_max`          | 15.0                            | upper end of the training SNR draw (dB)         |
//! | `train.seed`             | 0                               | shuffling, SNR and noise seed                   |
//! | `train.checkpoint_every` | 0                               | extra checkpoint every k epochs (0 = off)       |
//! | `data.limit`             | unset                           | train subset size                               |
//! | `data.test_limit`        | unset                           | test subset size                                |
//! | `eval.snr_list`          | `[0, 5, 10, 15]`                | evaluation SNRs (dB)                            |
//! | `eval.seed`              | 0                               | evaluation channel seed                         |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial side of the input images.
pub const IMAGE_SIDE: usize = 32;
/// Colour channels of the input images.
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub bins: usize,
    pub temperature: f64,
    pub range: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            bins: 16,
            temperature: 0.5,
            range: 4.0,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::config("entropy.bins must be at least 2"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("entropy.temperature must be positive"));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::config("entropy.range must be positive"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.range / self.bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins)
            .map(|b| -self.range + (b as f64 + 0.5) * w)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of encoder output maps (2C).
    pub feature_maps: usize,
    pub s1_channels: [usize; 3],
    pub gate_hidden: usize,
    pub policy_hidden: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_maps: 16,
            s1_channels: [32, 64, 64],
            gate_hidden: 32,
            policy_hidden: 64,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_maps < 2 || self.feature_maps % 2 != 0 {
            return Err(Error::config("model.feature_maps must be even and >= 2"));
        }
        if self.s1_channels.iter().any(|&c| c == 0) || self.gate_hidden == 0 || self.policy_hidden == 0
        {
            return Err(Error::config("model widths must be nonzero"));
        }
        Ok(())
    }

    /// Number of selectable concatenated maps, C.
    pub fn pairs(&self) -> usize {
        self.feature_maps / 2
    }

    /// Length of one encoder output map, L/2.
    pub fn half_length(&self) -> usize {
        (IMAGE_SIDE / 4) * (IMAGE_SIDE / 4)
    }

    /// Length of one concatenated map, L.
    pub fn length(&self) -> usize {
        2 * self.half_length()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub prune_ratios: Vec<f64>,
    pub gumbel_temperature: f64,
    pub disable_p2: bool,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            prune_ratios: vec![0.0, 0.2, 0.25, 0.3, 0.35],
            gumbel_temperature: 1.0,
            disable_p2: false,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prune_ratios.is_empty() {
            return Err(Error::config("rate.prune_ratios must not be empty"));
        }
        if self.prune_ratios[0] != 0.0 {
            return Err(Error::config("rate.prune_ratios must start with 0"));
        }
        if self.prune_ratios.iter().any(|&a| !(0.0..1.0).contains(&a)) {
            return Err(Error::config("rate.prune_ratios entries must lie in [0, 1)"));
        }
        if !(self.gumbel_temperature > 0.0) {
            return Err(Error::config("rate.gumbel_temperature must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub stage_epochs: [usize; 4],
    pub learning_rates: [f64; 4],
    pub snr_min: f64,
    pub snr_max: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 2e-4,
            beta: 1e-5,
            batch_size: 512,
            stage_epochs: [200, 200, 100, 100],
            learning_rates: [5e-4, 5e-5, 1e-5, 1e-5],
            snr_min: 0.0,
            snr_max: 15.0,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::config("train.alpha and train.beta must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be positive"));
        }
        if self.learning_rates.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::config("train.learning_rates must be positive"));
        }
        if !(self.snr_min <= self.snr_max) || !self.snr_min.is_finite() || !self.snr_max.is_finite()
        {
            return Err(Error::config("train.snr_min must not exceed train.snr_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub limit: Option<usize>,
    pub test_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub snr_list: Vec<f64>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            snr_list: vec![0.0, 5.0, 10.0, 15.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub entropy: EntropyConfig,
    pub model: ModelConfig,
    pub rate: RateConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.entropy.validate()?;
        self.model.validate()?;
        self.rate.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// The parts of the configuration that determine network shapes and the
    /// meaning of the weights. Checkpoints carry this snapshot.
    pub fn architecture_snapshot(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            entropy: &'a EntropyConfig,
            model: &'a ModelConfig,
            rate: &'a RateConfig,
        }
        toml::to_string(&Snapshot {
            entropy: &self.entropy,
            model: &self.model,
            rate: &self.rate,
        })
        .expect("config sections always serialize")
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
