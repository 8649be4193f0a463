//! Experiment configuration files and their environment overrides.
//!
//! A run is described by one JSON file: where the data comes from, which
//! model to build, the training settings, where to write artifacts, and how
//! many seeds to repeat over. Every training field is optional and defaults
//! to the stock value, so a minimal config is just a dataset and an output
//! directory.
//!
//! One deliberate unit shift: `screen.amplitude` is written on the 0-255
//! pixel scale in config files (matching how perturbation budgets are
//! usually quoted) and divided by 255 at load time. Everything else is
//! carried through unchanged.
//!
//! Environment variables named in [`ENV_OVERRIDES`] override individual
//! fields after the file is parsed, so sweeps can be scripted without
//! generating config files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::attack::{AttackConfig, ScreenConfig};
use crate::error::{Error, Result};
use crate::nn::{ModelKind, SgdConfig};
use crate::train::TrainConfig;

/// Where the training and test sets come from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Big-endian IDX image/label file pairs.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    /// Record-per-sample binary batches (label byte + channel planes).
    CifarBin {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
    },
    /// Generated in memory; useful for smoke tests and demos.
    Synthetic {
        train_n: usize,
        test_n: usize,
        #[serde(default = "default_side")]
        height: usize,
        #[serde(default = "default_side")]
        width: usize,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default)]
        data_seed: u64,
    },
}

fn default_side() -> usize {
    28
}

fn default_classes() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `mlp_small` or `cnn_small`. Input shape and class count come from
    /// the dataset.
    pub kind: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: "mlp_small".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AttackSettings {
    epsilon: f64,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            epsilon: AttackConfig::default().epsilon,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScreenSettings {
    /// On the 0-255 pixel scale; divided by 255 when converted.
    amplitude: f64,
    trials_per_attack: usize,
    grid_line_cap: usize,
    grid_fraction: f64,
    grid_value: f64,
}

impl Default for ScreenSettings {
    fn default() -> Self {
        let s = ScreenConfig::default();
        ScreenSettings {
            amplitude: s.amplitude * 255.0,
            trials_per_attack: s.trials_per_attack,
            grid_line_cap: s.grid_line_cap,
            grid_fraction: s.grid_fraction,
            grid_value: s.grid_value,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SgdSettings {
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
}

impl Default for SgdSettings {
    fn default() -> Self {
        let s = SgdConfig::default();
        SgdSettings {
            learning_rate: s.learning_rate,
            momentum: s.momentum,
            weight_decay: s.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSettings {
    mode: String,
    ratio_r: u32,
    refilter_period_epochs: usize,
    warmup_epochs: usize,
    epochs: usize,
    batch_size: usize,
    replay_m: usize,
    seed: u64,
    attack: AttackSettings,
    screen: ScreenSettings,
    sgd: SgdSettings,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            mode: t.mode,
            ratio_r: t.ratio_r,
            refilter_period_epochs: t.refilter_period_epochs,
            warmup_epochs: t.warmup_epochs,
            epochs: t.epochs,
            batch_size: t.batch_size,
            replay_m: t.replay_m,
            seed: t.seed,
            attack: AttackSettings::default(),
            screen: ScreenSettings::default(),
            sgd: SgdSettings::default(),
        }
    }
}

impl TrainSettings {
    fn into_config(self) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            ratio_r: self.ratio_r,
            refilter_period_epochs: self.refilter_period_epochs,
            warmup_epochs: self.warmup_epochs,
            epochs: self.epochs,
            batch_size: self.batch_size,
            replay_m: self.replay_m,
            seed: self.seed,
            attack: AttackConfig {
                epsilon: self.attack.epsilon,
            },
            screen: ScreenConfig {
                amplitude: self.screen.amplitude / 255.0,
                trials_per_attack: self.screen.trials_per_attack,
                grid_line_cap: self.screen.grid_line_cap,
                grid_fraction: self.screen.grid_fraction,
                grid_value: self.screen.grid_value,
            },
            sgd: SgdConfig {
                learning_rate: self.sgd.learning_rate,
                momentum: self.sgd.momentum,
                weight_decay: self.sgd.weight_decay,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    dataset: DatasetConfig,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    train: TrainSettings,
    out_dir: PathBuf,
    #[serde(default = "default_repeats")]
    repeats: usize,
}

fn default_repeats() -> usize {
    1
}

/// A fully resolved experiment: parsed file plus any environment overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model_kind: ModelKind,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub repeats: usize,
}

/// The environment variables that override config fields, with the field
/// each one maps to. Values parse like the JSON field; parse failures are
/// errors, not silent fallbacks.
pub const ENV_OVERRIDES: &[(&str, &str)] = &[
    ("SUBADV_MODE", "train.mode"),
    ("SUBADV_RATIO_R", "train.ratio_r"),
    ("SUBADV_REFILTER_PERIOD", "train.refilter_period_epochs"),
    ("SUBADV_WARMUP_EPOCHS", "train.warmup_epochs"),
    ("SUBADV_EPOCHS", "train.epochs"),
    ("SUBADV_BATCH_SIZE", "train.batch_size"),
    ("SUBADV_REPLAY_M", "train.replay_m"),
    ("SUBADV_SEED", "train.seed"),
    ("SUBADV_EPSILON", "train.attack.epsilon"),
    (
        "SUBADV_SCREEN_AMPLITUDE",
        "train.screen.amplitude (0-255 scale)",
    ),
    ("SUBADV_OUT_DIR", "out_dir"),
    ("SUBADV_REPEATS", "repeats"),
];

fn parse_env<T: std::str::FromStr>(var: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| {
        Error::InvalidConfig(format!("{var}={raw:?} does not parse as {}", {
            std::any::type_name::<T>()
        }))
    })
}

impl RunConfig {
    /// Parse a config file and apply overrides from the process environment.
    pub fn load(path: &Path) -> Result<RunConfig> {
        Self::load_with(path, |var| std::env::var(var).ok())
    }

    /// [`RunConfig::load`] with an explicit environment, so overrides can be
    /// tested without touching process globals.
    pub fn load_with(path: &Path, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        let file: RunConfigFile = serde_json::from_str(&text)?;

        let mut cfg = RunConfig {
            dataset: file.dataset,
            model_kind: ModelKind::parse(&file.model.kind)?,
            train: file.train.into_config(),
            out_dir: file.out_dir,
            repeats: file.repeats,
        };

        if let Some(v) = env("SUBADV_MODE") {
            cfg.train.mode = v;
        }
        if let Some(v) = env("SUBADV_RATIO_R") {
            cfg.train.ratio_r = parse_env("SUBADV_RATIO_R", &v)?;
        }
        if let Some(v) = env("SUBADV_REFILTER_PERIOD") {
            cfg.train.refilter_period_epochs = parse_env("SUBADV_REFILTER_PERIOD", &v)?;
        }
        if let Some(v) = env("SUBADV_WARMUP_EPOCHS") {
            cfg.train.warmup_epochs = parse_env("SUBADV_WARMUP_EPOCHS", &v)?;
        }
        if let Some(v) = env("SUBADV_EPOCHS") {
            cfg.train.epochs = parse_env("SUBADV_EPOCHS", &v)?;
        }
        if let Some(v) = env("SUBADV_BATCH_SIZE") {
            cfg.train.batch_size = parse_env("SUBADV_BATCH_SIZE", &v)?;
        }
        if let Some(v) = env("SUBADV_REPLAY_M") {
            cfg.train.replay_m = parse_env("SUBADV_REPLAY_M", &v)?;
        }
        if let Some(v) = env("SUBADV_SEED") {
            cfg.train.seed = parse_env("SUBADV_SEED", &v)?;
        }
        if let Some(v) = env("SUBADV_EPSILON") {
            cfg.train.attack.epsilon = parse_env("SUBADV_EPSILON", &v)?;
        }
        if let Some(v) = env("SUBADV_SCREEN_AMPLITUDE") {
            let raw: f64 = parse_env("SUBADV_SCREEN_AMPLITUDE", &v)?;
            cfg.train.screen.amplitude = raw / 255.0;
        }
        if let Some(v) = env("SUBADV_OUT_DIR") {
            cfg.out_dir = PathBuf::from(v);
        }
        if let Some(v) = env("SUBADV_REPEATS") {
            cfg.repeats = parse_env("SUBADV_REPEATS", &v)?;
        }

        if cfg.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        cfg.train.validate()?;
        Ok(cfg)
    }
}
