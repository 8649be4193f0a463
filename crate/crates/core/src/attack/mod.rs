//! Attacks: the FGSM gradient attack used for adversarial training and the
//! cheap gradient-free screening attacks used to find attack-prone samples.
//!
//! Screening attacks are a strategy family: each implements
//! [`ScreeningAttack`] and is registered by name, so the filtering code (and
//! tests, which register hand-built perturbations) is generic over the set.

mod fgsm;
mod grid;
mod noise;

pub use fgsm::fgsm;
pub(crate) use fgsm::sign;
pub use grid::{grid_count, grid_lines, GridLines};
pub use noise::{random_perturb, UniformNoise};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Gradient-attack strength on the normalized pixel scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { epsilon: 0.3 }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Screening parameters. `amplitude` is on the normalized scale (the 0-255
/// pixel-count value from config files is divided by 255 before it gets
/// here); `grid_fraction`/`grid_line_cap` size the line attack per image
/// dimension; `grid_value` is what line pixels are overwritten with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenConfig {
    pub amplitude: f64,
    pub trials_per_attack: usize,
    pub grid_line_cap: usize,
    pub grid_fraction: f64,
    pub grid_value: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            amplitude: 60.0 / 255.0,
            trials_per_attack: 3,
            grid_line_cap: 5,
            grid_fraction: 0.05,
            grid_value: 1.0,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "screen amplitude must be in [0, 1] after normalization, got {}",
                self.amplitude
            )));
        }
        if self.trials_per_attack == 0 {
            return Err(Error::InvalidConfig(
                "trials_per_attack must be >= 1".into(),
            ));
        }
        if self.grid_line_cap == 0 {
            return Err(Error::InvalidConfig("grid_line_cap must be >= 1".into()));
        }
        if !(self.grid_fraction >= 0.0 && self.grid_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "grid_fraction must be in [0, 1], got {}",
                self.grid_fraction
            )));
        }
        if !(self.grid_value >= 0.0 && self.grid_value <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "grid_value must be in [0, 1], got {}",
                self.grid_value
            )));
        }
        Ok(())
    }
}

/// A cheap, gradient-free perturbation used to screen samples. Output pixels
/// must stay in [0, 1]; draws come only from the supplied stream, so results
/// depend on the stream state and nothing else.
pub trait ScreeningAttack: Send + Sync {
    fn name(&self) -> &'static str;

    /// Perturb one image. `src` and `dst` are the flattened pixels of an
    /// image with per-sample shape `shape` (e.g. `[28, 28, 1]`).
    fn perturb_into(
        &self,
        src: &[f64],
        dst: &mut [f64],
        shape: &[usize],
        cfg: &ScreenConfig,
        rng: &mut ChaCha8Rng,
    );

    /// Tensor convenience wrapper for one image.
    fn perturb(&self, image: &Tensor, cfg: &ScreenConfig, rng: &mut ChaCha8Rng) -> Tensor {
        let mut out = image.clone();
        let shape = image.shape().to_vec();
        self.perturb_into(image.values(), out.values_mut(), &shape, cfg, rng);
        out
    }
}

/// Ordered, name-addressable set of screening attacks. Order matters: trial
/// k*trials_per_attack+t in a prediction range belongs to attack k.
#[derive(Clone)]
pub struct AttackRegistry {
    entries: Vec<Arc<dyn ScreeningAttack>>,
}

impl AttackRegistry {
    /// The stock set: uniform noise first, grid lines second.
    pub fn builtin() -> AttackRegistry {
        AttackRegistry {
            entries: vec![Arc::new(UniformNoise), Arc::new(GridLines)],
        }
    }

    pub fn from_attacks(entries: Vec<Arc<dyn ScreeningAttack>>) -> AttackRegistry {
        AttackRegistry { entries }
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ScreeningAttack>> {
        self.entries
            .iter()
            .find(|a| a.name() == name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "screening attack",
                name: name.to_string(),
                known: self.names(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|a| a.name()).collect()
    }

    pub fn attacks(&self) -> &[Arc<dyn ScreeningAttack>] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_order_is_noise_then_grid() {
        let reg = AttackRegistry::builtin();
        assert_eq!(reg.names(), vec!["uniform_noise", "grid_lines"]);
        assert!(reg.get("uniform_noise").is_ok());
        assert!(matches!(
            reg.get("pixel_swap"),
            Err(Error::UnknownStrategy {
                kind: "screening attack",
                ..
            })
        ));
    }

    #[test]
    fn config_validation_catches_out_of_range_values() {
        assert!(AttackConfig { epsilon: 0.0 }.validate().is_err());
        assert!(AttackConfig { epsilon: 1.5 }.validate().is_err());
        assert!(AttackConfig { epsilon: 1.0 }.validate().is_ok());
        assert!(ScreenConfig {
            amplitude: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScreenConfig {
            trials_per_attack: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScreenConfig {
            grid_line_cap: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScreenConfig {
            grid_value: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ScreenConfig::default().validate().is_ok());
        // amplitude 0 is legal: it makes the noise attack a no-op, which the
        // filtering tests rely on
        assert!(ScreenConfig {
            amplitude: 0.0,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }
}
