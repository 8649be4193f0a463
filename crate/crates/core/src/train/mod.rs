//! Training orchestration: the four training modes behind one registry, the
//! vanilla/adversarial iteration schedule, per-epoch metrics, and timing.
//!
//! Modes are a strategy family (like the screening attacks): each implements
//! [`TrainingMode`], carries its own cross-epoch state (the mixed mode keeps
//! its schedule counter and prone subset, batch replay keeps its
//! perturbations), and is selected by name at run time. The orchestrator in
//! [`train`] owns everything modes share: the epoch loop, the wall clock,
//! and evaluation.
//!
//! Timing discipline: each epoch's `wall_ms` covers the mode's work for that
//! epoch, including any subset refresh it performs, and nothing else.
//! Accuracy evaluation happens outside the timed region, so reported
//! training time is not polluted by how often metrics are collected.

mod eval;
mod modes;
mod sweep;

pub use eval::{accuracy, robust_accuracy};
pub use modes::ModeRegistry;
pub use sweep::{sweep_ratio, RatioPoint};

use crate::attack::{AttackConfig, AttackRegistry, ScreenConfig};
use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::nn::{Network, SgdConfig, Velocity};
use crate::rng::Seed;
use crate::tensor::Tensor;
use std::time::Instant;

/// Everything a training run is parameterized by. `ratio_r` is the number of
/// vanilla iterations per adversarial iteration in mixed mode; `replay_m` is
/// how many consecutive times batch replay revisits each batch.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: String,
    pub ratio_r: u32,
    pub refilter_period_epochs: usize,
    pub warmup_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub replay_m: usize,
    pub seed: u64,
    pub attack: AttackConfig,
    pub screen: ScreenConfig,
    pub sgd: SgdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: "mixed".into(),
            ratio_r: 2,
            refilter_period_epochs: 4,
            warmup_epochs: 1,
            epochs: 12,
            batch_size: 128,
            replay_m: 4,
            seed: 0,
            attack: AttackConfig::default(),
            screen: ScreenConfig::default(),
            sgd: SgdConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.refilter_period_epochs == 0 {
            return Err(Error::InvalidConfig(
                "refilter_period_epochs must be >= 1".into(),
            ));
        }
        if self.replay_m == 0 {
            return Err(Error::InvalidConfig("replay_m must be >= 1".into()));
        }
        self.attack.validate()?;
        self.screen.validate()?;
        self.sgd.validate()
    }
}

/// What one iteration does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Vanilla,
    Adversarial,
}

/// The interleaving rule: with `ratio_r` vanilla iterations per adversarial
/// one, iteration `i` (0-based) is adversarial iff `(i + 1)` is a multiple
/// of `ratio_r + 1`. `ratio_r = 0` makes every iteration adversarial.
pub fn schedule(iteration: u64, ratio_r: u32) -> Phase {
    if (iteration + 1).is_multiple_of(u64::from(ratio_r) + 1) {
        Phase::Adversarial
    } else {
        Phase::Vanilla
    }
}

/// Fixed contiguous batch slices over a dataset: batch `b` is samples
/// `[b*size, min((b+1)*size, n))`. The last batch may be short.
pub(crate) struct Batcher<'a> {
    images: &'a Tensor,
    labels: &'a [usize],
    size: usize,
}

impl<'a> Batcher<'a> {
    pub(crate) fn new(data: &'a DatasetHandle, size: usize) -> Batcher<'a> {
        Batcher {
            images: &data.images,
            labels: &data.labels,
            size,
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.labels.len().div_ceil(self.size)
    }

    pub(crate) fn get(&self, b: usize) -> (Tensor, &'a [usize]) {
        let start = b * self.size;
        let end = (start + self.size).min(self.labels.len());
        let pix = self.images.sample_len();
        let mut shape = self.images.shape().to_vec();
        shape[0] = end - start;
        let batch = Tensor::new(shape, self.images.values()[start * pix..end * pix].to_vec())
            .expect("batch slice of a valid dataset is valid");
        (batch, &self.labels[start..end])
    }
}

/// Shared mutable state the orchestrator lends to a mode for one epoch.
pub struct EpochContext<'a> {
    pub net: &'a mut Network,
    pub velocity: &'a mut Velocity,
    pub data: &'a DatasetHandle,
    pub cfg: &'a TrainConfig,
    pub screen_attacks: &'a AttackRegistry,
    pub seed: Seed,
}

/// What one epoch did, as counted by the mode that ran it.
#[derive(Debug, Clone, Default)]
pub struct EpochStats {
    pub vanilla_iters: usize,
    pub adv_iters: usize,
    /// Mean training loss over the epoch's iterations, measured at whatever
    /// batch the step actually used (clean or perturbed).
    pub mean_loss: f64,
    /// Fraction of the dataset in the current prone subset; None for modes
    /// that never filter (reported as 0 in metrics).
    pub prone_fraction: Option<f64>,
    /// Adversarial slots that fell back to vanilla on an empty subset.
    pub fallbacks: usize,
}

/// A training mode: runs one epoch at a time against shared state, carrying
/// whatever it needs between epochs internally.
pub trait TrainingMode {
    fn name(&self) -> &'static str;
    fn run_epoch(&mut self, epoch: usize, ctx: &mut EpochContext<'_>) -> Result<EpochStats>;
}

/// One metrics row per epoch; field order matches the CSV schema.
#[derive(Debug, Clone)]
pub struct EpochRow {
    pub epoch: usize,
    pub phase_vanilla: usize,
    pub phase_adv: usize,
    pub train_loss: f64,
    pub vanilla_acc: f64,
    pub robust_acc: f64,
    pub prone_fraction: f64,
    pub wall_ms: f64,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub mode: String,
    pub rows: Vec<EpochRow>,
    /// Sum of per-epoch training wall time (evaluation excluded).
    pub total_wall_ms: f64,
    pub final_vanilla_acc: f64,
    pub final_robust_acc: f64,
    pub fallback_iterations: usize,
}

fn check_labels_fit(data: &DatasetHandle, net: &Network, what: &'static str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} set is empty")));
    }
    for &l in &data.labels {
        if l >= net.num_classes() {
            return Err(Error::InvalidLabel {
                label: l,
                num_classes: net.num_classes(),
            });
        }
    }
    Ok(())
}

/// Train `net` in place and report per-epoch metrics. Deterministic: with
/// the same config (seed included) and starting parameters, two runs produce
/// bit-identical parameters and metrics, wall-clock columns aside.
pub fn train(
    net: &mut Network,
    data: &DatasetHandle,
    test: &DatasetHandle,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with(
        net,
        data,
        test,
        cfg,
        &ModeRegistry::builtin(),
        &AttackRegistry::builtin(),
    )
}

/// [`train`] with explicit mode and screening-attack registries.
pub fn train_with(
    net: &mut Network,
    data: &DatasetHandle,
    test: &DatasetHandle,
    cfg: &TrainConfig,
    modes: &ModeRegistry,
    screen_attacks: &AttackRegistry,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_labels_fit(data, net, "training")?;
    check_labels_fit(test, net, "test")?;
    let mut mode = modes.build(&cfg.mode)?;
    let mut velocity = Velocity::zeros_for(net);
    let seed = Seed(cfg.seed);

    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut fallback_iterations = 0;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let stats = {
            let mut ctx = EpochContext {
                net,
                velocity: &mut velocity,
                data,
                cfg,
                screen_attacks,
                seed,
            };
            mode.run_epoch(epoch, &mut ctx)?
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;

        let vanilla_acc = accuracy(net, test)?;
        let robust_acc = robust_accuracy(net, test, &cfg.attack)?;
        fallback_iterations += stats.fallbacks;
        rows.push(EpochRow {
            epoch,
            phase_vanilla: stats.vanilla_iters,
            phase_adv: stats.adv_iters,
            train_loss: stats.mean_loss,
            vanilla_acc,
            robust_acc,
            prone_fraction: stats.prone_fraction.unwrap_or(0.0),
            wall_ms,
        });
    }

    let last = rows.last().expect("epochs >= 1");
    Ok(TrainReport {
        mode: cfg.mode.clone(),
        total_wall_ms: rows.iter().map(|r| r.wall_ms).sum(),
        final_vanilla_acc: last.vanilla_acc,
        final_robust_acc: last.robust_acc,
        fallback_iterations,
        rows,
    })
}
