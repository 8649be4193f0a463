//! Screening-based filtering: evaluate every training sample under the cheap
//! perturbation attacks and keep the ones whose top prediction is unstable.
//!
//! Filtering is where the training-time saving comes from, so the dataset
//! pass is batched: samples are screened in chunks, each chunk doing one
//! forward per (attack, trial) round instead of seven singleton forwards per
//! sample. Per-sample random streams keep the result identical to screening
//! each sample on its own.

use crate::attack::{AttackRegistry, ScreenConfig, ScreeningAttack};
use crate::error::{Error, Result};
use crate::nn::{softmax_probs, Network};
use crate::rng::Seed;
use crate::tensor::{argmax, Tensor};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// How one sample's prediction moves under screening: the clean softmax
/// output plus `trials_per_attack` perturbed evaluations per attack, folded
/// into elementwise probability bounds and the per-trial argmax record.
#[derive(Debug, Clone)]
pub struct PredictionRange {
    pub sample_index: usize,
    pub clean_argmax: usize,
    /// Argmax of each perturbed trial, attack-major: all trials of the first
    /// registered attack come first.
    pub trial_argmaxes: Vec<usize>,
    /// Elementwise minimum over the clean and all perturbed probability
    /// vectors.
    pub prob_min: Vec<f64>,
    /// Elementwise maximum, same evaluations.
    pub prob_max: Vec<f64>,
}

impl PredictionRange {
    /// True when any screening trial moves the top prediction away from the
    /// clean top prediction. Measured against the model's own clean argmax,
    /// not the ground-truth label: instability of the prediction is what
    /// marks a sample worth attacking.
    pub fn is_prone(&self) -> bool {
        self.trial_argmaxes.iter().any(|&a| a != self.clean_argmax)
    }
}

/// The attack-prone subset of a training set, stamped with the epoch whose
/// model computed it. Serializes to the `{epoch, fraction, indices}` document
/// the `filter` subcommand emits.
#[derive(Debug, Clone, Serialize)]
pub struct ProneSubset {
    #[serde(rename = "epoch")]
    pub computed_at_epoch: usize,
    pub fraction: f64,
    /// Strictly increasing training-set indices.
    pub indices: Vec<usize>,
}

/// Samples screened per forward pass during a dataset filter.
const SCREEN_CHUNK: usize = 256;

/// Shared kernel: ranges for a batch of images, one stream per image. Trials
/// draw from each sample's stream in attack-major order, so a sample's range
/// depends only on its own stream state, never on its neighbors in the batch.
fn ranges_for_batch(
    net: &Network,
    images: &Tensor,
    base_index: usize,
    cfg: &ScreenConfig,
    attacks: &[Arc<dyn ScreeningAttack>],
    streams: &mut [ChaCha8Rng],
) -> Result<Vec<PredictionRange>> {
    let m = images.num_samples();
    debug_assert_eq!(m, streams.len());
    let sample_shape = images.shape()[1..].to_vec();

    let clean = softmax_probs(&net.forward(images)?);
    let mut ranges: Vec<PredictionRange> = (0..m)
        .map(|k| {
            let p = clean.sample(k);
            PredictionRange {
                sample_index: base_index + k,
                clean_argmax: argmax(p),
                trial_argmaxes: Vec::with_capacity(attacks.len() * cfg.trials_per_attack),
                prob_min: p.to_vec(),
                prob_max: p.to_vec(),
            }
        })
        .collect();

    let mut buf = images.clone();
    for attack in attacks {
        for _ in 0..cfg.trials_per_attack {
            for (k, stream) in streams.iter_mut().enumerate() {
                attack.perturb_into(
                    images.sample(k),
                    buf.sample_mut(k),
                    &sample_shape,
                    cfg,
                    stream,
                );
            }
            let probs = softmax_probs(&net.forward(&buf)?);
            for (k, range) in ranges.iter_mut().enumerate() {
                let p = probs.sample(k);
                range.trial_argmaxes.push(argmax(p));
                for (j, &v) in p.iter().enumerate() {
                    range.prob_min[j] = range.prob_min[j].min(v);
                    range.prob_max[j] = range.prob_max[j].max(v);
                }
            }
        }
    }
    Ok(ranges)
}

/// Screen a single image (sample-shaped, no batch axis) with an explicit
/// attack set and stream.
pub fn prediction_range_with(
    net: &Network,
    image: &Tensor,
    cfg: &ScreenConfig,
    attacks: &AttackRegistry,
    rng: &mut ChaCha8Rng,
    sample_index: usize,
) -> Result<PredictionRange> {
    cfg.validate()?;
    let shape: Vec<usize> = std::iter::once(1)
        .chain(image.shape().iter().copied())
        .collect();
    let batch = Tensor::new(shape, image.values().to_vec())?;
    let mut ranges = ranges_for_batch(
        net,
        &batch,
        sample_index,
        cfg,
        attacks.attacks(),
        std::slice::from_mut(rng),
    )?;
    Ok(ranges.pop().expect("one image in, one range out"))
}

/// Screen a single image with the stock attacks.
pub fn prediction_range(
    net: &Network,
    image: &Tensor,
    cfg: &ScreenConfig,
    rng: &mut ChaCha8Rng,
    sample_index: usize,
) -> Result<PredictionRange> {
    prediction_range_with(
        net,
        image,
        cfg,
        &AttackRegistry::builtin(),
        rng,
        sample_index,
    )
}

/// Screen a whole training set (batch-shaped `[N, ...]`) and return the
/// prone indices. Each sample's stream is derived from (seed, epoch, sample
/// index) alone, so membership is independent of chunking and evaluation
/// order, and identical (network, seed, epoch) always reproduce the same
/// subset.
pub fn filter_subset_with(
    net: &Network,
    images: &Tensor,
    cfg: &ScreenConfig,
    attacks: &AttackRegistry,
    seed: Seed,
    epoch: usize,
) -> Result<ProneSubset> {
    cfg.validate()?;
    let n = images.num_samples();
    if n == 0 {
        return Err(Error::InvalidConfig(
            "cannot filter an empty dataset".into(),
        ));
    }
    let pix = images.sample_len();
    let mut indices = Vec::new();
    let mut start = 0;
    while start < n {
        let m = SCREEN_CHUNK.min(n - start);
        let mut shape = images.shape().to_vec();
        shape[0] = m;
        let chunk = Tensor::new(
            shape,
            images.values()[start * pix..(start + m) * pix].to_vec(),
        )?;
        let mut streams: Vec<ChaCha8Rng> = (0..m)
            .map(|k| seed.lane("screen", &[epoch as u64, (start + k) as u64]))
            .collect();
        let ranges = ranges_for_batch(net, &chunk, start, cfg, attacks.attacks(), &mut streams)?;
        indices.extend(
            ranges
                .iter()
                .filter(|r| r.is_prone())
                .map(|r| r.sample_index),
        );
        start += m;
    }
    Ok(ProneSubset {
        computed_at_epoch: epoch,
        fraction: indices.len() as f64 / n as f64,
        indices,
    })
}

/// Screen a whole training set with the stock attacks.
pub fn filter_subset(
    net: &Network,
    images: &Tensor,
    cfg: &ScreenConfig,
    seed: Seed,
    epoch: usize,
) -> Result<ProneSubset> {
    filter_subset_with(net, images, cfg, &AttackRegistry::builtin(), seed, epoch)
}
