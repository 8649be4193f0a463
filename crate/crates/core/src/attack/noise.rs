//! Per-pixel uniform noise screening attack.

use crate::attack::{ScreenConfig, ScreeningAttack};
use crate::rng::uniform_symmetric;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn add_noise<R: Rng>(src: &[f64], dst: &mut [f64], amplitude: f64, rng: &mut R) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (s + uniform_symmetric(rng, amplitude)).clamp(0.0, 1.0);
    }
}

/// Independent Uniform(-amplitude, +amplitude) noise on every pixel, clipped
/// back to [0, 1].
pub fn random_perturb<R: Rng>(image: &Tensor, cfg: &ScreenConfig, rng: &mut R) -> Tensor {
    let mut out = image.clone();
    add_noise(image.values(), out.values_mut(), cfg.amplitude, rng);
    out
}

pub struct UniformNoise;

impl ScreeningAttack for UniformNoise {
    fn name(&self) -> &'static str {
        "uniform_noise"
    }

    fn perturb_into(
        &self,
        src: &[f64],
        dst: &mut [f64],
        _shape: &[usize],
        cfg: &ScreenConfig,
        rng: &mut ChaCha8Rng,
    ) {
        add_noise(src, dst, cfg.amplitude, rng);
    }
}
