//! Deterministic randomness.
//!
//! Every stochastic component draws from a ChaCha8 stream derived from one
//! master seed. Streams are keyed by a domain tag plus integer coordinates
//! (epoch, sample index, ...), so the draw a given sample sees depends only
//! on `(master seed, domain, coordinates)` — never on evaluation order.
//! Same seed, same build: identical runs, bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Master seed for a run. Cheap to copy; hand it around by value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub u64);

/// SplitMix64 finalizer. Used to fold domain tags and coordinates into a
/// stream key; the full mix guarantees that adjacent inputs give unrelated
/// outputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fold(acc: u64, word: u64) -> u64 {
    mix(acc ^ word)
}

impl Seed {
    /// Derive a stream for `domain` at integer coordinates `coords`.
    /// `lane("screen", &[epoch, idx])` is the per-sample screening stream.
    pub fn lane(self, domain: &str, coords: &[u64]) -> ChaCha8Rng {
        let mut acc = mix(self.0);
        for b in domain.as_bytes() {
            acc = fold(acc, u64::from(*b));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            let mut h = fold(acc, i as u64);
            for &c in coords {
                h = fold(h, c);
            }
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Seed for a derived run (repeat k uses master + k).
    pub fn offset(self, k: u64) -> Seed {
        Seed(self.0.wrapping_add(k))
    }
}

/// Uniform draw in `[-amplitude, amplitude]`.
pub fn uniform_symmetric<R: Rng>(rng: &mut R, amplitude: f64) -> f64 {
    (2.0 * rng.gen::<f64>() - 1.0) * amplitude
}

/// Uniform draw in `[lo, hi]`.
pub fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// `count` distinct indices from `0..n`, ascending. Partial Fisher-Yates on
/// an index table, then sorted; deterministic for a given stream state.
pub fn distinct_indices<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    let count = count.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = i + rng.gen_range(0..n - i);
        pool.swap(i, j);
    }
    let mut picked = pool[..count].to_vec();
    picked.sort_unstable();
    picked
}
