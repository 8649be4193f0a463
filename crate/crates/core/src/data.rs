//! Dataset ingestion: IDX (the classic handwritten-digit distribution
//! format), the 10-class 32x32 binary batch format, and a seeded synthetic
//! generator for machines without the real corpora on disk.
//!
//! All loaders normalize unsigned pixel bytes by 255, so byte 255 maps to
//! exactly 1.0 and every tensor entry lies in [0, 1].

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::tensor::Tensor;
use rand::Rng;
use std::path::Path;

/// A loaded dataset: images `[N, H, W, C]` with pixels in [0, 1], one class
/// index per image.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub name: String,
}

impl DatasetHandle {
    pub fn new(images: Tensor, labels: Vec<usize>, name: String) -> Result<DatasetHandle> {
        if images.num_samples() != labels.len() {
            return Err(Error::DataConsistency {
                images: images.num_samples(),
                labels: labels.len(),
            });
        }
        Ok(DatasetHandle {
            images,
            labels,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Smallest class count that covers every label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Per-sample shape `[H, W, C]`.
    pub fn sample_shape(&self) -> Vec<usize> {
        self.images.shape()[1..].to_vec()
    }
}

fn read_be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    let end = at + 4;
    if bytes.len() < end {
        return Err(Error::DataLength {
            path: path.display().to_string(),
            expected: end,
            actual: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[at],
        bytes[at + 1],
        bytes[at + 2],
        bytes[at + 3],
    ]))
}

fn pixels_from_bytes(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().map(|&b| b as f64 / 255.0).collect()
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Load an IDX image/label file pair. Image files carry big-endian magic
/// 0x00000803 and dimensions N, H, W; label files carry 0x00000801 and N.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DatasetHandle> {
    let img_bytes = std::fs::read(images_path)?;
    let magic = read_be_u32(&img_bytes, 0, images_path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::DataFormat(format!(
            "bad image magic 0x{magic:08x} in {} (want 0x{IDX_IMAGE_MAGIC:08x})",
            images_path.display()
        )));
    }
    let n = read_be_u32(&img_bytes, 4, images_path)? as usize;
    let h = read_be_u32(&img_bytes, 8, images_path)? as usize;
    let w = read_be_u32(&img_bytes, 12, images_path)? as usize;
    let expected = 16 + n * h * w;
    if img_bytes.len() != expected {
        return Err(Error::DataLength {
            path: images_path.display().to_string(),
            expected,
            actual: img_bytes.len(),
        });
    }

    let lab_bytes = std::fs::read(labels_path)?;
    let magic = read_be_u32(&lab_bytes, 0, labels_path)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::DataFormat(format!(
            "bad label magic 0x{magic:08x} in {} (want 0x{IDX_LABEL_MAGIC:08x})",
            labels_path.display()
        )));
    }
    let n_lab = read_be_u32(&lab_bytes, 4, labels_path)? as usize;
    let expected = 8 + n_lab;
    if lab_bytes.len() != expected {
        return Err(Error::DataLength {
            path: labels_path.display().to_string(),
            expected,
            actual: lab_bytes.len(),
        });
    }
    if n != n_lab {
        return Err(Error::DataConsistency {
            images: n,
            labels: n_lab,
        });
    }

    let images = Tensor::new(vec![n, h, w, 1], pixels_from_bytes(&img_bytes[16..]))?;
    let labels = lab_bytes[8..].iter().map(|&b| b as usize).collect();
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    DatasetHandle::new(images, labels, name)
}

/// Write an IDX image/label file pair; the loader's inverse, used for
/// fixtures and for materializing synthetic datasets.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    h: usize,
    w: usize,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let n = labels.len();
    if pixels.len() != n * h * w {
        return Err(Error::DataConsistency {
            images: pixels.len() / (h * w),
            labels: n,
        });
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(h as u32).to_be_bytes());
    img.extend_from_slice(&(w as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    std::fs::write(images_path, img)?;

    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    std::fs::write(labels_path, lab)?;
    Ok(())
}

const CIFAR_RECORD: usize = 3073;

/// Load 10-class binary batch files: each record is one label byte followed
/// by 3072 pixel bytes, stored plane-major (all red, all green, all blue,
/// each a 32x32 row-major plane); converted here to `[N, 32, 32, 3]`.
pub fn load_cifar_bin(paths: &[&Path]) -> Result<DatasetHandle> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path)?;
        if bytes.len() % CIFAR_RECORD != 0 || bytes.is_empty() {
            return Err(Error::DataLength {
                path: path.display().to_string(),
                expected: (bytes.len() / CIFAR_RECORD + 1) * CIFAR_RECORD,
                actual: bytes.len(),
            });
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(record[0] as usize);
            let planes = &record[1..];
            for y in 0..32 {
                for x in 0..32 {
                    for c in 0..3 {
                        images.push(planes[c * 1024 + y * 32 + x] as f64 / 255.0);
                    }
                }
            }
        }
    }
    let n = labels.len();
    let name = paths
        .first()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cifar".into());
    DatasetHandle::new(Tensor::new(vec![n, 32, 32, 3], images)?, labels, name)
}

/// Controls for the synthetic generator. Classes are saturated blobs
/// arranged on a ring; samples get geometry jitter, amplitude wobble, and
/// additive noise, and a fraction are drawn faint and blended toward
/// another class's position. Those faint blended samples sit near decision
/// boundaries and are the ones screening tends to flag, so trained prone
/// fractions land in a realistic band instead of at 0 or 1.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    /// Fraction of samples blended toward a second class.
    pub mix_fraction: f64,
    /// Blend weight range for the second class.
    pub mix_low: f64,
    pub mix_high: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 1024,
            height: 28,
            width: 28,
            classes: 10,
            mix_fraction: 0.3,
            mix_low: 0.3,
            mix_high: 0.45,
        }
    }
}

/// One sample's blob geometry: a saturated gaussian blob at a
/// class-specific point on a ring, with per-sample wobble in position,
/// angle, radius, width, and amplitude. The wobble is what keeps samples of
/// one class from sharing a pixel-exact silhouette, so a classifier has to
/// learn the shape rather than a fixed mask; the class signal itself stays
/// simple enough that clean features dominate training the way they do on
/// handwritten-digit data.
struct Blob {
    center: (f64, f64),
    amp: f64,
    sigma2: f64,
}

impl Blob {
    fn for_class(
        class: usize,
        classes: usize,
        h: usize,
        w: usize,
        jitter: (f64, f64, f64, f64, f64),
        amp: f64,
    ) -> Blob {
        let tau = std::f64::consts::TAU;
        let (dy, dx, dtheta, rscale, sscale) = jitter;
        let (cy, cx) = (h as f64 / 2.0 + dy, w as f64 / 2.0 + dx);
        let r = 0.3 * h.min(w) as f64 * rscale;
        let angle = tau * class as f64 / classes as f64 + dtheta;
        Blob {
            center: (cy + r * angle.sin(), cx + r * angle.cos()),
            amp,
            sigma2: (0.11 * h.min(w) as f64).powi(2) * 2.0 * sscale,
        }
    }

    fn at(&self, y: usize, x: usize) -> f64 {
        let (by, bx) = self.center;
        let d2 = (y as f64 - by).powi(2) + (x as f64 - bx).powi(2);
        self.amp * (-d2 / self.sigma2).exp()
    }
}

/// Generate the raw bytes of a synthetic dataset: balanced labels
/// (`i % classes`) and quantized pixels. Every per-sample draw comes from a
/// lane keyed by the sample index, so the output is a pure function of
/// (seed, config).
pub fn synthetic_bytes(seed: Seed, cfg: &SyntheticConfig) -> (Vec<u8>, Vec<u8>) {
    let (h, w) = (cfg.height, cfg.width);
    let mut pixels = Vec::with_capacity(cfg.n * h * w);
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let class = i % cfg.classes;
        labels.push(class as u8);
        let mut rng = seed.lane("data", &[i as u64]);
        let jitter = (
            rng.gen_range(-1.5..1.5), // dy
            rng.gen_range(-1.5..1.5), // dx
            rng.gen_range(-0.1..0.1), // ring angle
            rng.gen_range(0.9..1.1),  // ring radius
            rng.gen_range(0.8..1.2),  // blob width
        );
        let mixed = rng.gen_range(0.0..1.0) < cfg.mix_fraction;
        // blended samples are drawn bright on purpose: the blend is what
        // contests the label (a second blob glows at another class's
        // position), while the high contrast keeps the true class winnable
        // under bounded perturbation. That combination — contested but
        // defendable — is what screening should flag and adversarial
        // training can actually fix, mirroring how ambiguous-but-legible
        // samples behave in handwritten-digit data.
        let amp = if mixed {
            rng.gen_range(0.8..1.0)
        } else {
            rng.gen_range(0.6..1.0)
        };
        let (other, beta) = if mixed {
            let step = 1 + rng.gen_range(0..cfg.classes as u64 - 1) as usize;
            (
                (class + step) % cfg.classes,
                rng.gen_range(cfg.mix_low..cfg.mix_high),
            )
        } else {
            (0, 0.0)
        };
        // the blend partner shares this sample's geometry draws, so a mixed
        // sample reads as one coherent smear between two class positions
        // rather than two overlaid images
        let own = Blob::for_class(class, cfg.classes, h, w, jitter, amp);
        let alt = Blob::for_class(other, cfg.classes, h, w, jitter, amp);
        for y in 0..h {
            for x in 0..w {
                let base = (1.0 - beta) * own.at(y, x) + beta * alt.at(y, x);
                // saturating gain: blob interiors plateau at full intensity
                // over a dark background, so the class signal survives
                // bounded pixel perturbations instead of living entirely in
                // fragile mid-range values
                let inked = ((base - 0.2) * 2.5).clamp(0.0, 1.0);
                let noisy = inked + rng.gen_range(0.0..0.1);
                pixels.push((noisy.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    (pixels, labels)
}

/// Generate a synthetic dataset directly as a handle, through the same
/// byte-quantization the file loaders use.
pub fn synthetic_dataset(seed: Seed, cfg: &SyntheticConfig) -> Result<DatasetHandle> {
    let (pixels, labels) = synthetic_bytes(seed, cfg);
    let images = Tensor::new(
        vec![cfg.n, cfg.height, cfg.width, 1],
        pixels_from_bytes(&pixels),
    )?;
    DatasetHandle::new(
        images,
        labels.into_iter().map(|b| b as usize).collect(),
        "synthetic".into(),
    )
}
