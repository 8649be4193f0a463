//! Grid-line screening attack: overwrite a few random rows and columns.

use crate::attack::{ScreenConfig, ScreeningAttack};
use crate::rng::distinct_indices;
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;

/// Number of lines drawn across a spatial dimension of size `dim`: a fixed
/// fraction of the dimension, capped, but never zero for images that actually
/// have that dimension (so small images like 28x28 still get one line).
pub fn grid_count(dim: usize, cfg: &ScreenConfig) -> usize {
    if dim < 2 {
        return 0;
    }
    let c = ((cfg.grid_fraction * dim as f64).floor() as usize).min(cfg.grid_line_cap);
    if c == 0 {
        1
    } else {
        c
    }
}

fn paint(src: &[f64], dst: &mut [f64], shape: &[usize], cfg: &ScreenConfig, rng: &mut ChaCha8Rng) {
    dst.copy_from_slice(src);
    // spatial structure is [h, w] or [h, w, c]; anything flatter has no rows
    // or columns to draw on
    if shape.len() < 2 {
        return;
    }
    let (h, w) = (shape[0], shape[1]);
    let c: usize = shape[2..].iter().product();
    // rows are drawn before columns; both index sets come from the same
    // stream, so the full pattern is a pure function of the stream state
    let rows = distinct_indices(rng, h, grid_count(h, cfg));
    let cols = distinct_indices(rng, w, grid_count(w, cfg));
    for &r in &rows {
        dst[r * w * c..(r + 1) * w * c].fill(cfg.grid_value);
    }
    for &col in &cols {
        for r in 0..h {
            let at = (r * w + col) * c;
            dst[at..at + c].fill(cfg.grid_value);
        }
    }
}

/// Overwrite `grid_count` random rows and columns of the image with
/// `cfg.grid_value`.
pub fn grid_lines(image: &Tensor, cfg: &ScreenConfig, rng: &mut ChaCha8Rng) -> Tensor {
    let mut out = image.clone();
    let shape = image.shape().to_vec();
    paint(image.values(), out.values_mut(), &shape, cfg, rng);
    out
}

pub struct GridLines;

impl ScreeningAttack for GridLines {
    fn name(&self) -> &'static str {
        "grid_lines"
    }

    fn perturb_into(
        &self,
        src: &[f64],
        dst: &mut [f64],
        shape: &[usize],
        cfg: &ScreenConfig,
        rng: &mut ChaCha8Rng,
    ) {
        paint(src, dst, shape, cfg, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    #[test]
    fn line_count_follows_the_capped_fraction_rule() {
        let cfg = ScreenConfig::default();
        assert_eq!(grid_count(28, &cfg), 1); // floor(1.4) = 1
        assert_eq!(grid_count(224, &cfg), 5); // floor(11.2) capped at 5
        assert_eq!(grid_count(100, &cfg), 5); // exactly at the cap
        assert_eq!(grid_count(10, &cfg), 1); // floor(0.5) = 0, bumped to 1
        assert_eq!(grid_count(2, &cfg), 1);
        assert_eq!(grid_count(1, &cfg), 0); // too thin for a line
        assert_eq!(grid_count(0, &cfg), 0);
    }

    #[test]
    fn one_row_and_one_column_touch_55_pixels_of_a_28x28_image() {
        let img = Tensor::zeros(vec![28, 28, 1]);
        let cfg = ScreenConfig::default();
        let out = grid_lines(&img, &cfg, &mut Seed(3).lane("screen", &[0, 0]));
        let lit = out.values().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(lit, 28 + 28 - 1); // the row and column share one pixel
    }

    #[test]
    fn five_lines_each_way_on_a_large_rgb_image() {
        let img = Tensor::zeros(vec![224, 224, 3]);
        let cfg = ScreenConfig::default();
        let out = grid_lines(&img, &cfg, &mut Seed(4).lane("screen", &[0, 1]));
        let lit = out.values().iter().filter(|&&v| v == 1.0).count();
        // 5 rows + 5 columns minus the 25 shared crossings, all 3 channels
        assert_eq!(lit, (5 * 224 + 5 * 224 - 25) * 3);
    }

    #[test]
    fn all_white_images_are_fixed_points() {
        let img = Tensor::new(vec![28, 28], vec![1.0; 28 * 28]).unwrap();
        let cfg = ScreenConfig::default();
        let out = grid_lines(&img, &cfg, &mut Seed(5).lane("screen", &[2, 9]));
        assert_eq!(out.values(), img.values());
    }

    #[test]
    fn flat_vectors_have_no_lines_to_draw() {
        let img = Tensor::new(vec![6], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let out = grid_lines(
            &img,
            &ScreenConfig::default(),
            &mut Seed(6).lane("screen", &[0, 0]),
        );
        assert_eq!(out.values(), img.values());
    }

    #[test]
    fn same_stream_draws_the_same_lines() {
        let img = Tensor::zeros(vec![28, 28, 1]);
        let cfg = ScreenConfig::default();
        let a = grid_lines(&img, &cfg, &mut Seed(8).lane("screen", &[1, 4]));
        let b = grid_lines(&img, &cfg, &mut Seed(8).lane("screen", &[1, 4]));
        assert_eq!(a.values(), b.values());
    }
}
