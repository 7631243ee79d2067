//! Seeded synthetic test images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MtvError, Result};
use crate::grid::PixelImage;

/// Piecewise-constant image made of axis-aligned polygons: a background
/// level overpainted with `regions` random rectangle unions (bars, L- and
/// T-shapes). Intensities lie in `[0.1, 0.9]`.
pub fn axis_aligned_image(rows: usize, cols: usize, regions: usize, seed: u64) -> Result<PixelImage> {
    if rows < 4 || cols < 4 {
        return Err(MtvError::InvalidParameter {
            name: "size",
            reason: format!("need at least 4×4 pixels, got {rows}×{cols}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = PixelImage::zeros(rows, cols)?.into_values();
    img.fill(rng.gen_range(0.1..0.4));
    for _ in 0..regions {
        let value = rng.gen_range(0.1..0.9);
        let parts = rng.gen_range(1..=3);
        // Later parts touch the first, so each region is one polygon.
        let (r0, r1) = span(&mut rng, rows);
        let (c0, c1) = span(&mut rng, cols);
        img.slice_mut(ndarray::s![r0..r1, c0..c1]).fill(value);
        for _ in 1..parts {
            let (pr0, pr1, pc0, pc1) = if rng.gen_bool(0.5) {
                let (a, b) = span(&mut rng, rows);
                let c = rng.gen_range(c0..c1);
                (a, b, c, (c + rng.gen_range(1..=cols / 4)).min(cols))
            } else {
                let (a, b) = span(&mut rng, cols);
                let r = rng.gen_range(r0..r1);
                (r, (r + rng.gen_range(1..=rows / 4)).min(rows), a, b)
            };
            img.slice_mut(ndarray::s![pr0..pr1, pc0..pc1]).fill(value);
        }
    }
    PixelImage::new(img)
}

fn span(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let len = rng.gen_range(n / 8..=n / 2).max(1);
    let start = rng.gen_range(0..=n - len);
    (start, start + len)
}

/// `count` images of size `side × side` with seeds `seed, seed+1, …`.
pub fn axis_aligned_corpus(count: usize, side: usize, seed: u64) -> Result<Vec<PixelImage>> {
    (0..count)
        .map(|i| axis_aligned_image(side, side, 4, seed + i as u64))
        .collect()
}

/// Random nonnegative image whose values are drawn from `levels` distinct
/// multiples of 1/8 (so level sets are exact), with some zero pixels.
pub fn random_levels_image(rows: usize, cols: usize, levels: usize, rng: &mut impl Rng) -> Result<PixelImage> {
    let levels = levels.max(1);
    let palette: Vec<f64> = (0..levels).map(|_| rng.gen_range(1..=16) as f64 / 8.0).collect();
    let data = (0..rows * cols)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                palette[rng.gen_range(0..levels)]
            }
        })
        .collect();
    PixelImage::from_vec(rows, cols, data)
}
