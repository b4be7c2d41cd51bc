//! Deterministic synthetic images for tests and the benchmark harness.
//! Every generator is pure in its arguments, so the repository ships no
//! binary assets. All fixtures hold integer sample values; integer
//! rasters keep summed-area arithmetic exact (see `search`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{Mask, Raster};

/// Tiling of a 5x5 block whose 25 cells are pairwise distinct
/// (10, 20, ..., 250). Any single known cell pins the tile phase.
pub fn periodic_tile(width: usize, height: usize) -> Raster {
    Raster::from_fn(width, height, 1, |x, y, _| {
        (10 * ((y % 5) * 5 + (x % 5) + 1)) as f64
    })
    .expect("fixture dimensions are positive")
}

/// Two color textures split at the vertical midline: cool horizontal
/// banding on the left, warm vertical banding on the right, plus seeded
/// integer jitter. Suits both matching benchmarks and color-layer
/// separation.
pub fn two_texture(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Raster::from_fn(width, height, 3, |x, y, c| {
        let jitter = rng.random_range(-12..=12) as f64;
        let base = if x < width / 2 {
            let wave = 40.0 * (y as f64 * std::f64::consts::TAU / 13.0).sin();
            [70.0, 95.0, 150.0][c] + wave
        } else {
            let wave = 40.0 * (x as f64 * std::f64::consts::TAU / 11.0).sin();
            [190.0, 150.0, 60.0][c] + wave
        };
        (base + jitter).round().clamp(0.0, 255.0)
    })
    .expect("fixture dimensions are positive")
}

/// Two flat halves at `low` (left) and `high` (right) with seeded
/// Gaussian noise, rounded to integers and clamped.
pub fn two_constant(
    width: usize,
    height: usize,
    low: f64,
    high: f64,
    sigma: f64,
    seed: u64,
) -> Raster {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
    Raster::from_fn(width, height, 1, |x, _, _| {
        let level = if x < width / 2 { low } else { high };
        (level + noise.sample(&mut rng)).round().clamp(0.0, 255.0)
    })
    .expect("fixture dimensions are positive")
}

/// The two flat levels of `two_constant` without noise, for label
/// accuracy checks.
pub fn two_constant_truth(width: usize, height: usize, low: f64, high: f64) -> Raster {
    Raster::from_fn(width, height, 1, |x, _, _| {
        if x < width / 2 {
            low
        } else {
            high
        }
    })
    .expect("fixture dimensions are positive")
}

/// Eight flat blocks in a 4x2 layout colored with the corners of the
/// [30, 220]^3 cube; pairwise color distance is at least 190.
pub fn palette8(width: usize, height: usize) -> Raster {
    Raster::from_fn(width, height, 3, |x, y, c| {
        let bx = (x * 4 / width).min(3);
        let by = (y * 2 / height).min(1);
        let k = by * 4 + bx;
        if k >> c & 1 == 1 {
            220.0
        } else {
            30.0
        }
    })
    .expect("fixture dimensions are positive")
}

/// Centered square covering approximately `frac` of the image.
pub fn block_mask(width: usize, height: usize, frac: f64) -> Mask {
    let side = ((frac * (width * height) as f64).sqrt().round() as usize)
        .clamp(1, width.min(height));
    let x0 = (width - side) / 2;
    let y0 = (height - side) / 2;
    Mask::from_fn(width, height, |x, y| {
        (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
    })
    .expect("fixture dimensions are positive")
}

/// Uniform integer noise in [0, 255].
pub fn random_raster(width: usize, height: usize, channels: usize, seed: u64) -> Raster {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Raster::from_fn(width, height, channels, |_, _, _| {
        rng.random_range(0..=255) as f64
    })
    .expect("fixture dimensions are positive")
}

/// Union of random rectangles grown until at least `frac` of the pixels
/// are target. Rectangle sides stay small so the region is irregular.
pub fn scatter_mask(width: usize, height: usize, frac: f64, seed: u64) -> Mask {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mask = Mask::new(width, height).expect("fixture dimensions are positive");
    let want = (frac * (width * height) as f64).round() as usize;
    while mask.target_count() < want {
        let rw = rng.random_range(3..=18.min(width));
        let rh = rng.random_range(3..=18.min(height));
        let rx = rng.random_range(0..=width - rw);
        let ry = rng.random_range(0..=height - rh);
        for y in ry..ry + rh {
            for x in rx..rx + rw {
                mask.set(x, y, true);
            }
        }
    }
    mask
}
