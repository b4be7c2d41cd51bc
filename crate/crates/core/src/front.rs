//! Fill-front geometry: which target pixels are ready to fill and how
//! urgent each one is. Priority is confidence times the isophote data
//! term, ties resolved by position elsewhere.

use crate::error::{Error, Result};
use crate::raster::{Mask, PatchBox, Raster};

/// Per-pixel reliability in [0, 1]. Known pixels start at 1, target
/// pixels at 0; filled pixels inherit the front confidence at fill time.
#[derive(Debug, Clone)]
pub struct ConfidenceField {
    width: usize,
    data: Vec<f64>,
}

impl ConfidenceField {
    pub fn init(mask: &Mask) -> Self {
        let width = mask.width();
        let data = (0..mask.height())
            .flat_map(|y| {
                (0..width).map(move |x| if mask.is_target(x, y) { 0.0 } else { 1.0 })
            })
            .collect();
        Self { width, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Assigns `value` to every listed pixel, leaving the rest untouched.
    pub fn fill(&mut self, pixels: &[(usize, usize)], value: f64) {
        debug_assert!((0.0..=1.0).contains(&value));
        for &(x, y) in pixels {
            self.data[y * self.width + x] = value;
        }
    }
}

/// Target pixels with at least one known 4-neighbor, in row-major order.
pub fn extract_front(mask: &Mask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let known = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h
            && !mask.is_target(x as usize, y as usize)
    };
    mask.target_pixels()
        .filter(|&(x, y)| {
            let (xi, yi) = (x as i64, y as i64);
            known(xi, yi - 1) || known(xi, yi + 1) || known(xi - 1, yi) || known(xi + 1, yi)
        })
        .collect()
}

/// Ratio of accumulated confidence to patch area, patch clipped to the
/// image. Target pixels contribute nothing.
pub fn confidence_term(
    p: (usize, usize),
    confidence: &ConfidenceField,
    mask: &Mask,
    patch_size: usize,
) -> Result<f64> {
    let half = crate::raster::validate_patch_size(patch_size)?;
    if p.0 >= mask.width() || p.1 >= mask.height() {
        return Err(Error::OutOfBounds { x: p.0, y: p.1 });
    }
    let b = PatchBox::clipped(p.0, p.1, half, mask.width(), mask.height());
    let sum: f64 = b
        .cells()
        .filter(|&(x, y)| !mask.is_target(x, y))
        .map(|(x, y)| confidence.get(x, y))
        .sum();
    Ok(sum / b.area() as f64)
}

/// Outward unit normal of the front at `p`, from the gradient of a 3x3
/// box-smoothed target indicator. Returns `None` when the gradient is
/// too small to orient (isolated target pixel).
pub fn front_normal(mask: &Mask, p: (usize, usize)) -> Option<(f64, f64)> {
    let (w, h) = (mask.width(), mask.height());
    // Pixels outside the image count as source, matching extract_front.
    let s = |x: i64, y: i64| -> f64 {
        let mut sum = 0.0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (qx, qy) = (x + dx, y + dy);
                if qx >= 0 && qy >= 0 && (qx as usize) < w && (qy as usize) < h
                    && mask.is_target(qx as usize, qy as usize)
                {
                    sum += 1.0;
                }
            }
        }
        sum / 9.0
    };
    let (x, y) = (p.0 as i64, p.1 as i64);
    let gx = match (p.0 > 0, p.0 + 1 < w) {
        (true, true) => (s(x + 1, y) - s(x - 1, y)) / 2.0,
        (false, true) => s(x + 1, y) - s(x, y),
        (true, false) => s(x, y) - s(x - 1, y),
        (false, false) => 0.0,
    };
    let gy = match (p.1 > 0, p.1 + 1 < h) {
        (true, true) => (s(x, y + 1) - s(x, y - 1)) / 2.0,
        (false, true) => s(x, y + 1) - s(x, y),
        (true, false) => s(x, y) - s(x, y - 1),
        (false, false) => 0.0,
    };
    let norm = gx.hypot(gy);
    // The smoothed indicator grows toward the target region; the front
    // normal points the other way, into known territory.
    (norm >= 1e-9).then(|| (-gx / norm, -gy / norm))
}

/// Strength of isophote flow across the front at `p`, normalized by the
/// intensity range: |isophote . normal| / 255. Gradients are taken at
/// the first known 4-neighbor using known samples only.
pub fn data_term(
    p: (usize, usize),
    gray: &Raster,
    mask: &Mask,
    normal: Option<(f64, f64)>,
) -> f64 {
    let Some((nx, ny)) = normal else {
        return 0.0;
    };
    let (w, h) = (gray.width(), gray.height());
    let known = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h
            && !mask.is_target(x as usize, y as usize)
    };
    let (px, py) = (p.0 as i64, p.1 as i64);
    let anchor = [(px, py - 1), (px, py + 1), (px - 1, py), (px + 1, py)]
        .into_iter()
        .find(|&(x, y)| known(x, y));
    let Some((ax, ay)) = anchor else {
        return 0.0;
    };
    let at = |x: i64, y: i64| gray.sample(x as usize, y as usize, 0);
    // Per axis, the steepest of the stencils whose operands are known.
    // A one-sided difference across a hard edge reaches the full step,
    // which the central average would halve.
    let steepest = |left: (i64, i64), right: (i64, i64)| -> f64 {
        let c = at(ax, ay);
        let mut best = 0.0f64;
        if known(left.0, left.1) && known(right.0, right.1) {
            best = (at(right.0, right.1) - at(left.0, left.1)) / 2.0;
        }
        if known(right.0, right.1) {
            let fwd = at(right.0, right.1) - c;
            if fwd.abs() > best.abs() {
                best = fwd;
            }
        }
        if known(left.0, left.1) {
            let bwd = c - at(left.0, left.1);
            if bwd.abs() > best.abs() {
                best = bwd;
            }
        }
        best
    };
    let gx = steepest((ax - 1, ay), (ax + 1, ay));
    let gy = steepest((ax, ay - 1), (ax, ay + 1));
    let (ix, iy) = (-gy, gx);
    (ix * nx + iy * ny).abs() / 255.0
}

/// Fill urgency: confidence times data term.
pub fn priority(
    p: (usize, usize),
    confidence: &ConfidenceField,
    mask: &Mask,
    gray: &Raster,
    patch_size: usize,
) -> Result<f64> {
    let c = confidence_term(p, confidence, mask, patch_size)?;
    let d = data_term(p, gray, mask, front_normal(mask, p));
    Ok(c * d)
}
