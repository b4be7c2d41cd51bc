//! Edge-preserving smoothing: each output pixel is a normalized mean of
//! its window, weighted by spatial and range Gaussians. Computed in
//! difference form (center plus weighted deviations) so a constant
//! image passes through bit-exact.

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilateralParams {
    pub sigma_s: f64,
    pub sigma_r: f64,
    pub radius: usize,
}

impl BilateralParams {
    /// Window radius defaults to ceil(3 sigma_s), where the spatial
    /// Gaussian has decayed below 2%.
    pub fn new(sigma_s: f64, sigma_r: f64) -> Result<Self> {
        let radius = (3.0 * sigma_s.abs()).ceil() as usize;
        Self::with_radius(sigma_s, sigma_r, radius.max(1))
    }

    pub fn with_radius(sigma_s: f64, sigma_r: f64, radius: usize) -> Result<Self> {
        if !(sigma_s > 0.0) || !(sigma_r > 0.0) {
            return Err(Error::InvalidParam(format!(
                "bilateral scales must be positive, got sigma_s={sigma_s} sigma_r={sigma_r}"
            )));
        }
        if radius < 1 {
            return Err(Error::InvalidParam("bilateral radius must be >= 1".into()));
        }
        Ok(Self {
            sigma_s,
            sigma_r,
            radius,
        })
    }
}

pub fn bilateral_filter(raster: &Raster, params: &BilateralParams) -> Result<Raster> {
    filter_impl(raster, None, params)
}

/// Variant for partially known images: target pixels neither contribute
/// to nor receive smoothing.
pub fn bilateral_filter_masked(
    raster: &Raster,
    mask: &Mask,
    params: &BilateralParams,
) -> Result<Raster> {
    if !mask.matches(raster) {
        return Err(Error::InvalidParam(
            "mask dimensions differ from image".into(),
        ));
    }
    filter_impl(raster, Some(mask), params)
}

fn filter_impl(raster: &Raster, mask: Option<&Mask>, params: &BilateralParams) -> Result<Raster> {
    BilateralParams::with_radius(params.sigma_s, params.sigma_r, params.radius)?;
    let (w, h, ch) = (raster.width(), raster.height(), raster.channels());
    let r = params.radius as i64;
    let inv2ss = 1.0 / (2.0 * params.sigma_s * params.sigma_s);
    let inv2sr = 1.0 / (2.0 * params.sigma_r * params.sigma_r);

    let side = (2 * params.radius + 1) as i64;
    let spatial: Vec<f64> = (0..side * side)
        .map(|i| {
            let dx = (i % side - r) as f64;
            let dy = (i / side - r) as f64;
            (-(dx * dx + dy * dy) * inv2ss).exp()
        })
        .collect();

    let mut diffs = vec![0.0f64; ch];
    let mut out = raster.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.is_some_and(|m| m.is_target(x, y)) {
                continue;
            }
            let center = raster.pixel(x, y);
            let mut num = [0.0f64; 3];
            let mut den = 0.0;
            let y0 = (y as i64 - r).max(0);
            let y1 = (y as i64 + r).min(h as i64 - 1);
            let x0 = (x as i64 - r).max(0);
            let x1 = (x as i64 + r).min(w as i64 - 1);
            for qy in y0..=y1 {
                for qx in x0..=x1 {
                    if mask.is_some_and(|m| m.is_target(qx as usize, qy as usize)) {
                        continue;
                    }
                    let q = raster.pixel(qx as usize, qy as usize);
                    let mut d2 = 0.0;
                    for c in 0..ch {
                        diffs[c] = q[c] - center[c];
                        d2 += diffs[c] * diffs[c];
                    }
                    let si = (qy - y as i64 + r) * side + (qx - x as i64 + r);
                    let wgt = spatial[si as usize] * (-d2 * inv2sr).exp();
                    den += wgt;
                    for c in 0..ch {
                        num[c] += wgt * diffs[c];
                    }
                }
            }
            for c in 0..ch {
                let v = (center[c] + num[c] / den).clamp(0.0, 255.0);
                out.set_sample(x, y, c, v);
            }
        }
    }
    Ok(out)
}
