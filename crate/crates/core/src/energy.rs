//! Completion quality as a scalar: every patch touching the repaired
//! region is scored against its best full-source match, and the scores
//! are summed. Zero means each repaired patch recurs verbatim somewhere
//! in the untouched material.

use crate::error::Result;
use crate::raster::{Mask, PatchBox, Raster};
use crate::sat::MaskSat;
use crate::search::{PatchQuery, SearchContext};
use crate::threads;

/// Sum over all patch centers whose (clipped) patch intersects the
/// repaired region of the minimum SSD to any patch lying fully in the
/// original source region. `raster` must already be filled.
pub fn global_patch_energy(
    raster: &Raster,
    mask: &Mask,
    patch_size: usize,
    workers: usize,
) -> Result<f64> {
    crate::raster::validate_patch_size(patch_size)?;
    let (w, h) = (raster.width(), raster.height());
    let half = patch_size / 2;
    let mask_sat = MaskSat::build(mask);
    let centers: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask_sat.target_count(PatchBox::clipped(x, y, half, w, h)) > 0)
        .collect();

    // Patches compare completed content, so every in-image cell is a
    // valid query cell regardless of the mask.
    let no_mask = Mask::new(w, h)?;
    let ctx = SearchContext::new(raster, mask);
    let minima = threads::map_chunks(centers.len(), workers.max(1), |range| {
        let mut out = Vec::with_capacity(range.len());
        for &c in &centers[range] {
            let query = PatchQuery::new(raster, &no_mask, c, patch_size)?;
            out.push(ctx.sea(&query, None)?.ssd);
        }
        Ok::<_, crate::Error>(out)
    });
    let mut total = 0.0;
    for chunk in minima {
        for ssd in chunk? {
            total += ssd;
        }
    }
    Ok(total)
}

/// Peak signal-to-noise ratio over the given region, in dB against a
/// 255 peak. Identical content gives infinity.
pub fn psnr_over(a: &Raster, b: &Raster, region: &Mask) -> f64 {
    assert!(region.matches(a) && region.matches(b));
    assert_eq!(a.channels(), b.channels());
    let mut se = 0.0;
    let mut n = 0usize;
    for (x, y) in region.target_pixels() {
        for (u, v) in a.pixel(x, y).iter().zip(b.pixel(x, y)) {
            se += (u - v) * (u - v);
            n += 1;
        }
    }
    if n == 0 || se == 0.0 {
        return f64::INFINITY;
    }
    let mse = se / n as f64;
    10.0 * (255.0 * 255.0 / mse).log10()
}
