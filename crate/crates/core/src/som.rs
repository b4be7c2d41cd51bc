//! Color-space layer separation: a small self-organizing map is
//! trained on the intact pixels, every known pixel is assigned to its
//! best-matching neuron, and damaged pixels are routed to the layer
//! that dominates their neighborhood. The layered fill then restricts
//! exemplar candidates to the front pixel's own layer.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::engine::{inpaint_restricted, FillReport, FillStep, InpaintParams, Restriction};
use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

pub const UNASSIGNED: u16 = u16::MAX;

/// Rectangular neuron grid over RGB space. Weights live in [0,255]^3;
/// gray inputs are replicated across the three knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SomGrid {
    rows: usize,
    cols: usize,
    weights: Vec<[f64; 3]>,
    epochs_trained: usize,
    lr0: f64,
    radius0: f64,
}

impl SomGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    /// Best-matching unit by squared RGB distance; equal distances go
    /// to the lowest row-major index.
    pub fn bmu(&self, v: [f64; 3]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.weights.iter().enumerate() {
            let d = dist2(*w, v);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    #[cfg(test)]
    fn from_weights(rows: usize, cols: usize, weights: Vec<[f64; 3]>) -> Self {
        assert_eq!(weights.len(), rows * cols);
        SomGrid {
            rows,
            cols,
            weights,
            epochs_trained: 0,
            lr0: 0.0,
            radius0: 0.0,
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        let d = a[c] - b[c];
        s += d * d;
    }
    s
}

fn pixel_vec(raster: &Raster, x: usize, y: usize) -> [f64; 3] {
    let p = raster.pixel(x, y);
    if p.len() == 3 {
        [p[0], p[1], p[2]]
    } else {
        [p[0], p[0], p[0]]
    }
}

fn known_samples(raster: &Raster, mask: &Mask) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(raster.width() * raster.height() - mask.target_count());
    for y in 0..raster.height() {
        for x in 0..raster.width() {
            if !mask.is_target(x, y) {
                out.push(pixel_vec(raster, x, y));
            }
        }
    }
    out
}

/// lr decays to lr0/100 and the neighborhood radius to 0.5 over the
/// epoch range; a single epoch runs at the initial values.
fn schedule(epochs: usize, epoch: usize, lr0: f64, radius0: f64) -> (f64, f64) {
    let t = if epochs > 1 {
        epoch as f64 / (epochs - 1) as f64
    } else {
        0.0
    };
    let lr = lr0 * 0.01f64.powf(t);
    let radius = if radius0 <= 0.5 {
        radius0
    } else {
        radius0 * (0.5 / radius0).powf(t)
    };
    (lr, radius)
}

/// One pass over the samples in the given order. Neurons farther than
/// `radius` on the grid are left alone; the rest step toward the sample
/// with a Gaussian falloff, which keeps every weight inside the convex
/// hull of its history.
fn run_epoch(grid: &mut SomGrid, samples: &[[f64; 3]], order: &[usize], lr: f64, radius: f64) {
    let sigma2 = 2.0 * radius * radius;
    for &s in order {
        let v = samples[s];
        let b = grid.bmu(v);
        let (br, bc) = (b / grid.cols, b % grid.cols);
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let dr = r as f64 - br as f64;
                let dc = c as f64 - bc as f64;
                let d2 = dr * dr + dc * dc;
                if d2.sqrt() > radius {
                    continue;
                }
                let h = if sigma2 > 0.0 { (-d2 / sigma2).exp() } else { 1.0 };
                let w = &mut grid.weights[r * grid.cols + c];
                for k in 0..3 {
                    w[k] += lr * h * (v[k] - w[k]);
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train_som(
    raster: &Raster,
    mask: &Mask,
    rows: usize,
    cols: usize,
    epochs: usize,
    lr0: f64,
    radius0: f64,
    seed: u64,
) -> Result<SomGrid> {
    let size = rows * cols;
    if size > 255 {
        return Err(Error::GridTooLarge { size });
    }
    if size < 2 {
        return Err(Error::InvalidParam(
            "neuron grid needs at least 2 cells".into(),
        ));
    }
    if epochs == 0 {
        return Err(Error::InvalidParam("epochs must be at least 1".into()));
    }
    if !(lr0 > 0.0 && lr0 <= 1.0) {
        return Err(Error::InvalidParam(
            "learning rate must be in (0, 1]".into(),
        ));
    }
    if !(radius0 > 0.0) {
        return Err(Error::InvalidParam("radius must be positive".into()));
    }
    if !mask.matches(raster) {
        return Err(Error::InvalidParam(
            "mask dimensions differ from image".into(),
        ));
    }
    let samples = known_samples(raster, mask);
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let weights = (0..size)
        .map(|_| [(); 3].map(|_| rng.random_range(0.0..=255.0)))
        .collect();
    let mut grid = SomGrid {
        rows,
        cols,
        weights,
        epochs_trained: 0,
        lr0,
        radius0,
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let (lr, radius) = schedule(epochs, epoch, lr0, radius0);
        run_epoch(&mut grid, &samples, &order, lr, radius);
        grid.epochs_trained += 1;
    }
    Ok(grid)
}

/// Mean RGB distance from known pixels to their best-matching neuron.
pub fn mean_bmu_distance(raster: &Raster, mask: &Mask, grid: &SomGrid) -> f64 {
    let samples = known_samples(raster, mask);
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|&v| dist2(grid.weights[grid.bmu(v)], v).sqrt())
        .sum();
    total / samples.len() as f64
}

/// Per-pixel neuron index for known pixels; damaged pixels carry
/// `UNASSIGNED`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMap {
    width: usize,
    height: usize,
    index: Vec<u16>,
    layers: usize,
}

impl LayerMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layer_count(&self) -> usize {
        self.layers
    }

    pub fn layer(&self, x: usize, y: usize) -> Option<u16> {
        let v = self.index[y * self.width + x];
        (v != UNASSIGNED).then_some(v)
    }

    /// Known pixels per neuron. Zero-hit neurons own empty layers.
    pub fn hit_counts(&self) -> Vec<u64> {
        let mut hits = vec![0u64; self.layers];
        for &v in &self.index {
            if v != UNASSIGNED {
                hits[v as usize] += 1;
            }
        }
        hits
    }

    #[cfg(test)]
    fn from_indices(width: usize, height: usize, layers: usize, index: Vec<u16>) -> Self {
        assert_eq!(index.len(), width * height);
        LayerMap {
            width,
            height,
            index,
            layers,
        }
    }
}

pub fn assign_layers(raster: &Raster, mask: &Mask, grid: &SomGrid) -> LayerMap {
    let (w, h) = (raster.width(), raster.height());
    let mut index = vec![UNASSIGNED; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask.is_target(x, y) {
                index[y * w + x] = grid.bmu(pixel_vec(raster, x, y)) as u16;
            }
        }
    }
    LayerMap {
        width: w,
        height: h,
        index,
        layers: grid.len(),
    }
}

/// Majority layer among known pixels within the Chebyshev window,
/// lowest index on ties. An empty window doubles the radius until a
/// known pixel appears.
fn route_one(map: &LayerMap, mask: &Mask, x: usize, y: usize, radius: usize) -> u16 {
    let (w, h) = (map.width, map.height);
    let mut r = radius.max(1);
    loop {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r).min(w - 1);
        let y1 = (y + r).min(h - 1);
        let mut counts = vec![0u64; map.layers];
        let mut any = false;
        for qy in y0..=y1 {
            for qx in x0..=x1 {
                if mask.is_target(qx, qy) {
                    continue;
                }
                if let Some(k) = map.layer(qx, qy) {
                    counts[k as usize] += 1;
                    any = true;
                }
            }
        }
        if any {
            let (best, _) = counts
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
                .expect("layer count is nonzero");
            return best as u16;
        }
        r *= 2;
    }
}

/// Splits the damaged region into per-layer masks that partition it.
pub fn route_damaged(map: &LayerMap, mask: &Mask, radius: usize) -> Result<Vec<Mask>> {
    if mask.target_count() == map.width * map.height {
        return Err(Error::NoKnownContext);
    }
    let mut out: Vec<Mask> = (0..map.layers)
        .map(|_| Mask::new(map.width, map.height))
        .collect::<Result<_>>()?;
    for (x, y) in mask.target_pixels() {
        let k = route_one(map, mask, x, y, radius);
        out[k as usize].set(x, y, true);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Initial neighborhood radius; `None` means max(rows, cols)/2.
    pub radius0: Option<f64>,
    pub seed: u64,
    /// Starting Chebyshev radius for routing damaged pixels.
    pub route_radius: usize,
}

impl Default for LayerParams {
    fn default() -> Self {
        LayerParams {
            rows: 4,
            cols: 4,
            epochs: 20,
            lr0: 0.5,
            radius0: None,
            seed: 0,
            route_radius: 3,
        }
    }
}

impl LayerParams {
    fn radius0(&self) -> f64 {
        self.radius0
            .unwrap_or_else(|| (self.rows.max(self.cols) as f64) / 2.0)
    }
}

/// Layer-aware fill: exemplar candidates must share the front pixel's
/// routed layer. A layer too thin to offer any full patch falls back to
/// the open search for that step and is counted in the report.
pub fn inpaint_by_layers(
    raster: &Raster,
    mask: &Mask,
    layers: &LayerParams,
    params: &InpaintParams,
) -> Result<(Raster, FillReport)> {
    layered_fill(raster, mask, layers, params, None)
}

pub(crate) fn layered_fill(
    raster: &Raster,
    mask: &Mask,
    layers: &LayerParams,
    params: &InpaintParams,
    audit: Option<&mut Vec<FillStep>>,
) -> Result<(Raster, FillReport)> {
    if layers.rows * layers.cols == 0 {
        return Err(Error::InvalidParam("neuron grid must be nonempty".into()));
    }
    // A single layer cannot restrict anything.
    if layers.rows * layers.cols == 1 {
        return inpaint_restricted(raster, mask, params, None, audit);
    }
    let grid = train_som(
        raster,
        mask,
        layers.rows,
        layers.cols,
        layers.epochs,
        layers.lr0,
        layers.radius0(),
        layers.seed,
    )?;
    let map = assign_layers(raster, mask, &grid);
    let routed = route_damaged(&map, mask, layers.route_radius)?;

    let (w, h) = (raster.width(), raster.height());
    let mut target_layer = vec![UNASSIGNED; w * h];
    for (k, m) in routed.iter().enumerate() {
        for (x, y) in m.target_pixels() {
            target_layer[y * w + x] = k as u16;
        }
    }
    let class_of = move |x: usize, y: usize| {
        let v = target_layer[y * w + x];
        (v != UNASSIGNED).then_some(v)
    };
    let admits = |k: u16, cx: usize, cy: usize| map.layer(cx, cy) == Some(k);
    let restriction = Restriction {
        class_of: &class_of,
        admits: &admits,
    };
    inpaint_restricted(raster, mask, params, Some(&restriction), audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::inpaint;
    use crate::fixtures;

    fn train_default(raster: &Raster, mask: &Mask, rows: usize, cols: usize) -> SomGrid {
        train_som(raster, mask, rows, cols, 20, 0.5, 2.0, 0).unwrap()
    }

    fn no_mask(w: usize, h: usize) -> Mask {
        Mask::new(w, h).unwrap()
    }

    #[test]
    fn oversized_grid_and_empty_training_set_are_rejected() {
        let img = fixtures::palette8(16, 8);
        let err = train_som(&img, &no_mask(16, 8), 16, 16, 5, 0.5, 2.0, 0).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { size: 256 }));
        let all = Mask::from_fn(16, 8, |_, _| true).unwrap();
        assert!(matches!(
            train_som(&img, &all, 2, 2, 5, 0.5, 2.0, 0),
            Err(Error::EmptyTrainingSet)
        ));
        assert!(train_som(&img, &no_mask(16, 8), 1, 1, 5, 0.5, 2.0, 0).is_err());
    }

    #[test]
    fn single_color_image_pulls_every_weight_to_that_color() {
        let img = Raster::from_fn(8, 8, 3, |_, _, c| [10.0, 200.0, 60.0][c]).unwrap();
        let grid = train_som(&img, &no_mask(8, 8), 2, 2, 30, 0.5, 2.0, 0).unwrap();
        for w in grid.weights() {
            let d = dist2(*w, [10.0, 200.0, 60.0]).sqrt();
            assert!(d < 1.0, "weight {w:?} is {d} away");
        }
        assert!(mean_bmu_distance(&img, &no_mask(8, 8), &grid) < 1e-3);
    }

    #[test]
    fn well_separated_palette_is_quantized_tightly() {
        let img = fixtures::palette8(32, 16);
        let grid = train_default(&img, &no_mask(32, 16), 4, 2);
        let qe = mean_bmu_distance(&img, &no_mask(32, 16), &grid);
        assert!(qe < 1.0, "quantization error {qe}");
    }

    #[test]
    fn masked_pixels_never_reach_training() {
        let clean = fixtures::palette8(24, 16);
        let mask = fixtures::block_mask(24, 16, 0.15);
        let mut vandalized = clean.clone();
        for (x, y) in mask.target_pixels() {
            vandalized.set_pixel(x, y, &[255.0, 0.0, 137.0]);
        }
        let a = train_default(&clean, &mask, 4, 2);
        let b = train_default(&vandalized, &mask, 4, 2);
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn same_seed_reproduces_the_grid_exactly() {
        let img = fixtures::two_texture(30, 20, 4);
        let mask = fixtures::scatter_mask(30, 20, 0.1, 5);
        let a = train_som(&img, &mask, 3, 3, 10, 0.4, 1.5, 42).unwrap();
        let b = train_som(&img, &mask, 3, 3, 10, 0.4, 1.5, 42).unwrap();
        assert_eq!(a, b);
        let c = train_som(&img, &mask, 3, 3, 10, 0.4, 1.5, 43).unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn weights_stay_inside_the_color_cube() {
        let img = fixtures::random_raster(20, 20, 3, 9);
        let grid = train_default(&img, &no_mask(20, 20), 4, 4);
        for w in grid.weights() {
            for &v in w {
                assert!((0.0..=255.0).contains(&v) && v.is_finite());
            }
        }
    }

    // Early epochs can raise the quantization error while the wide
    // neighborhood is still dragging neurons between clusters, so the
    // monotone guarantee starts where the radius drops below 1 and
    // every update touches the winner alone. Net improvement over the
    // whole run is asserted unconditionally.
    #[test]
    fn quantization_error_settles_over_epochs_on_a_fixed_order() {
        let img = fixtures::palette8(32, 16);
        let samples = known_samples(&img, &no_mask(32, 16));
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(991));
        let epochs = 20;
        let (lr0, radius0) = (0.5, 2.0);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut grid = SomGrid {
            rows: 4,
            cols: 2,
            weights: (0..8)
                .map(|_| [(); 3].map(|_| rng.random_range(0.0..=255.0)))
                .collect(),
            epochs_trained: 0,
            lr0,
            radius0,
        };
        let qe = |g: &SomGrid| {
            samples
                .iter()
                .map(|&v| dist2(g.weights[g.bmu(v)], v).sqrt())
                .sum::<f64>()
                / samples.len() as f64
        };
        let mut trace = Vec::new();
        for e in 0..epochs {
            let (lr, radius) = schedule(epochs, e, lr0, radius0);
            run_epoch(&mut grid, &samples, &order, lr, radius);
            trace.push((radius, qe(&grid)));
        }
        let refine = trace.iter().position(|&(r, _)| r < 1.0).unwrap();
        for w in trace[refine..].windows(2) {
            assert!(
                w[1].1 <= w[0].1 + 1e-9,
                "refinement epoch rose: {} -> {}",
                w[0].1,
                w[1].1
            );
        }
        let first = trace[0].1;
        let last = trace[epochs - 1].1;
        assert!(last < first * 0.01, "no net improvement: {first} -> {last}");
    }

    #[test]
    fn assignment_matches_a_direct_argmin_scan() {
        let img = fixtures::two_texture(26, 18, 8);
        let mask = fixtures::scatter_mask(26, 18, 0.12, 2);
        let grid = train_default(&img, &mask, 3, 2);
        let map = assign_layers(&img, &mask, &grid);
        for y in 0..18 {
            for x in 0..26 {
                if mask.is_target(x, y) {
                    assert_eq!(map.layer(x, y), None);
                    continue;
                }
                let v = pixel_vec(&img, x, y);
                let mut best = (f64::INFINITY, 0usize);
                for (i, w) in grid.weights().iter().enumerate() {
                    let d = dist2(*w, v);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                assert_eq!(map.layer(x, y), Some(best.1 as u16));
            }
        }
        let hits = map.hit_counts();
        assert_eq!(
            hits.iter().sum::<u64>() as usize,
            26 * 18 - mask.target_count()
        );
    }

    #[test]
    fn equidistant_bmu_takes_the_lowest_index() {
        let w = [50.0, 50.0, 50.0];
        let grid = SomGrid::from_weights(2, 2, vec![w, w, [0.0; 3], w]);
        assert_eq!(grid.bmu([50.0, 50.0, 50.0]), 0);
        assert_eq!(grid.bmu([1.0, 1.0, 1.0]), 2);
    }

    #[test]
    fn routing_follows_the_local_majority() {
        // 3x3, center damaged: four layer-1 and four layer-2 neighbors.
        let mut idx = vec![1u16, 1, 1, 1, UNASSIGNED, 2, 2, 2, 2];
        let map = LayerMap::from_indices(3, 3, 4, idx.clone());
        let mask = Mask::from_fn(3, 3, |x, y| (x, y) == (1, 1)).unwrap();
        let routed = route_damaged(&map, &mask, 1).unwrap();
        assert!(routed[1].is_target(1, 1), "tie must go to the lower layer");

        idx[3] = 2;
        let map = LayerMap::from_indices(3, 3, 4, idx);
        let routed = route_damaged(&map, &mask, 1).unwrap();
        assert!(routed[2].is_target(1, 1));
    }

    #[test]
    fn routing_widens_until_it_finds_context() {
        // Known material only in the far corner.
        let mask = Mask::from_fn(9, 9, |x, y| !(x >= 7 && y >= 7)).unwrap();
        let mut idx = vec![UNASSIGNED; 81];
        for y in 7..9 {
            for x in 7..9 {
                idx[y * 9 + x] = 3;
            }
        }
        let map = LayerMap::from_indices(9, 9, 5, idx);
        let routed = route_damaged(&map, &mask, 1).unwrap();
        assert_eq!(routed[3].target_count(), mask.target_count());
    }

    #[test]
    fn routing_without_any_known_pixel_is_an_error() {
        let mask = Mask::from_fn(5, 5, |_, _| true).unwrap();
        let map = LayerMap::from_indices(5, 5, 2, vec![UNASSIGNED; 25]);
        assert!(matches!(
            route_damaged(&map, &mask, 1),
            Err(Error::NoKnownContext)
        ));
    }

    #[test]
    fn routed_masks_partition_the_damage_and_match_a_direct_count() {
        let img = fixtures::two_texture(32, 24, 3);
        let mask = fixtures::scatter_mask(32, 24, 0.1, 11);
        let grid = train_default(&img, &mask, 2, 2);
        let map = assign_layers(&img, &mask, &grid);
        let radius = 2usize;
        let routed = route_damaged(&map, &mask, radius).unwrap();
        for y in 0..24 {
            for x in 0..32 {
                let owners = routed.iter().filter(|m| m.is_target(x, y)).count();
                assert_eq!(owners, usize::from(mask.is_target(x, y)));
            }
        }
        for (x, y) in mask.target_pixels() {
            let mut r = radius;
            let winner = loop {
                let mut counts = vec![0u64; map.layer_count()];
                let mut any = false;
                for qy in y.saturating_sub(r)..=(y + r).min(23) {
                    for qx in x.saturating_sub(r)..=(x + r).min(31) {
                        if let Some(k) = map.layer(qx, qy) {
                            counts[k as usize] += 1;
                            any = true;
                        }
                    }
                }
                if any {
                    let top = *counts.iter().max().unwrap();
                    break counts.iter().position(|&c| c == top).unwrap() as u16;
                }
                r *= 2;
            };
            assert!(routed[winner as usize].is_target(x, y));
        }
    }

    #[test]
    fn single_neuron_grid_reduces_to_the_plain_fill() {
        let img = fixtures::two_texture(40, 30, 6);
        let mask = fixtures::block_mask(40, 30, 0.03);
        let params = InpaintParams {
            patch_size: 5,
            ..InpaintParams::default()
        };
        let lp = LayerParams {
            rows: 1,
            cols: 1,
            ..LayerParams::default()
        };
        let layered = inpaint_by_layers(&img, &mask, &lp, &params).unwrap();
        let plain = inpaint(&img, &mask, &params).unwrap();
        assert_eq!(layered.0, plain.0);
    }

    #[test]
    fn constant_image_fills_exactly_under_any_grid() {
        let img = Raster::from_fn(32, 24, 3, |_, _, _| 133.0).unwrap();
        let mask = fixtures::block_mask(32, 24, 0.05);
        let mut damaged = img.clone();
        for (x, y) in mask.target_pixels() {
            damaged.set_pixel(x, y, &[0.0, 0.0, 0.0]);
        }
        let params = InpaintParams {
            patch_size: 5,
            ..InpaintParams::default()
        };
        let (out, _) = inpaint_by_layers(&damaged, &mask, &LayerParams::default(), &params).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn damage_in_one_texture_is_filled_from_its_own_layer() {
        let img = fixtures::two_texture(64, 44, 12);
        // Damage strictly inside the right-hand texture.
        let mask = Mask::from_fn(64, 44, |x, y| (44..56).contains(&x) && (16..28).contains(&y))
            .unwrap();
        let lp = LayerParams {
            rows: 1,
            cols: 2,
            route_radius: 3,
            ..LayerParams::default()
        };
        let params = InpaintParams {
            patch_size: 5,
            ..InpaintParams::default()
        };

        let grid = train_som(&img, &mask, 1, 2, lp.epochs, lp.lr0, lp.radius0(), lp.seed).unwrap();
        let map = assign_layers(&img, &mask, &grid);
        // The fixture's halves must land in different layers for the
        // origin check below to mean anything.
        let mut split = [[0u64; 2]; 2];
        for y in 0..44 {
            for x in 0..64 {
                if let Some(k) = map.layer(x, y) {
                    split[usize::from(x >= 32)][k as usize] += 1;
                }
            }
        }
        let left_layer = usize::from(split[0][1] > split[0][0]);
        let right_layer = 1 - left_layer;
        assert!(split[0][left_layer] > 99 * (split[0][0] + split[0][1]) / 100);
        assert!(split[1][right_layer] > 99 * (split[1][0] + split[1][1]) / 100);

        let mut log = Vec::new();
        let (_, report) = layered_fill(&img, &mask, &lp, &params, Some(&mut log)).unwrap();
        assert_eq!(report.fallbacks, 0);
        for step in &log {
            assert!(step.restricted);
            let (ex, ey) = step.exemplar;
            assert_eq!(map.layer(ex, ey), Some(right_layer as u16));
            assert!(ex >= 32, "exemplar center {ex},{ey} is in the left half");
        }
    }
}
