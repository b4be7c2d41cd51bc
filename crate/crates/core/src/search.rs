//! Best-exemplar search. The brute-force scan is the reference; the
//! successive-elimination path must return the identical (center, ssd)
//! on every input, it just skips candidates whose sum-based lower bound
//! already exceeds the incumbent.

use crate::error::{Error, Result};
use crate::raster::{Mask, PatchBox, Raster};
use crate::sat::{MaskSat, RowPrefix, Sat};
use crate::threads;

/// Horizontal run of valid cells in patch-local coordinates.
#[derive(Debug, Clone, Copy)]
struct Run {
    dy: usize,
    x0: usize,
    x1: usize,
    /// 1 / cell count, so the bound loop multiplies instead of divides.
    inv_len: f64,
}

/// Snapshot of the target patch: which cells carry information, their
/// values, and per-run sums for the elimination bound. Values are copied
/// at construction, so later fills cannot alias the query.
#[derive(Debug, Clone)]
pub struct PatchQuery {
    center: (usize, usize),
    patch_size: usize,
    half: usize,
    channels: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
    valid_count: usize,
    runs: Vec<Run>,
    run_sums: Vec<f64>,
    total_sums: Vec<f64>,
    fully_valid: bool,
}

impl PatchQuery {
    pub fn new(
        raster: &Raster,
        mask: &Mask,
        center: (usize, usize),
        patch_size: usize,
    ) -> Result<Self> {
        let half = crate::raster::validate_patch_size(patch_size)?;
        let (w, h) = (raster.width(), raster.height());
        if center.0 >= w || center.1 >= h {
            return Err(Error::OutOfBounds {
                x: center.0,
                y: center.1,
            });
        }
        let channels = raster.channels();
        let mut values = vec![0.0; patch_size * patch_size * channels];
        let mut valid = vec![false; patch_size * patch_size];
        let mut valid_count = 0;
        for py in 0..patch_size {
            for px in 0..patch_size {
                let ax = center.0 as i64 + px as i64 - half as i64;
                let ay = center.1 as i64 + py as i64 - half as i64;
                if ax < 0 || ay < 0 || ax as usize >= w || ay as usize >= h {
                    continue;
                }
                let (ax, ay) = (ax as usize, ay as usize);
                if mask.is_target(ax, ay) {
                    continue;
                }
                valid[py * patch_size + px] = true;
                valid_count += 1;
                let base = (py * patch_size + px) * channels;
                values[base..base + channels].copy_from_slice(raster.pixel(ax, ay));
            }
        }
        if valid_count == 0 {
            return Err(Error::InvalidParam(
                "query patch has no valid cells".into(),
            ));
        }
        let mut runs = Vec::new();
        for py in 0..patch_size {
            let mut px = 0;
            while px < patch_size {
                if valid[py * patch_size + px] {
                    let x0 = px;
                    while px + 1 < patch_size && valid[py * patch_size + px + 1] {
                        px += 1;
                    }
                    runs.push(Run {
                        dy: py,
                        x0,
                        x1: px,
                        inv_len: 1.0 / (px - x0 + 1) as f64,
                    });
                }
                px += 1;
            }
        }
        let mut run_sums = vec![0.0; runs.len() * channels];
        let mut total_sums = vec![0.0; channels];
        for (i, run) in runs.iter().enumerate() {
            for px in run.x0..=run.x1 {
                let base = (run.dy * patch_size + px) * channels;
                for c in 0..channels {
                    run_sums[i * channels + c] += values[base + c];
                    total_sums[c] += values[base + c];
                }
            }
        }
        Ok(Self {
            center,
            patch_size,
            half,
            channels,
            values,
            valid,
            valid_count,
            runs,
            run_sums,
            total_sums,
            fully_valid: valid_count == patch_size * patch_size,
        })
    }

    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn valid_count(&self) -> usize {
        self.valid_count
    }

    pub fn is_valid_cell(&self, px: usize, py: usize) -> bool {
        self.valid[py * self.patch_size + px]
    }

    /// SSD over valid cells against the full patch at `top_left`, no
    /// admissibility checks. Summation order is fixed by the run list.
    fn ssd_at(&self, raster: &Raster, top_left: (usize, usize)) -> f64 {
        self.ssd_at_capped(raster, top_left, f64::INFINITY)
    }

    /// As ssd_at, but may stop after any run whose partial sum already
    /// exceeds `cap` strictly. The return value is then that partial
    /// sum: enough to rule the candidate out, never enough to rank it.
    /// A candidate genuinely tied with `cap` stays below it throughout
    /// and is summed in full, so tie-breaks see the exact value.
    fn ssd_at_capped(&self, raster: &Raster, top_left: (usize, usize), cap: f64) -> f64 {
        let mut acc = 0.0;
        for run in &self.runs {
            let t0 = (run.dy * self.patch_size + run.x0) * self.channels;
            let t1 = (run.dy * self.patch_size + run.x1 + 1) * self.channels;
            let target = &self.values[t0..t1];
            let cand = raster.row_slice(top_left.1 + run.dy, top_left.0 + run.x0, top_left.0 + run.x1);
            acc += target
                .iter()
                .zip(cand)
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum::<f64>();
            if acc > cap {
                return acc;
            }
        }
        acc
    }

    /// Lower bound on ssd_at from per-run sum differences: sum over
    /// runs and channels of (dS)^2 / run length. Accumulation stops
    /// once the partial sum passes `cap`; the partial is itself a
    /// lower bound, so the caller may prune on it directly.
    fn run_bound(&self, rows: &RowPrefix, top_left: (usize, usize), cap: f64) -> f64 {
        let mut acc = 0.0;
        for (i, run) in self.runs.iter().enumerate() {
            let y = top_left.1 + run.dy;
            for c in 0..self.channels {
                let ds = rows.run_sum(c, y, top_left.0 + run.x0, top_left.0 + run.x1)
                    - self.run_sums[i * self.channels + c];
                acc += ds * ds * run.inv_len;
            }
            if acc > cap {
                return acc;
            }
        }
        acc
    }

    /// Coarser whole-patch bound, only sound when every cell is valid.
    fn block_bound(&self, sat: &Sat, top_left: (usize, usize)) -> f64 {
        debug_assert!(self.fully_valid);
        let b = PatchBox {
            x0: top_left.0,
            y0: top_left.1,
            x1: top_left.0 + self.patch_size - 1,
            y1: top_left.1 + self.patch_size - 1,
        };
        let n = (self.patch_size * self.patch_size) as f64;
        (0..self.channels)
            .map(|c| {
                let ds = sat.rect_sum(c, b) - self.total_sums[c];
                ds * ds / n
            })
            .sum()
    }
}

/// Outcome of one exemplar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub center: (usize, usize),
    pub ssd: f64,
    pub examined: u64,
    pub pruned: u64,
}

/// Square candidate window of side 2*radius + 1 around a front pixel,
/// clipped to the image. Constrains candidate centers.
pub fn restrict_window(
    front: (usize, usize),
    radius: usize,
    width: usize,
    height: usize,
) -> PatchBox {
    PatchBox::clipped(front.0, front.1, radius, width, height)
}

/// Pruning must never discard a candidate tied with the incumbent, or
/// the position tie-break would change. The epsilon absorbs float
/// rounding in the table sums; integer-valued rasters need none of it.
#[inline]
fn prunes(bound: f64, best: f64) -> bool {
    bound > best * (1.0 + 1e-12) + 1e-12
}

pub(crate) type Filter<'f> = &'f (dyn Fn(usize, usize) -> bool + Sync);

/// Shared tables for repeated searches over one image. Candidate cells
/// must keep their values while the context is alive; the fill loop
/// writes only target pixels, which admissible candidates never cover.
pub struct SearchContext<'a> {
    raster: &'a Raster,
    sat: Sat,
    mask_sat: MaskSat,
    rows: RowPrefix,
    threads: usize,
}

impl<'a> SearchContext<'a> {
    pub fn new(raster: &'a Raster, mask: &Mask) -> Self {
        Self {
            raster,
            sat: Sat::build(raster),
            mask_sat: MaskSat::build(mask),
            rows: RowPrefix::build(raster),
            threads: 1,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    fn candidate_rect(&self, query: &PatchQuery, window: Option<PatchBox>) -> Option<PatchBox> {
        let (w, h) = (self.raster.width(), self.raster.height());
        let half = query.half;
        if w < query.patch_size || h < query.patch_size {
            return None;
        }
        let mut x0 = half;
        let mut y0 = half;
        let mut x1 = w - 1 - half;
        let mut y1 = h - 1 - half;
        if let Some(win) = window {
            x0 = x0.max(win.x0);
            y0 = y0.max(win.y0);
            x1 = x1.min(win.x1);
            y1 = y1.min(win.y1);
        }
        (x0 <= x1 && y0 <= y1).then_some(PatchBox { x0, y0, x1, y1 })
    }

    #[inline]
    fn admissible(&self, query: &PatchQuery, cx: usize, cy: usize, filter: Option<Filter>) -> bool {
        let half = query.half;
        let b = PatchBox {
            x0: cx - half,
            y0: cy - half,
            x1: cx + half,
            y1: cy + half,
        };
        self.mask_sat.all_known(b) && filter.map_or(true, |f| f(cx, cy))
    }

    pub fn brute(&self, query: &PatchQuery, window: Option<PatchBox>) -> Result<MatchResult> {
        self.brute_filtered(query, window, None)
    }

    pub(crate) fn brute_filtered(
        &self,
        query: &PatchQuery,
        window: Option<PatchBox>,
        filter: Option<Filter>,
    ) -> Result<MatchResult> {
        let rect = self
            .candidate_rect(query, window)
            .ok_or(Error::NoAdmissibleCandidate {
                x: query.center.0,
                y: query.center.1,
            })?;
        let rows: Vec<usize> = (rect.y0..=rect.y1).collect();
        let chunks = threads::map_chunks(rows.len(), self.threads, |range| {
            let mut best: Option<(f64, usize, usize)> = None;
            let mut examined = 0u64;
            for &cy in &rows[range] {
                for cx in rect.x0..=rect.x1 {
                    if !self.admissible(query, cx, cy, filter) {
                        continue;
                    }
                    examined += 1;
                    let ssd = query.ssd_at(self.raster, (cx - query.half, cy - query.half));
                    if best.map_or(true, |(bs, by, bx)| (ssd, cy, cx) < (bs, by, bx)) {
                        best = Some((ssd, cy, cx));
                    }
                }
            }
            (best, examined)
        });
        merge_chunks(chunks.into_iter().map(|(b, e)| (b, e, 0)), query.center)
    }

    pub fn sea(&self, query: &PatchQuery, window: Option<PatchBox>) -> Result<MatchResult> {
        self.sea_filtered(query, window, None)
    }

    pub(crate) fn sea_filtered(
        &self,
        query: &PatchQuery,
        window: Option<PatchBox>,
        filter: Option<Filter>,
    ) -> Result<MatchResult> {
        self.sea_inner(query, window, filter, None)
    }

    /// Candidates spiral outward from the query center so the incumbent
    /// tightens early. A pruned candidate is gone for good, which is
    /// sound because the bound never exceeds the true SSD and pruning
    /// is strict; see `prunes`.
    fn sea_inner(
        &self,
        query: &PatchQuery,
        window: Option<PatchBox>,
        filter: Option<Filter>,
        mut audit: Option<&mut Vec<PrunedCandidate>>,
    ) -> Result<MatchResult> {
        let rect = self
            .candidate_rect(query, window)
            .ok_or(Error::NoAdmissibleCandidate {
                x: query.center.0,
                y: query.center.1,
            })?;
        let order = spiral_order(rect, query.center);
        let run_audit = audit.is_some();
        let chunks = threads::map_chunks(order.len(), self.threads, |range| {
            let mut best: Option<(f64, usize, usize)> = None;
            let mut examined = 0u64;
            let mut pruned = 0u64;
            let mut prune_log = Vec::new();
            for &(cx, cy) in &order[range] {
                if !self.admissible(query, cx, cy, filter) {
                    continue;
                }
                let top_left = (cx - query.half, cy - query.half);
                if let Some((bs, _, _)) = best {
                    let coarse = if query.fully_valid {
                        self.block_bound_of(query, top_left)
                    } else {
                        0.0
                    };
                    let bound = if prunes(coarse, bs) {
                        coarse
                    } else {
                        query.run_bound(&self.rows, top_left, bs)
                    };
                    if prunes(bound, bs) {
                        pruned += 1;
                        if run_audit {
                            prune_log.push(PrunedCandidate {
                                center: (cx, cy),
                                bound,
                            });
                        }
                        continue;
                    }
                }
                examined += 1;
                let cap = best.map_or(f64::INFINITY, |(bs, _, _)| bs);
                let ssd = query.ssd_at_capped(self.raster, top_left, cap);
                if best.map_or(true, |(bs, by, bx)| (ssd, cy, cx) < (bs, by, bx)) {
                    best = Some((ssd, cy, cx));
                }
            }
            (best, examined, pruned, prune_log)
        });
        if let Some(log) = audit.as_deref_mut() {
            for (_, _, _, chunk_log) in &chunks {
                log.extend_from_slice(chunk_log);
            }
        }
        merge_chunks(
            chunks.into_iter().map(|(b, e, p, _)| (b, e, p)),
            query.center,
        )
    }

    fn block_bound_of(&self, query: &PatchQuery, top_left: (usize, usize)) -> f64 {
        query.block_bound(&self.sat, top_left)
    }
}

#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct PrunedCandidate {
    pub center: (usize, usize),
    pub bound: f64,
}

fn merge_chunks(
    chunks: impl Iterator<Item = (Option<(f64, usize, usize)>, u64, u64)>,
    front: (usize, usize),
) -> Result<MatchResult> {
    let mut best: Option<(f64, usize, usize)> = None;
    let mut examined = 0;
    let mut pruned = 0;
    for (local, e, p) in chunks {
        examined += e;
        pruned += p;
        if let Some(cand) = local {
            if best.map_or(true, |b| cand < b) {
                best = Some(cand);
            }
        }
    }
    let (ssd, y, x) = best.ok_or(Error::NoAdmissibleCandidate {
        x: front.0,
        y: front.1,
    })?;
    Ok(MatchResult {
        center: (x, y),
        ssd,
        examined,
        pruned,
    })
}

/// Every cell of `rect` exactly once, ordered by Chebyshev ring around
/// `seed` (clamped into the rect), nearest first. Within a ring: top
/// row, bottom row, left column, right column, each in ascending order.
fn spiral_order(rect: PatchBox, seed: (usize, usize)) -> Vec<(usize, usize)> {
    let sx = seed.0.clamp(rect.x0, rect.x1) as i64;
    let sy = seed.1.clamp(rect.y0, rect.y1) as i64;
    let (x0, y0, x1, y1) = (rect.x0 as i64, rect.y0 as i64, rect.x1 as i64, rect.y1 as i64);
    let r_max = (sx - x0).max(x1 - sx).max(sy - y0).max(y1 - sy);
    let mut out = Vec::with_capacity(rect.area());
    out.push((sx as usize, sy as usize));
    for r in 1..=r_max {
        let cx0 = (sx - r).max(x0);
        let cx1 = (sx + r).min(x1);
        let top = sy - r;
        let bottom = sy + r;
        if top >= y0 {
            for x in cx0..=cx1 {
                out.push((x as usize, top as usize));
            }
        }
        if bottom <= y1 {
            for x in cx0..=cx1 {
                out.push((x as usize, bottom as usize));
            }
        }
        let cy0 = (sy - r + 1).max(y0);
        let cy1 = (sy + r - 1).min(y1);
        let left = sx - r;
        let right = sx + r;
        if left >= x0 {
            for y in cy0..=cy1 {
                out.push((left as usize, y as usize));
            }
        }
        if right <= x1 {
            for y in cy0..=cy1 {
                out.push((right as usize, y as usize));
            }
        }
    }
    out
}

/// SSD between the query's valid cells and the full candidate patch at
/// `candidate`. Checks the candidate lies inside the image and clear of
/// the target region.
pub fn ssd_partial(
    query: &PatchQuery,
    candidate: (usize, usize),
    raster: &Raster,
    mask: &Mask,
) -> Result<f64> {
    let half = query.half;
    let b = PatchBox::full(
        candidate.0,
        candidate.1,
        half,
        raster.width(),
        raster.height(),
    )
    .ok_or(Error::OutOfBounds {
        x: candidate.0,
        y: candidate.1,
    })?;
    if b.cells().any(|(x, y)| mask.is_target(x, y)) {
        return Err(Error::CandidateNotInSource {
            x: candidate.0,
            y: candidate.1,
        });
    }
    Ok(query.ssd_at(raster, (b.x0, b.y0)))
}
