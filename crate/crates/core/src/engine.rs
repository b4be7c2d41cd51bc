//! The fill loop: repeatedly pick the most urgent front pixel, find its
//! best exemplar, and copy the missing cells over verbatim. Priority
//! evaluation and exemplar search run on worker threads; iterations are
//! sequential because each fill changes the front.

use std::time::Instant;

use crate::bilateral::{bilateral_filter_masked, BilateralParams};
use crate::error::{Error, Result};
use crate::front::{confidence_term, data_term, extract_front, front_normal, ConfidenceField};
use crate::raster::{validate_patch_size, Mask, PatchBox, Raster};
use crate::search::{restrict_window, Filter, MatchResult, PatchQuery, SearchContext};
use crate::threads;

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintParams {
    pub patch_size: usize,
    /// Candidate window radius around the front pixel; `None` searches
    /// the whole image.
    pub search_radius: Option<usize>,
    pub use_sea: bool,
    /// When set, matching runs against a smoothed copy of the image.
    /// Copied values still come from the untouched original.
    pub bilateral: Option<BilateralParams>,
    /// Reserved. The fill consumes no randomness.
    pub rng_seed: u64,
    pub threads: usize,
    /// Admit previously filled pixels as exemplar material. Off, the
    /// exemplar pool is frozen to the original source region.
    pub allow_filled_sources: bool,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self {
            patch_size: 9,
            search_radius: None,
            use_sea: true,
            bilateral: None,
            rng_seed: 0,
            threads: 1,
            allow_filled_sources: false,
        }
    }
}

impl InpaintParams {
    pub fn validate(&self) -> Result<()> {
        validate_patch_size(self.patch_size)?;
        if self.patch_size < 5 {
            return Err(Error::InvalidParam(format!(
                "patch size must be at least 5, got {}",
                self.patch_size
            )));
        }
        if let Some(r) = self.search_radius {
            if r < self.patch_size {
                return Err(Error::InvalidParam(format!(
                    "search radius {r} is smaller than the patch size {}",
                    self.patch_size
                )));
            }
        }
        if let Some(b) = &self.bilateral {
            BilateralParams::with_radius(b.sigma_s, b.sigma_r, b.radius)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FillReport {
    pub iterations: u64,
    pub examined: u64,
    pub pruned: u64,
    pub seconds: f64,
    /// Restricted searches that found no candidate and reran open.
    pub fallbacks: u64,
}

/// One fill iteration, for audits.
#[derive(Debug, Clone, PartialEq)]
pub struct FillStep {
    pub front: (usize, usize),
    pub exemplar: (usize, usize),
    pub filled: Vec<(usize, usize)>,
    pub confidence: f64,
    /// False when a source restriction was dropped for this step.
    pub restricted: bool,
}

impl FillStep {
    /// Source pixel the cell at `dst` was copied from.
    pub fn source_of(&self, dst: (usize, usize)) -> (usize, usize) {
        let sx = self.exemplar.0 as i64 + dst.0 as i64 - self.front.0 as i64;
        let sy = self.exemplar.1 as i64 + dst.1 as i64 - self.front.1 as i64;
        (sx as usize, sy as usize)
    }
}

/// Per-front-pixel exemplar restriction, for layer- or phase-aware
/// fills. `class_of` labels the front pixel; `admits` accepts candidate
/// centers for that label.
pub(crate) struct Restriction<'r> {
    pub class_of: &'r dyn Fn(usize, usize) -> Option<u16>,
    pub admits: &'r (dyn Fn(u16, usize, usize) -> bool + Sync),
}

pub fn inpaint(raster: &Raster, mask: &Mask, params: &InpaintParams) -> Result<(Raster, FillReport)> {
    inpaint_restricted(raster, mask, params, None, None)
}

/// As `inpaint`, additionally returning the per-iteration copy log.
pub fn inpaint_audited(
    raster: &Raster,
    mask: &Mask,
    params: &InpaintParams,
) -> Result<(Raster, FillReport, Vec<FillStep>)> {
    let mut log = Vec::new();
    let (out, report) = inpaint_restricted(raster, mask, params, None, Some(&mut log))?;
    Ok((out, report, log))
}

pub(crate) fn inpaint_restricted(
    raster: &Raster,
    mask: &Mask,
    params: &InpaintParams,
    restriction: Option<&Restriction>,
    mut audit: Option<&mut Vec<FillStep>>,
) -> Result<(Raster, FillReport)> {
    params.validate()?;
    if !mask.matches(raster) {
        return Err(Error::InvalidParam(
            "mask dimensions differ from image".into(),
        ));
    }
    let started = Instant::now();
    let mut report = FillReport::default();
    if mask.target_count() == 0 {
        return Ok((raster.clone(), report));
    }

    let workers = threads::resolve_threads(Some(params.threads).filter(|&t| t >= 1));
    let patch = params.patch_size;
    let half = patch / 2;
    let (w, h) = (raster.width(), raster.height());

    // `out` carries original values plus fills; `guide` is what patches
    // are matched on. They coincide unless a pre-filter is set.
    let mut out = raster.clone();
    let mut guide = match &params.bilateral {
        Some(bp) => bilateral_filter_masked(raster, mask, bp)?,
        None => raster.clone(),
    };
    let mut gray = guide.mean_channels();

    let mut current = mask.clone();
    let mut confidence = ConfidenceField::init(mask);
    let budget = mask.target_count() as u64;

    // Admissible exemplars never overlap the target region, so their
    // guide values are stable and the tables can be built once. The
    // filled-sources mode invalidates that and rebuilds per iteration.
    let frozen_guide = guide.clone();
    let frozen_ctx = SearchContext::new(&frozen_guide, mask).with_threads(workers);

    while current.target_count() > 0 {
        if report.iterations >= budget {
            return Err(Error::InvalidParam(
                "fill failed to shrink the target region".into(),
            ));
        }
        let front = extract_front(&current);
        if front.is_empty() {
            return Err(Error::NoKnownContext);
        }

        let (fx, fy, conf) = pick_front_pixel(&front, &confidence, &current, &gray, patch, workers);

        let query = PatchQuery::new(&guide, &current, (fx, fy), patch)?;
        let window = params
            .search_radius
            .map(|r| restrict_window((fx, fy), r, w, h));
        let class = restriction.and_then(|r| (r.class_of)(fx, fy));

        let (matched, restricted) = if params.allow_filled_sources {
            let snapshot = guide.clone();
            let live = current.clone();
            let ctx = SearchContext::new(&snapshot, &live).with_threads(workers);
            run_search(&ctx, &query, window, params.use_sea, restriction, class)?
        } else {
            run_search(&frozen_ctx, &query, window, params.use_sea, restriction, class)?
        };
        if !restricted {
            report.fallbacks += 1;
        }
        report.examined += matched.examined;
        report.pruned += matched.pruned;
        let (ex, ey) = matched.center;

        let mut filled = Vec::new();
        for (tx, ty) in PatchBox::clipped(fx, fy, half, w, h).cells() {
            if !current.is_target(tx, ty) {
                continue;
            }
            let sx = (ex + tx + half - fx) - half;
            let sy = (ey + ty + half - fy) - half;
            out.copy_pixel((tx, ty), (sx, sy));
            guide.copy_pixel((tx, ty), (sx, sy));
            let lum: f64 = guide.pixel(tx, ty).iter().sum::<f64>() / guide.channels() as f64;
            gray.set_sample(tx, ty, 0, lum);
            current.set(tx, ty, false);
            filled.push((tx, ty));
        }
        confidence.fill(&filled, conf);
        if let Some(log) = audit.as_deref_mut() {
            log.push(FillStep {
                front: (fx, fy),
                exemplar: (ex, ey),
                filled,
                confidence: conf,
                restricted,
            });
        }
        report.iterations += 1;
    }

    report.seconds = started.elapsed().as_secs_f64();
    Ok((out, report))
}

/// Highest-priority front pixel; ties resolve to the smallest row, then
/// column. Returns its confidence term, reused as the fill value.
fn pick_front_pixel(
    front: &[(usize, usize)],
    confidence: &ConfidenceField,
    mask: &Mask,
    gray: &Raster,
    patch: usize,
    workers: usize,
) -> (usize, usize, f64) {
    let evaluate = |p: (usize, usize)| -> (f64, f64) {
        let c = confidence_term(p, confidence, mask, patch).expect("front pixel is in bounds");
        let d = data_term(p, gray, mask, front_normal(mask, p));
        (c * d, c)
    };
    // Front pixels arrive row-major, and chunks are merged in order, so
    // keeping the incumbent on equal priority realizes the tie-break.
    let per_chunk = threads::map_chunks(front.len(), workers, |range| {
        let mut best: Option<(f64, f64, (usize, usize))> = None;
        for &p in &front[range] {
            let (prio, conf) = evaluate(p);
            if best.map_or(true, |(bp, _, _)| prio > bp) {
                best = Some((prio, conf, p));
            }
        }
        best
    });
    let (_, conf, p) = per_chunk
        .into_iter()
        .flatten()
        .reduce(|acc, cand| if cand.0 > acc.0 { cand } else { acc })
        .expect("front is nonempty");
    (p.0, p.1, conf)
}

fn run_search(
    ctx: &SearchContext,
    query: &PatchQuery,
    window: Option<PatchBox>,
    use_sea: bool,
    restriction: Option<&Restriction>,
    class: Option<u16>,
) -> Result<(MatchResult, bool)> {
    let run = |filter: Option<Filter>| -> Result<MatchResult> {
        if use_sea {
            ctx.sea_filtered(query, window, filter)
        } else {
            ctx.brute_filtered(query, window, filter)
        }
    };
    let (Some(r), Some(k)) = (restriction, class) else {
        return Ok((run(None)?, true));
    };
    let admits = r.admits;
    let only_class = move |cx: usize, cy: usize| admits(k, cx, cy);
    match run(Some(&only_class)) {
        Ok(m) => Ok((m, true)),
        Err(Error::NoAdmissibleCandidate { .. }) => Ok((run(None)?, false)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn params(patch: usize) -> InpaintParams {
        InpaintParams {
            patch_size: patch,
            ..InpaintParams::default()
        }
    }

    #[test]
    fn empty_mask_returns_input_with_zero_iterations() {
        let img = fixtures::random_raster(20, 15, 3, 1);
        let mask = Mask::new(20, 15).unwrap();
        let (out, report) = inpaint(&img, &mask, &params(9)).unwrap();
        assert_eq!(out, img);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.examined, 0);
    }

    #[test]
    fn single_missing_pixel_in_constant_image_gets_the_constant() {
        let img = Raster::from_fn(16, 16, 3, |_, _, _| 77.0).unwrap();
        let mut damaged = img.clone();
        damaged.set_pixel(8, 7, &[0.0, 255.0, 3.0]);
        let mask = Mask::from_fn(16, 16, |x, y| (x, y) == (8, 7)).unwrap();
        let (out, report) = inpaint(&damaged, &mask, &params(5)).unwrap();
        assert_eq!(out, img);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn periodic_texture_gap_restored_pixel_for_pixel() {
        let original = fixtures::periodic_tile(30, 30);
        let mask =
            Mask::from_fn(30, 30, |x, y| (11..19).contains(&x) && (11..19).contains(&y)).unwrap();
        let mut damaged = original.clone();
        for (x, y) in mask.target_pixels() {
            damaged.set_pixel(x, y, &[0.0]);
        }
        let (out, _) = inpaint(&damaged, &mask, &params(5)).unwrap();
        assert_eq!(out, original);
    }

    #[test]
    fn filled_values_are_verbatim_copies_from_the_source_region() {
        let img = fixtures::two_texture(48, 36, 5);
        let mask = fixtures::scatter_mask(48, 36, 0.06, 7);
        let (out, report, log) = inpaint_audited(&img, &mask, &params(7)).unwrap();
        assert_eq!(report.iterations as usize, log.len());
        let mut seen = 0usize;
        for step in &log {
            assert!(step.confidence >= 0.0 && step.confidence <= 1.0);
            for &dst in &step.filled {
                let src = step.source_of(dst);
                assert!(!mask.is_target(src.0, src.1), "exemplar cell inside target");
                assert_eq!(out.pixel(dst.0, dst.1), img.pixel(src.0, src.1));
                seen += 1;
            }
        }
        assert_eq!(seen, mask.target_count());
    }

    #[test]
    fn strategies_produce_identical_fills() {
        let img = fixtures::two_texture(60, 40, 11);
        let mask = fixtures::scatter_mask(60, 40, 0.05, 3);
        let fast = inpaint(&img, &mask, &params(7)).unwrap();
        let slow = inpaint(
            &img,
            &mask,
            &InpaintParams {
                use_sea: false,
                ..params(7)
            },
        )
        .unwrap();
        assert_eq!(fast.0, slow.0);
        assert_eq!(fast.1.iterations, slow.1.iterations);
        assert_eq!(slow.1.pruned, 0);
    }

    #[test]
    fn worker_count_does_not_change_the_image() {
        let img = fixtures::two_texture(40, 30, 2);
        let mask = fixtures::block_mask(40, 30, 0.04);
        let single = inpaint(&img, &mask, &params(5)).unwrap().0;
        for t in [2, 5] {
            let multi = inpaint(
                &img,
                &mask,
                &InpaintParams {
                    threads: t,
                    ..params(5)
                },
            )
            .unwrap()
            .0;
            assert_eq!(single, multi);
        }
    }

    #[test]
    fn iterations_never_exceed_initial_target_count() {
        for seed in 0..3 {
            let img = fixtures::random_raster(24, 24, 1, seed);
            let mask = fixtures::scatter_mask(24, 24, 0.08, seed + 50);
            let n = mask.target_count() as u64;
            let (_, report) = inpaint(&img, &mask, &params(5)).unwrap();
            assert!(report.iterations >= 1 && report.iterations <= n);
        }
    }

    #[test]
    fn source_region_with_no_full_patch_is_an_error() {
        let img = fixtures::random_raster(12, 12, 1, 4);
        let mask =
            Mask::from_fn(12, 12, |x, y| (2..10).contains(&x) && (2..10).contains(&y)).unwrap();
        let err = inpaint(&img, &mask, &params(5)).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleCandidate { .. }), "{err}");
    }

    #[test]
    fn guided_matching_still_copies_original_values() {
        let img = fixtures::two_texture(40, 30, 9);
        let mask = fixtures::block_mask(40, 30, 0.03);
        let p = InpaintParams {
            bilateral: Some(BilateralParams::with_radius(2.0, 30.0, 2).unwrap()),
            ..params(5)
        };
        let (out, _, log) = inpaint_audited(&img, &mask, &p).unwrap();
        for y in 0..30 {
            for x in 0..40 {
                if !mask.is_target(x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        for step in &log {
            for &dst in &step.filled {
                let src = step.source_of(dst);
                assert_eq!(out.pixel(dst.0, dst.1), img.pixel(src.0, src.1));
            }
        }
    }

    #[test]
    fn filled_sources_mode_keeps_the_copy_audit_consistent() {
        let img = fixtures::periodic_tile(30, 30);
        let mask = fixtures::block_mask(30, 30, 0.08);
        let p = InpaintParams {
            allow_filled_sources: true,
            ..params(5)
        };
        let mut log = Vec::new();
        let (out, _) = inpaint_restricted(&img, &mask, &p, None, Some(&mut log)).unwrap();
        for step in &log {
            for &dst in &step.filled {
                let src = step.source_of(dst);
                assert_eq!(out.pixel(dst.0, dst.1), out.pixel(src.0, src.1));
            }
        }
    }

    #[test]
    fn window_restriction_caps_candidates_per_iteration() {
        let img = fixtures::two_texture(50, 40, 13);
        let mask = fixtures::block_mask(50, 40, 0.02);
        let p = InpaintParams {
            search_radius: Some(10),
            use_sea: false,
            ..params(5)
        };
        let (_, report) = inpaint(&img, &mask, &p).unwrap();
        assert!(report.examined <= report.iterations * 21 * 21);
    }

    #[test]
    fn bad_params_are_rejected() {
        let img = fixtures::random_raster(8, 8, 1, 0);
        let mask = Mask::new(8, 8).unwrap();
        for p in [
            params(4),
            params(3),
            InpaintParams {
                search_radius: Some(3),
                ..params(5)
            },
        ] {
            assert!(matches!(
                inpaint(&img, &mask, &p),
                Err(Error::InvalidParam(_))
            ));
        }
    }

    #[test]
    fn whole_image_target_is_rejected() {
        let img = fixtures::random_raster(10, 10, 1, 2);
        let mask = Mask::from_fn(10, 10, |_, _| true).unwrap();
        assert!(matches!(
            inpaint(&img, &mask, &params(5)),
            Err(Error::NoKnownContext)
        ));
    }
}
