//! Two-phase piecewise-constant segmentation by level-set evolution,
//! plus the damped-Poisson solver for piecewise-smooth region fields.
//! The sign convention throughout: phi > 0 is phase 1, phi <= 0 is
//! phase 2.

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

/// Signed phase indicator with its two phase means.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    width: usize,
    height: usize,
    phi: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// Width of the smoothed Dirac peak, in cells.
    pub eps_delta: f64,
}

impl LevelSet {
    pub fn new(width: usize, height: usize, phi: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..width * height)
            .map(|i| phi(i % width, i / width))
            .collect();
        LevelSet {
            width,
            height,
            phi: data,
            c1: 0.0,
            c2: 0.0,
            eps_delta: 1.5,
        }
    }

    /// Sine checkerboard with 5-cell half-period, the default start.
    /// Seeds interfaces everywhere so no phase needs to nucleate.
    pub fn checkerboard(width: usize, height: usize) -> Self {
        use std::f64::consts::PI;
        Self::new(width, height, |x, y| {
            (PI * (x as f64 + 0.5) / 5.0).sin() * (PI * (y as f64 + 0.5) / 5.0).sin()
        })
    }

    /// Signed distance to a circle, positive inside.
    pub fn circle(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> Self {
        Self::new(width, height, |x, y| {
            r - ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt()
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn phi(&self, x: usize, y: usize) -> f64 {
        self.phi[y * self.width + x]
    }

    pub fn in_phase_one(&self, x: usize, y: usize) -> bool {
        self.phi(x, y) > 0.0
    }

    fn dirac(&self, v: f64) -> f64 {
        let e = self.eps_delta;
        e / (std::f64::consts::PI * (e * e + v * v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegParams {
    /// Per-pixel data weight; `None` means uniform 1.
    pub lambda: Option<Raster>,
    /// Interface length weight.
    pub nu: f64,
    /// Diffusion weight for the piecewise-smooth solves.
    pub mu_smooth: f64,
    pub dt: f64,
    pub max_iters: usize,
    /// Fraction of pixels allowed to switch phase per iteration while
    /// still counting as quiet; sustained quiet means converged.
    pub tol: f64,
}

impl Default for SegParams {
    fn default() -> Self {
        SegParams {
            lambda: None,
            nu: 0.01 * 255.0 * 255.0,
            mu_smooth: 10.0,
            dt: 1e-3,
            max_iters: 500,
            tol: 1e-4,
        }
    }
}

impl SegParams {
    fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParam("dt must be positive".into()));
        }
        if self.nu < 0.0 || self.mu_smooth < 0.0 || self.tol < 0.0 {
            return Err(Error::InvalidParam("weights must be nonnegative".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        if let Some(l) = &self.lambda {
            if l.width() != width || l.height() != height || l.channels() != 1 {
                return Err(Error::InvalidParam(
                    "weight map must be single-channel and match the image".into(),
                ));
            }
            if l.data().iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::InvalidParam("weight map must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub field: LevelSet,
    /// Energy after the initial means and after every iteration,
    /// including rejected ones (which leave it unchanged).
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub accepted: usize,
    pub converged: bool,
}

fn weight_at(lambda: Option<&Raster>, x: usize, y: usize) -> f64 {
    lambda.map_or(1.0, |l| l.sample(x, y, 0))
}

fn luminance(raster: &Raster) -> Raster {
    raster.mean_channels()
}

/// Weighted per-phase means. An empty (or zero-weight) phase keeps the
/// mean stored in the field.
pub fn region_means(raster: &Raster, field: &LevelSet, lambda: Option<&Raster>) -> (f64, f64) {
    let gray = luminance(raster);
    means_of(&gray, field, lambda)
}

fn means_of(gray: &Raster, field: &LevelSet, lambda: Option<&Raster>) -> (f64, f64) {
    let mut acc = [0.0f64; 2];
    let mut wsum = [0.0f64; 2];
    for y in 0..field.height {
        for x in 0..field.width {
            let k = if field.in_phase_one(x, y) { 0 } else { 1 };
            let w = weight_at(lambda, x, y);
            acc[k] += w * gray.sample(x, y, 0);
            wsum[k] += w;
        }
    }
    let pick = |k: usize, prev: f64| if wsum[k] > 0.0 { acc[k] / wsum[k] } else { prev };
    (pick(0, field.c1), pick(1, field.c2))
}

/// Piecewise-constant energy: weighted squared deviation from the phase
/// mean, plus `nu` times the regularized interface length.
pub fn ms_energy(raster: &Raster, field: &LevelSet, params: &SegParams) -> f64 {
    let gray = luminance(raster);
    energy_of(&gray, field, params.lambda.as_ref(), params.nu)
}

fn energy_of(gray: &Raster, field: &LevelSet, lambda: Option<&Raster>, nu: f64) -> f64 {
    let (w, h) = (field.width, field.height);
    let mut data = 0.0;
    for y in 0..h {
        for x in 0..w {
            let c = if field.in_phase_one(x, y) {
                field.c1
            } else {
                field.c2
            };
            let d = gray.sample(x, y, 0) - c;
            data += weight_at(lambda, x, y) * d * d;
        }
    }
    if nu == 0.0 {
        return data;
    }
    // Interface length: Dirac-weighted gradient magnitude, forward
    // differences with a replicated edge.
    let mut length = 0.0;
    for y in 0..h {
        for x in 0..w {
            let p = field.phi(x, y);
            let dx = if x + 1 < w { field.phi(x + 1, y) - p } else { 0.0 };
            let dy = if y + 1 < h { field.phi(x, y + 1) - p } else { 0.0 };
            length += field.dirac(p) * (dx * dx + dy * dy).sqrt();
        }
    }
    data + nu * length
}

/// Mean curvature of the phi level lines, central differences with
/// replicated borders, clamped to one cell's curvature range.
fn curvature(field: &LevelSet, x: usize, y: usize) -> f64 {
    let (w, h) = (field.width, field.height);
    let at = |x: i64, y: i64| {
        let cx = x.clamp(0, w as i64 - 1) as usize;
        let cy = y.clamp(0, h as i64 - 1) as usize;
        field.phi(cx, cy)
    };
    let (xi, yi) = (x as i64, y as i64);
    let px = (at(xi + 1, yi) - at(xi - 1, yi)) / 2.0;
    let py = (at(xi, yi + 1) - at(xi, yi - 1)) / 2.0;
    let pxx = at(xi + 1, yi) - 2.0 * at(xi, yi) + at(xi - 1, yi);
    let pyy = at(xi, yi + 1) - 2.0 * at(xi, yi) + at(xi, yi - 1);
    let pxy =
        (at(xi + 1, yi + 1) + at(xi - 1, yi - 1) - at(xi + 1, yi - 1) - at(xi - 1, yi + 1)) / 4.0;
    let g2 = px * px + py * py;
    let k = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / (g2.powf(1.5) + 1e-8);
    k.clamp(-5.0, 5.0)
}

/// One explicit step. The data part moves phi downhill for the energy:
/// cells closer to c2 than c1 sink toward phase 2 and vice versa.
fn step_phi(gray: &Raster, field: &LevelSet, lambda: Option<&Raster>, nu: f64, dt: f64) -> Vec<f64> {
    let (w, h) = (field.width, field.height);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = field.phi(x, y);
            let g = gray.sample(x, y, 0);
            let lam = weight_at(lambda, x, y);
            let d1 = g - field.c1;
            let d2 = g - field.c2;
            let mut force = lam * (d2 * d2 - d1 * d1);
            if nu != 0.0 {
                force += nu * curvature(field, x, y);
            }
            out[y * w + x] = p + dt * field.dirac(p) * force;
        }
    }
    out
}

/// Rebuilds phi as a signed distance to its zero set by fast sweeping.
/// Signs are preserved, so phases and means do not move. Returns `None`
/// when there is no interface to measure from.
fn reinitialized(field: &LevelSet) -> Option<LevelSet> {
    let (w, h) = (field.width, field.height);
    let pos = |i: usize| field.phi[i] > 0.0;
    let mut d = vec![f64::INFINITY; w * h];
    let mut found = false;
    let mut seed = |a: usize, b: usize| {
        if pos(a) != pos(b) {
            found = true;
            let s = field.phi[a].abs() + field.phi[b].abs();
            let (ta, tb) = if s > 0.0 {
                (field.phi[a].abs() / s, field.phi[b].abs() / s)
            } else {
                (0.5, 0.5)
            };
            d[a] = d[a].min(ta);
            d[b] = d[b].min(tb);
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                seed(i, i + 1);
            }
            if y + 1 < h {
                seed(i, i + w);
            }
        }
    }
    if !found {
        return None;
    }

    let update = |d: &mut Vec<f64>, x: usize, y: usize| {
        let i = y * w + x;
        let hmin = f64::min(
            if x > 0 { d[i - 1] } else { f64::INFINITY },
            if x + 1 < w { d[i + 1] } else { f64::INFINITY },
        );
        let vmin = f64::min(
            if y > 0 { d[i - w] } else { f64::INFINITY },
            if y + 1 < h { d[i + w] } else { f64::INFINITY },
        );
        let (lo, hi) = if hmin < vmin { (hmin, vmin) } else { (vmin, hmin) };
        let cand = if !lo.is_finite() {
            return;
        } else if !hi.is_finite() || hi - lo >= 1.0 {
            lo + 1.0
        } else {
            0.5 * (lo + hi + (2.0 - (hi - lo) * (hi - lo)).sqrt())
        };
        if cand < d[i] {
            d[i] = cand;
        }
    };
    for _ in 0..3 {
        for y in 0..h {
            for x in 0..w {
                update(&mut d, x, y);
            }
        }
        for y in 0..h {
            for x in (0..w).rev() {
                update(&mut d, x, y);
            }
        }
        for y in (0..h).rev() {
            for x in 0..w {
                update(&mut d, x, y);
            }
        }
        for y in (0..h).rev() {
            for x in (0..w).rev() {
                update(&mut d, x, y);
            }
        }
    }

    let mut out = field.clone();
    for i in 0..w * h {
        out.phi[i] = if pos(i) { d[i] } else { -d[i] };
    }
    Some(out)
}

/// Evolves phi until the interface stops moving or the iteration budget
/// runs out. Steps that would raise the energy are rejected and the
/// time step halved; five straight acceptances earn back a 1.2 factor,
/// capped at the configured dt, so the recorded energy never increases.
/// On return phase 1 carries the darker mean.
pub fn evolve_level_set(
    raster: &Raster,
    init: LevelSet,
    params: &SegParams,
) -> Result<Segmentation> {
    params.validate(raster.width(), raster.height())?;
    if init.width != raster.width() || init.height != raster.height() {
        return Err(Error::InvalidParam(
            "level set dimensions differ from image".into(),
        ));
    }
    let gray = luminance(raster);
    let lambda = params.lambda.as_ref();
    let cells = (init.width * init.height) as f64;
    // Sustained-quiet window: this many consecutive iterations with a
    // sub-tol interface change count as converged. A single quiet step
    // right after the start would otherwise stop at the seed pattern.
    const QUIET_WINDOW: usize = 20;

    let mut field = init;
    let (c1, c2) = means_of(&gray, &field, lambda);
    field.c1 = c1;
    field.c2 = c2;
    let mut energy = energy_of(&gray, &field, lambda, params.nu);
    let mut trace = vec![energy];

    let mut dt = params.dt;
    let mut streak = 0usize;
    let mut quiet = 0usize;
    let mut accepted = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < params.max_iters {
        iterations += 1;
        let phi_new = step_phi(&gray, &field, lambda, params.nu, dt);
        if phi_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iteration: iterations,
            });
        }
        let mut candidate = LevelSet {
            phi: phi_new,
            ..field.clone()
        };
        let (c1, c2) = means_of(&gray, &candidate, lambda);
        candidate.c1 = c1;
        candidate.c2 = c2;
        let e_new = energy_of(&gray, &candidate, lambda, params.nu);

        if e_new <= energy {
            let flips = field
                .phi
                .iter()
                .zip(&candidate.phi)
                .filter(|(a, b)| (**a > 0.0) != (**b > 0.0))
                .count();
            field = candidate;
            energy = e_new;
            accepted += 1;
            streak += 1;
            if streak >= 5 {
                dt = (dt * 1.2).min(params.dt);
                streak = 0;
            }
            if accepted % 25 == 0 {
                if let Some(r) = reinitialized(&field) {
                    let e_r = energy_of(&gray, &r, lambda, params.nu);
                    if e_r <= energy {
                        field = r;
                        energy = e_r;
                    }
                }
            }
            quiet = if (flips as f64) < params.tol * cells {
                quiet + 1
            } else {
                0
            };
        } else {
            streak = 0;
            dt *= 0.5;
            // A rejected step leaves the interface untouched.
            quiet += 1;
        }
        trace.push(energy);
        if quiet >= QUIET_WINDOW || dt < params.dt * 1e-12 {
            converged = true;
            break;
        }
    }

    if field.c1 > field.c2 {
        for v in &mut field.phi {
            *v = -*v;
        }
        std::mem::swap(&mut field.c1, &mut field.c2);
    }
    Ok(Segmentation {
        field,
        trace,
        iterations,
        accepted,
        converged,
    })
}

/// Complementary phase masks: target pixels of the first mask are phase
/// 1, of the second phase 2.
pub fn phase_masks(field: &LevelSet) -> (Mask, Mask) {
    let build = |invert: bool| {
        Mask::from_fn(field.width, field.height, |x, y| {
            field.in_phase_one(x, y) != invert
        })
        .expect("level set dimensions are positive")
    };
    (build(false), build(true))
}

pub const POISSON_SWEEP_CAP: usize = 200_000;
const POISSON_TOL: f64 = 1e-8;

/// Solves lambda*(mu - mu0) = mu_smooth * laplacian(mu) on the region by
/// Gauss-Seidel relaxation. The stencil only ever reads in-region
/// neighbors, which realizes the zero-flux boundary: the mirrored ghost
/// value equals the cell itself, so nothing crosses the edge. Cells
/// outside the region pass through unchanged.
pub fn solve_damped_poisson(
    mu0: &Raster,
    region: &Mask,
    lambda: Option<&Raster>,
    mu_smooth: f64,
    max_sweeps: usize,
) -> Result<Raster> {
    if !region.matches(mu0) {
        return Err(Error::InvalidParam(
            "region dimensions differ from image".into(),
        ));
    }
    if mu0.channels() != 1 {
        return Err(Error::InvalidParam(
            "smooth fields are single-channel".into(),
        ));
    }
    if region.target_count() == 0 {
        return Err(Error::InvalidParam("region is empty".into()));
    }
    if mu_smooth < 0.0 {
        return Err(Error::InvalidParam(
            "smoothness weight must be nonnegative".into(),
        ));
    }
    let mut mu = mu0.clone();
    if mu_smooth == 0.0 {
        return Ok(mu);
    }
    let members: Vec<(usize, usize)> = region.target_pixels().collect();
    for _ in 0..max_sweeps {
        let residual = poisson_residual(&mu, mu0, region, lambda, mu_smooth);
        if residual < POISSON_TOL {
            return Ok(mu);
        }
        for &(x, y) in &members {
            let lam = weight_at(lambda, x, y);
            let mut nsum = 0.0;
            let mut deg = 0.0;
            for (qx, qy) in neighbors(x, y, region) {
                nsum += mu.sample(qx, qy, 0);
                deg += 1.0;
            }
            let denom = lam + mu_smooth * deg;
            if denom > 0.0 {
                mu.set_sample(x, y, 0, (lam * mu0.sample(x, y, 0) + mu_smooth * nsum) / denom);
            }
        }
    }
    Err(Error::NoConvergence {
        residual: poisson_residual(&mu, mu0, region, lambda, mu_smooth),
    })
}

fn neighbors<'m>(
    x: usize,
    y: usize,
    region: &'m Mask,
) -> impl Iterator<Item = (usize, usize)> + 'm {
    let (xi, yi) = (x as i64, y as i64);
    [(xi - 1, yi), (xi + 1, yi), (xi, yi - 1), (xi, yi + 1)]
        .into_iter()
        .filter(move |&(qx, qy)| {
            qx >= 0
                && qy >= 0
                && (qx as usize) < region.width()
                && (qy as usize) < region.height()
                && region.is_target(qx as usize, qy as usize)
        })
        .map(|(qx, qy)| (qx as usize, qy as usize))
}

/// Largest pointwise violation of the discrete equation over the
/// region.
pub fn poisson_residual(
    mu: &Raster,
    mu0: &Raster,
    region: &Mask,
    lambda: Option<&Raster>,
    mu_smooth: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in region.target_pixels() {
        let lam = weight_at(lambda, x, y);
        let here = mu.sample(x, y, 0);
        let lap: f64 = neighbors(x, y, region)
            .map(|(qx, qy)| mu.sample(qx, qy, 0) - here)
            .sum();
        let r = lam * (here - mu0.sample(x, y, 0)) - mu_smooth * lap;
        worst = worst.max(r.abs());
    }
    worst
}

/// Net flow the solution implies across the region edge, recovered by
/// solving each boundary cell's stencil for its missing ghost faces. A
/// zero-flux discretization leaves only the residual divided by the
/// diffusion weight; anything built on fixed ghost values shows up at
/// full field magnitude.
pub fn boundary_flux(
    mu: &Raster,
    mu0: &Raster,
    region: &Mask,
    lambda: Option<&Raster>,
    mu_smooth: f64,
) -> f64 {
    if mu_smooth == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for (x, y) in region.target_pixels() {
        let inside = neighbors(x, y, region).count();
        let borders_outside = inside < 4
            || x == 0
            || y == 0
            || x == region.width() - 1
            || y == region.height() - 1;
        if !borders_outside {
            continue;
        }
        let lam = weight_at(lambda, x, y);
        let here = mu.sample(x, y, 0);
        let lap: f64 = neighbors(x, y, region)
            .map(|(qx, qy)| mu.sample(qx, qy, 0) - here)
            .sum();
        let implied = lam * (here - mu0.sample(x, y, 0)) / mu_smooth - lap;
        worst = worst.max(implied.abs());
    }
    worst
}

/// Smooth field for each phase of a segmentation.
pub fn smooth_phases(
    raster: &Raster,
    field: &LevelSet,
    params: &SegParams,
) -> Result<(Raster, Raster)> {
    let gray = luminance(raster);
    let (one, two) = phase_masks(field);
    let lambda = params.lambda.as_ref();
    let solve = |m: &Mask| solve_damped_poisson(&gray, m, lambda, params.mu_smooth, POISSON_SWEEP_CAP);
    Ok((solve(&one)?, solve(&two)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn split_field(w: usize, h: usize) -> LevelSet {
        LevelSet::new(w, h, |x, _| if x < w / 2 { 1.0 } else { -1.0 })
    }

    #[test]
    fn means_of_two_constant_phases() {
        let img = Raster::from_fn(10, 8, 1, |x, _, _| if x < 5 { 100.0 } else { 50.0 }).unwrap();
        let field = split_field(10, 8);
        assert_eq!(region_means(&img, &field, None), (100.0, 50.0));
    }

    #[test]
    fn means_of_uniform_image_coincide() {
        let img = Raster::from_fn(9, 9, 1, |_, _, _| 42.0).unwrap();
        let field = LevelSet::checkerboard(9, 9);
        assert_eq!(region_means(&img, &field, None), (42.0, 42.0));
    }

    #[test]
    fn means_match_direct_weighted_loop() {
        let img = fixtures::random_raster(13, 11, 1, 1);
        let lam = fixtures::random_raster(13, 11, 1, 2);
        let field = LevelSet::new(13, 11, |x, y| ((x * 7 + y * 3) % 5) as f64 - 2.0);
        let (c1, c2) = region_means(&img, &field, Some(&lam));
        let mut num = [0.0; 2];
        let mut den = [0.0; 2];
        for y in 0..11 {
            for x in 0..13 {
                let k = if field.phi(x, y) > 0.0 { 0 } else { 1 };
                num[k] += lam.sample(x, y, 0) * img.sample(x, y, 0);
                den[k] += lam.sample(x, y, 0);
            }
        }
        approx::assert_relative_eq!(c1, num[0] / den[0], max_relative = 1e-12);
        approx::assert_relative_eq!(c2, num[1] / den[1], max_relative = 1e-12);
    }

    #[test]
    fn empty_phase_keeps_its_previous_mean() {
        let img = Raster::from_fn(6, 6, 1, |_, _, _| 10.0).unwrap();
        let mut field = LevelSet::new(6, 6, |_, _| 1.0);
        field.c2 = 77.0;
        assert_eq!(region_means(&img, &field, None), (10.0, 77.0));
    }

    #[test]
    fn energy_of_perfect_split_without_length_term_is_zero() {
        let img = Raster::from_fn(12, 10, 1, |x, _, _| if x < 6 { 0.0 } else { 255.0 }).unwrap();
        let mut field = split_field(12, 10);
        let params = SegParams {
            nu: 0.0,
            ..SegParams::default()
        };
        let (c1, c2) = region_means(&img, &field, None);
        field.c1 = c1;
        field.c2 = c2;
        assert_eq!(ms_energy(&img, &field, &params), 0.0);
    }

    #[test]
    fn energy_matches_direct_summation() {
        let img = fixtures::random_raster(9, 7, 1, 5);
        let mut field = LevelSet::new(9, 7, |x, y| ((x + 2 * y) % 4) as f64 - 1.5);
        field.c1 = 120.0;
        field.c2 = 90.0;
        let params = SegParams {
            nu: 3.0,
            ..SegParams::default()
        };
        let got = ms_energy(&img, &field, &params);
        let mut want = 0.0;
        for y in 0..7 {
            for x in 0..9 {
                let c = if field.phi(x, y) > 0.0 { 120.0 } else { 90.0 };
                want += (img.sample(x, y, 0) - c).powi(2);
            }
        }
        for y in 0..7 {
            for x in 0..9 {
                let p = field.phi(x, y);
                let dx = if x + 1 < 9 { field.phi(x + 1, y) - p } else { 0.0 };
                let dy = if y + 1 < 7 { field.phi(x, y + 1) - p } else { 0.0 };
                let delta = 1.5 / (std::f64::consts::PI * (1.5 * 1.5 + p * p));
                want += 3.0 * delta * (dx * dx + dy * dy).sqrt();
            }
        }
        approx::assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn phase_means_minimize_the_energy() {
        let params = SegParams {
            nu: 0.0,
            ..SegParams::default()
        };
        for seed in 0..4 {
            let img = fixtures::random_raster(11, 9, 1, seed);
            let mut field = LevelSet::new(11, 9, |x, y| ((x * 3 + y) % 7) as f64 - 3.0);
            let (c1, c2) = region_means(&img, &field, None);
            field.c1 = c1;
            field.c2 = c2;
            let base = ms_energy(&img, &field, &params);
            for (d1, d2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let mut bumped = field.clone();
                bumped.c1 += d1;
                bumped.c2 += d2;
                assert!(ms_energy(&img, &bumped, &params) >= base);
            }
        }
    }

    #[test]
    fn uniform_image_without_length_term_is_a_fixed_point() {
        let img = Raster::from_fn(20, 20, 1, |_, _, _| 99.0).unwrap();
        let init = LevelSet::checkerboard(20, 20);
        let params = SegParams {
            nu: 0.0,
            max_iters: 30,
            ..SegParams::default()
        };
        let seg = evolve_level_set(&img, init.clone(), &params).unwrap();
        assert_eq!(seg.field.phi, init.phi);
        assert!(seg.converged);
        assert!(seg.trace.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn clean_two_constant_image_is_segmented_exactly() {
        let img = fixtures::two_constant(64, 64, 0.0, 255.0, 0.0, 1);
        let seg = evolve_level_set(&img, LevelSet::checkerboard(64, 64), &SegParams::default())
            .unwrap();
        assert!(seg.field.c1.abs() < 2.0, "c1 = {}", seg.field.c1);
        assert!((seg.field.c2 - 255.0).abs() < 2.0, "c2 = {}", seg.field.c2);
        let wrong: usize = (0..64 * 64)
            .filter(|i| {
                let (x, y) = (i % 64, i / 64);
                seg.field.in_phase_one(x, y) != (x < 32)
            })
            .count();
        assert!(
            wrong <= 64 * 64 / 100,
            "{wrong} of {} labels disagree",
            64 * 64
        );
    }

    #[test]
    fn energy_trace_never_increases() {
        let img = fixtures::two_constant(48, 48, 60.0, 200.0, 10.0, 3);
        let seg = evolve_level_set(&img, LevelSet::checkerboard(48, 48), &SegParams::default())
            .unwrap();
        for pair in seg.trace.windows(2) {
            assert!(pair[1] <= pair[0], "energy rose: {} -> {}", pair[0], pair[1]);
        }
        assert!(seg.accepted > 0);
    }

    #[test]
    fn labels_ignore_a_constant_intensity_offset() {
        let base = fixtures::two_constant(64, 64, 40.0, 180.0, 0.0, 7);
        let shifted = Raster::from_fn(64, 64, 1, |x, y, _| base.sample(x, y, 0) + 30.0).unwrap();
        let a = evolve_level_set(&base, LevelSet::checkerboard(64, 64), &SegParams::default())
            .unwrap();
        let b = evolve_level_set(&shifted, LevelSet::checkerboard(64, 64), &SegParams::default())
            .unwrap();
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(a.field.in_phase_one(x, y), b.field.in_phase_one(x, y));
            }
        }
        approx::assert_relative_eq!(a.field.c1 + 30.0, b.field.c1, max_relative = 1e-9);
    }

    #[test]
    fn darker_phase_is_reported_first() {
        let img = fixtures::two_constant(32, 32, 220.0, 30.0, 0.0, 2);
        let seg = evolve_level_set(&img, LevelSet::checkerboard(32, 32), &SegParams::default())
            .unwrap();
        assert!(seg.field.c1 <= seg.field.c2);
    }

    #[test]
    fn reinitialization_preserves_phases_and_approximates_distance() {
        let field = LevelSet::new(32, 32, |x, y| {
            8.0 - (((x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2)).sqrt())
        });
        let scaled = LevelSet {
            phi: field.phi.iter().map(|v| v * 37.0).collect(),
            ..field.clone()
        };
        let r = reinitialized(&scaled).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(r.in_phase_one(x, y), field.in_phase_one(x, y));
                let truth = field.phi(x, y);
                if truth.abs() < 6.0 {
                    assert!(
                        (r.phi(x, y) - truth).abs() < 2.0,
                        "at ({x},{y}): {} vs {truth}",
                        r.phi(x, y)
                    );
                }
            }
        }
    }

    #[test]
    fn phase_masks_partition_the_grid() {
        let field = LevelSet::checkerboard(15, 13);
        let (one, two) = phase_masks(&field);
        assert_eq!(one.target_count() + two.target_count(), 15 * 13);
        for y in 0..13 {
            for x in 0..15 {
                assert_ne!(one.is_target(x, y), two.is_target(x, y));
            }
        }
        let all_one = LevelSet::new(4, 4, |_, _| 1.0);
        let (one, two) = phase_masks(&all_one);
        assert_eq!(one.target_count(), 16);
        assert_eq!(two.target_count(), 0);
    }

    #[test]
    fn poisson_constant_input_is_returned_unchanged() {
        let mu0 = Raster::from_fn(16, 16, 1, |_, _, _| 88.0).unwrap();
        let region = fixtures::block_mask(16, 16, 0.4);
        let mu = solve_damped_poisson(&mu0, &region, None, 10.0, POISSON_SWEEP_CAP).unwrap();
        assert_eq!(mu, mu0);
    }

    #[test]
    fn poisson_zero_smoothness_returns_the_data() {
        let mu0 = fixtures::random_raster(12, 12, 1, 8);
        let region = fixtures::block_mask(12, 12, 0.5);
        let mu = solve_damped_poisson(&mu0, &region, None, 0.0, POISSON_SWEEP_CAP).unwrap();
        assert_eq!(mu, mu0);
    }

    #[test]
    fn poisson_solution_satisfies_the_equation_and_leaks_nothing() {
        let mu0 = fixtures::random_raster(32, 32, 1, 4);
        let region = fixtures::scatter_mask(32, 32, 0.45, 6);
        let mu = solve_damped_poisson(&mu0, &region, None, 10.0, POISSON_SWEEP_CAP).unwrap();
        let res = poisson_residual(&mu, &mu0, &region, None, 10.0);
        assert!(res < 1e-4, "residual {res}");
        let flux = boundary_flux(&mu, &mu0, &region, None, 10.0);
        assert!(flux < 1e-6, "flux {flux}");
        for y in 0..32 {
            for x in 0..32 {
                if !region.is_target(x, y) {
                    assert_eq!(mu.sample(x, y, 0), mu0.sample(x, y, 0));
                }
            }
        }
    }

    #[test]
    fn poisson_smoothing_pulls_toward_neighbor_consensus() {
        let mu0 = Raster::from_fn(9, 9, 1, |x, y, _| {
            if (x, y) == (4, 4) {
                200.0
            } else {
                50.0
            }
        })
        .unwrap();
        let region = Mask::from_fn(9, 9, |_, _| true).unwrap();
        let mu = solve_damped_poisson(&mu0, &region, None, 10.0, POISSON_SWEEP_CAP).unwrap();
        let v = mu.sample(4, 4, 0);
        assert!(v < 200.0 && v > 50.0);
    }

    #[test]
    fn poisson_gives_up_with_the_final_residual() {
        let mu0 = fixtures::random_raster(16, 16, 1, 3);
        let region = Mask::from_fn(16, 16, |_, _| true).unwrap();
        let err = solve_damped_poisson(&mu0, &region, None, 1e6, 3).unwrap_err();
        match err {
            Error::NoConvergence { residual } => assert!(residual > 0.0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn smooth_phases_cover_both_sides() {
        let img = fixtures::two_constant(24, 24, 50.0, 200.0, 5.0, 9);
        let mut field = split_field(24, 24);
        let (c1, c2) = region_means(&img, &field, None);
        field.c1 = c1;
        field.c2 = c2;
        let params = SegParams::default();
        let (a, b) = smooth_phases(&img, &field, &params).unwrap();
        let (one, two) = phase_masks(&field);
        assert!(poisson_residual(&a, &img, &one, None, params.mu_smooth) < 1e-4);
        assert!(poisson_residual(&b, &img, &two, None, params.mu_smooth) < 1e-4);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let img = fixtures::random_raster(8, 8, 1, 0);
        let bad_dt = SegParams {
            dt: 0.0,
            ..SegParams::default()
        };
        assert!(evolve_level_set(&img, LevelSet::checkerboard(8, 8), &bad_dt).is_err());
        let bad_map = SegParams {
            lambda: Some(fixtures::random_raster(4, 4, 1, 0)),
            ..SegParams::default()
        };
        assert!(evolve_level_set(&img, LevelSet::checkerboard(8, 8), &bad_map).is_err());
        let wrong_size = LevelSet::checkerboard(5, 5);
        assert!(evolve_level_set(&img, wrong_size, &SegParams::default()).is_err());
    }
}
