//! Command line surface over the patchfill library: fill, benchmark,
//! segment, layer separation and energy measurement. Exit codes: 0
//! success, 1 processing failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use patchfill::energy::{global_patch_energy, psnr_over};
use patchfill::engine::{inpaint, FillReport, InpaintParams};
use patchfill::io::{load_image, load_mask, save_image, sentinel_mask};
use patchfill::seg::{evolve_level_set, LevelSet, SegParams};
use patchfill::som::{assign_layers, inpaint_by_layers, mean_bmu_distance, train_som, LayerParams};
use patchfill::threads::resolve_threads;
use patchfill::{bilateral::BilateralParams, fixtures, Mask, Raster};

#[derive(Parser)]
#[command(name = "patchfill", version, about = "Exemplar-based image repair toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill the damaged region by priority-ordered exemplar copying.
    Inpaint(InpaintArgs),
    /// Time pruned against exhaustive search on built-in fixtures.
    Bench(BenchArgs),
    /// Two-phase piecewise-constant segmentation.
    Segment(SegmentArgs),
    /// Train the color map and write the layer separation.
    Layers(LayersArgs),
    /// Patch energy of a completed image over its former damage.
    Energy(EnergyArgs),
}

#[derive(Args)]
struct InpaintArgs {
    /// Input image (PGM, PPM or PNG).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Damage mask image; nonzero marks damage. Wins over --marker.
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
    /// Pixel value that marks damage in-band (all channels equal).
    #[arg(long, value_name = "VALUE")]
    marker: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Odd patch side length, at least 5.
    #[arg(long, default_value_t = 9)]
    patch: usize,
    /// Search window radius around the front pixel; whole image if absent.
    #[arg(long)]
    radius: Option<usize>,
    /// Exhaustive candidate scan instead of pruned search.
    #[arg(long = "no-sea")]
    no_sea: bool,
    /// Pre-smooth the matching guide: spatial,range sigmas.
    #[arg(long, value_name = "SIGMAS,SIGMAR")]
    bilateral: Option<String>,
    /// Color-layer grid; when given the fill is layer-restricted.
    #[arg(long, value_name = "MxN")]
    grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; INPAINT_THREADS, else 1, when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the fill report to this file.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Built-in fixture set to run.
    #[arg(long, default_value = "all", value_parser = ["two-texture", "periodic", "all"])]
    fixture: String,
    /// Comma-separated odd patch sizes.
    #[arg(long, default_value = "9")]
    patch: String,
    /// Comma-separated subset of sea,brute.
    #[arg(long, default_value = "sea,brute")]
    strategies: String,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Phase-label image, 0 for the darker phase and 255 for the other.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Interface length weight.
    #[arg(long, default_value_t = 650.25)]
    nu: f64,
    /// Per-pixel data weight image, scaled from [0,255] to [0,1].
    #[arg(long = "lambda-map", value_name = "FILE")]
    lambda_map: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Write the per-iteration energy trace CSV here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct LayersArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Damage mask; damaged pixels are excluded from training.
    #[arg(long, value_name = "FILE")]
    mask: Option<PathBuf>,
    #[arg(long, value_name = "VALUE")]
    marker: Option<f64>,
    /// Layer-index image: index scaled into 0..255, damage at 255.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, default_value = "4x4", value_name = "MxN")]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-neuron hit-count CSV here.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EnergyArgs {
    /// Completed image to score.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// The region that was filled.
    #[arg(long = "orig-mask", value_name = "FILE")]
    orig_mask: PathBuf,
    #[arg(long, default_value_t = 9)]
    patch: usize,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Fault(String),
}

impl From<patchfill::Error> for Failure {
    fn from(e: patchfill::Error) -> Self {
        Failure::Fault(e.to_string())
    }
}

type AppResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Inpaint(a) => cmd_inpaint(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Layers(a) => cmd_layers(a),
        Command::Energy(a) => cmd_energy(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Fault(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn checked_patch(patch: usize) -> AppResult<usize> {
    if patch % 2 == 0 {
        return Err(usage("patch size must be odd"));
    }
    if patch < 5 {
        return Err(usage(format!("patch size must be at least 5, got {patch}")));
    }
    Ok(patch)
}

fn parse_pair(s: &str, sep: char, what: &str) -> AppResult<(String, String)> {
    let mut it = s.splitn(2, sep);
    match (it.next(), it.next()) {
        (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
            Ok((a.to_string(), b.to_string()))
        }
        _ => Err(usage(format!("{what} must look like A{sep}B, got {s:?}"))),
    }
}

fn parse_grid(s: &str) -> AppResult<(usize, usize)> {
    let norm = s.to_ascii_lowercase();
    let (m, n) = parse_pair(&norm, 'x', "grid")?;
    let rows: usize = m.parse().map_err(|_| usage(format!("bad grid rows {m:?}")))?;
    let cols: usize = n.parse().map_err(|_| usage(format!("bad grid cols {n:?}")))?;
    if rows == 0 || cols == 0 {
        return Err(usage("grid dimensions must be positive"));
    }
    if rows * cols > 255 {
        return Err(usage(format!(
            "grid {rows}x{cols} has {} cells, at most 255 layers are supported",
            rows * cols
        )));
    }
    Ok((rows, cols))
}

fn parse_bilateral(s: &str) -> AppResult<BilateralParams> {
    let (a, b) = parse_pair(s, ',', "bilateral sigmas")?;
    let sigma_s: f64 = a
        .parse()
        .map_err(|_| usage(format!("bad spatial sigma {a:?}")))?;
    let sigma_r: f64 = b
        .parse()
        .map_err(|_| usage(format!("bad range sigma {b:?}")))?;
    BilateralParams::new(sigma_s, sigma_r).map_err(|e| usage(e.to_string()))
}

/// Mask file when given, else in-band marker detection.
fn resolve_mask(image: &Raster, mask: &Option<PathBuf>, marker: Option<f64>) -> AppResult<Mask> {
    match (mask, marker) {
        (Some(path), _) => {
            let m = load_mask(path)?;
            if !m.matches(image) {
                return Err(Failure::Fault(format!(
                    "mask is {}x{}, image is {}x{}",
                    m.width(),
                    m.height(),
                    image.width(),
                    image.height()
                )));
            }
            Ok(m)
        }
        (None, Some(value)) => {
            if !(0.0..=255.0).contains(&value) {
                return Err(usage(format!("marker {value} outside [0, 255]")));
            }
            Ok(sentinel_mask(image, value)?)
        }
        (None, None) => Err(usage("need either --mask or --marker")),
    }
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text)
        .map_err(|e| Failure::Fault(format!("cannot write {}: {e}", path.display())))
}

/// All stdout goes through here. A reader that hangs up mid-stream
/// (`patchfill bench | head`) is not a failure; the rest of the output
/// is dropped and the command finishes normally. File side effects
/// happen before any emit so a closed pipe can never lose them.
fn emit(text: &str) -> AppResult<()> {
    match io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::Fault(format!("cannot write to stdout: {e}"))),
    }
}

fn report_block(report: &FillReport, energy: f64) -> String {
    format!(
        "iterations={}\nexamined={}\npruned={}\nseconds={:.6}\nfallbacks={}\nenergy={}\n",
        report.iterations,
        report.examined,
        report.pruned,
        report.seconds,
        report.fallbacks,
        energy
    )
}

fn cmd_inpaint(a: InpaintArgs) -> AppResult<()> {
    let patch = checked_patch(a.patch)?;
    if let Some(r) = a.radius {
        if r < patch {
            return Err(usage(format!(
                "search radius {r} is smaller than the patch size {patch}"
            )));
        }
    }
    let bilateral = a.bilateral.as_deref().map(parse_bilateral).transpose()?;
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let image = load_image(&a.input)?;
    let mask = resolve_mask(&image, &a.mask, a.marker)?;

    let params = InpaintParams {
        patch_size: patch,
        search_radius: a.radius,
        use_sea: !a.no_sea,
        bilateral,
        rng_seed: a.seed,
        threads: a.threads.unwrap_or(0),
        allow_filled_sources: false,
    };
    let (out, report) = match grid {
        None => inpaint(&image, &mask, &params)?,
        Some((rows, cols)) => {
            let layers = LayerParams {
                rows,
                cols,
                seed: a.seed,
                ..LayerParams::default()
            };
            inpaint_by_layers(&image, &mask, &layers, &params)?
        }
    };
    save_image(&a.out, &out)?;
    let energy = global_patch_energy(&out, &mask, patch, resolve_threads(a.threads))?;
    let block = report_block(&report, energy);
    if let Some(path) = &a.report {
        write_text(path, &block)?;
    }
    emit(&block)
}

struct BenchCase {
    id: &'static str,
    image: Raster,
    mask: Mask,
}

fn bench_cases(which: &str) -> Vec<BenchCase> {
    let mut cases = Vec::new();
    if which != "periodic" {
        cases.push(BenchCase {
            id: "two-texture-400x300",
            image: fixtures::two_texture(400, 300, 7),
            mask: fixtures::block_mask(400, 300, 0.1),
        });
    }
    if which != "two-texture" {
        cases.push(BenchCase {
            id: "periodic-60x60",
            image: fixtures::periodic_tile(60, 60),
            mask: Mask::from_fn(60, 60, |x, y| (20..40).contains(&x) && (20..40).contains(&y))
                .expect("fixture dimensions are positive"),
        });
    }
    cases
}

fn cmd_bench(a: BenchArgs) -> AppResult<()> {
    let mut patches = Vec::new();
    for tok in a.patch.split(',') {
        let p: usize = tok
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad patch size {tok:?}")))?;
        patches.push(checked_patch(p)?);
    }
    let mut strategies = Vec::new();
    for tok in a.strategies.split(',') {
        match tok.trim() {
            "sea" | "brute" => {
                let t = tok.trim();
                if !strategies.contains(&t.to_string()) {
                    strategies.push(t.to_string());
                }
            }
            other => return Err(usage(format!("unknown strategy {other:?}"))),
        }
    }
    if strategies.is_empty() {
        return Err(usage("no strategies selected"));
    }

    let workers = resolve_threads(a.threads);
    let mut csv = String::from("id,w,h,mask_frac,patch,strategy,seconds,examined,pruned,energy,psnr\n");
    for case in bench_cases(&a.fixture) {
        let (w, h) = (case.image.width(), case.image.height());
        let frac = case.mask.target_count() as f64 / (w * h) as f64;
        for &patch in &patches {
            let mut reference: Option<(Raster, f64)> = None;
            for strategy in &strategies {
                let params = InpaintParams {
                    patch_size: patch,
                    use_sea: strategy == "sea",
                    threads: workers,
                    ..InpaintParams::default()
                };
                let (out, report) = inpaint(&case.image, &case.mask, &params)?;
                let energy = match &reference {
                    Some((prev, energy)) => {
                        if out != *prev {
                            return Err(Failure::Fault(format!(
                                "strategy outputs differ on {} patch {patch}",
                                case.id
                            )));
                        }
                        *energy
                    }
                    None => {
                        let energy = global_patch_energy(&out, &case.mask, patch, workers)?;
                        reference = Some((out.clone(), energy));
                        energy
                    }
                };
                let psnr = psnr_over(&out, &case.image, &case.mask);
                writeln!(
                    csv,
                    "{},{w},{h},{frac:.4},{patch},{strategy},{:.6},{},{},{energy},{psnr}",
                    case.id, report.seconds, report.examined, report.pruned
                )
                .expect("string writes cannot fail");
            }
        }
    }
    match &a.report {
        Some(path) => write_text(path, &csv),
        None => emit(&csv),
    }
}

fn cmd_segment(a: SegmentArgs) -> AppResult<()> {
    if a.iters == 0 {
        return Err(usage("iteration budget must be at least 1"));
    }
    if !(a.dt > 0.0) {
        return Err(usage("dt must be positive"));
    }
    let image = load_image(&a.input)?;
    let lambda = match &a.lambda_map {
        None => None,
        Some(path) => {
            let map = load_image(path)?;
            if map.channels() != 1 {
                return Err(Failure::Fault("weight map must be single-channel".into()));
            }
            Some(
                Raster::from_fn(map.width(), map.height(), 1, |x, y, _| {
                    map.sample(x, y, 0) / 255.0
                })?,
            )
        }
    };
    let params = SegParams {
        lambda,
        nu: a.nu,
        dt: a.dt,
        max_iters: a.iters,
        ..SegParams::default()
    };
    let init = LevelSet::checkerboard(image.width(), image.height());
    let seg = evolve_level_set(&image, init, &params)?;

    let labels = Raster::from_fn(image.width(), image.height(), 1, |x, y, _| {
        if seg.field.in_phase_one(x, y) {
            0.0
        } else {
            255.0
        }
    })?;
    save_image(&a.out, &labels)?;
    if let Some(path) = &a.report {
        let mut csv = String::from("iter,energy\n");
        for (i, e) in seg.trace.iter().enumerate() {
            writeln!(csv, "{i},{e}").expect("string writes cannot fail");
        }
        write_text(path, &csv)?;
    }
    emit(&format!(
        "c1={}\nc2={}\niterations={}\naccepted={}\nconverged={}\n",
        seg.field.c1, seg.field.c2, seg.iterations, seg.accepted, seg.converged
    ))
}

fn cmd_layers(a: LayersArgs) -> AppResult<()> {
    let (rows, cols) = parse_grid(&a.grid)?;
    if rows * cols < 2 {
        return Err(usage("layer separation needs at least 2 grid cells"));
    }
    let image = load_image(&a.input)?;
    let mask = match (&a.mask, a.marker) {
        (None, None) => Mask::new(image.width(), image.height())?,
        _ => resolve_mask(&image, &a.mask, a.marker)?,
    };
    let defaults = LayerParams::default();
    let radius0 = (rows.max(cols) as f64) / 2.0;
    let grid = train_som(
        &image,
        &mask,
        rows,
        cols,
        defaults.epochs,
        defaults.lr0,
        radius0,
        a.seed,
    )?;
    let map = assign_layers(&image, &mask, &grid);

    // Index n of k scales to n*255/k, so 255 stays free for damage.
    let cells = (rows * cols) as f64;
    let index_image = Raster::from_fn(image.width(), image.height(), 1, |x, y, _| {
        match map.layer(x, y) {
            Some(k) => (f64::from(k) * 255.0 / cells).round(),
            None => 255.0,
        }
    })?;
    save_image(&a.out, &index_image)?;

    let qe = mean_bmu_distance(&image, &mask, &grid);
    if let Some(path) = &a.report {
        let mut csv = String::from("layer,hits\n");
        for (k, hits) in map.hit_counts().iter().enumerate() {
            writeln!(csv, "{k},{hits}").expect("string writes cannot fail");
        }
        write_text(path, &csv)?;
    }
    emit(&format!("layers={}\nqe={qe}\n", rows * cols))
}

fn cmd_energy(a: EnergyArgs) -> AppResult<()> {
    let patch = checked_patch(a.patch)?;
    let image = load_image(&a.input)?;
    let mask = load_mask(&a.orig_mask)?;
    if !mask.matches(&image) {
        return Err(Failure::Fault(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            image.width(),
            image.height()
        )));
    }
    let energy = global_patch_energy(&image, &mask, patch, resolve_threads(a.threads))?;
    emit(&format!("{energy}\n"))
}
