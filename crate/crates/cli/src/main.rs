//! `mtv`: denoising, verification, sweeps, grid-refinement experiments and
//! benchmarks for mixed-derivative total variation.
//!
//! Exit codes: 0 success, 1 bad flags or failed run, 2 solver did not
//! converge (outputs are still written).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtv::bench::{run_bench, BenchConfig, TuneMode};
use mtv::checks::{all_passed, run_suite, SuiteConfig};
use mtv::grid::{refine_by, GridLevel, PixelImage};
use mtv::io::{list_images, load_image, read_csv, save_image, write_csv, ReportRow, DATA_DIR_ENV};
use mtv::norms::{reparametrized_to_exact, Parametrization};
use mtv::operators::{add_gaussian_noise, measure, psnr, DenoiseProblem};
use mtv::solvers::{denoise_dual_apg, sweep_theta_lambda, SolverConfig, TuningConfig};
use mtv::MtvError;

#[derive(Parser, Debug)]
#[command(name = "mtv", version, about = "Mixed-derivative total variation denoising and checks")]
struct Cli {
    /// Worker threads for parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Run the randomized invariant suite.
    Verify(VerifyArgs),
    /// PSNR over a (theta, lambda) grid for one clean image.
    Sweep(SweepArgs),
    /// Solve the same problem on successively refined grids.
    Refine(RefineArgs),
    /// TV versus MTV over a directory of clean images.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct SolverArgs {
    /// Stopping tolerance on the relative duality gap.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig::default().with_tol(self.tol).with_max_iter(self.max_iter)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Param {
    /// `θ h11; (1−θ/2) h10; (1−θ/2) h01` weights.
    Reparametrized,
    /// The exact θ-norm.
    Exact,
}

impl From<Param> for Parametrization {
    fn from(p: Param) -> Self {
        match p {
            Param::Reparametrized => Parametrization::Reparametrized,
            Param::Exact => Parametrization::Exact,
        }
    }
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    /// Input image (.pgm or .png).
    #[arg(long)]
    input: PathBuf,
    /// Output image (.pgm or .png).
    #[arg(long)]
    output: PathBuf,
    /// CSV report; defaults to the output path with a .csv extension.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Add Gaussian noise of this standard deviation to the input first and
    /// report PSNR against the clean input.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Param::Reparametrized)]
    param: Param,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 25)]
    instances: usize,
    /// Corrupt one check to test the harness; the run must then fail.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Clean image.
    #[arg(long)]
    input: PathBuf,
    /// CSV with one row per grid point.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 25.0 / 255.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated theta values.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    theta_grid: String,
    /// Comma-separated lambda values.
    #[arg(long, default_value = "0.02,0.04,0.06,0.08,0.1,0.12")]
    lambda_grid: String,
    #[arg(long, value_enum, default_value_t = Param::Reparametrized)]
    param: Param,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct RefineArgs {
    /// Image whose top-left crop is the level-N data.
    #[arg(long)]
    input: PathBuf,
    /// CSV with one row per level.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated grid levels, each at least the level of the crop.
    #[arg(long)]
    levels: String,
    /// Side of the top-left square crop (rounded down to a power of two).
    #[arg(long, default_value_t = 32)]
    crop: usize,
    /// Regularization weight in the reparametrized convention at the crop
    /// level; converted to the exact norm, which refinement preserves.
    #[arg(long, default_value_t = 0.08)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Mode {
    PerImage,
    PerSigma,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of clean grayscale images.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: PathBuf,
    /// Per-row CSV.
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated noise levels on the [0, 1] intensity scale.
    #[arg(long, default_value = "0.0196078431372549,0.0588235294117647,0.0980392156862745")]
    sigma: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::PerImage)]
    mode: Mode,
    /// Fix MTV's theta and tune only lambda.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 5_000)]
    max_iter: usize,
}

/// Failure with the exit code it maps to.
struct Failure(u8, String);

impl From<MtvError> for Failure {
    fn from(e: MtvError) -> Self {
        Failure(1, e.to_string())
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Denoise(a) => cmd_denoise(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Refine(a) => cmd_refine(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure(1, msg.into())
}

fn parse_list(name: &str, s: &str) -> std::result::Result<Vec<f64>, Failure> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(bad(format!("--{name} must list at least one value")));
    }
    items
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("--{name}: not a number: {t:?}"))))
        .collect()
}

fn image_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_denoise(args: &DenoiseArgs) -> CmdResult {
    let clean = load_image(&args.input)?;
    let y = match args.sigma {
        Some(s) => add_gaussian_noise(&clean, s, args.seed)?,
        None => clean.clone(),
    };
    let prob = DenoiseProblem::new(y, args.lambda, args.theta, args.param.into())?;
    let start = Instant::now();
    let (a, rep) = denoise_dual_apg(&prob, &args.solver.config())?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    save_image(&a, &args.output)?;
    let row = ReportRow {
        image_id: image_id(&args.input),
        sigma: args.sigma.unwrap_or(0.0),
        lambda: args.lambda,
        theta: args.theta,
        psnr_db: psnr(&a, &clean)?,
        iterations: rep.iterations,
        runtime_ms,
        objective: rep.final_objective,
        method: "denoise".into(),
    };
    let report = args.report.clone().unwrap_or_else(|| args.output.with_extension("csv"));
    write_csv(&[row], &report)?;
    println!(
        "{} iterations, objective {:.12e}, residual {:.2e}{}",
        rep.iterations,
        rep.final_objective,
        rep.residual,
        if rep.converged { "" } else { " (not converged)" }
    );
    Ok(if rep.converged { 0 } else { 2 })
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let cfg = SuiteConfig {
        seed: args.seed,
        instances: args.instances,
        inject_fault: args.inject_fault,
    };
    let results = run_suite(&cfg)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        let status = match (r.passed, r.informational) {
            (true, _) => "pass",
            (false, true) => "info",
            (false, false) => "FAIL",
        };
        println!("{status:<4}  {:<15} {:<width$}  {}", r.module, r.name, r.detail);
    }
    let ok = all_passed(&results);
    let failed = results.iter().filter(|r| !r.passed && !r.informational).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(if ok { 0 } else { 1 })
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let thetas = parse_list("theta-grid", &args.theta_grid)?;
    let lambdas = parse_list("lambda-grid", &args.lambda_grid)?;
    let clean = load_image(&args.input)?;
    let table = sweep_theta_lambda(&clean, args.sigma, &thetas, &lambdas, args.seed, args.param.into(), &args.solver.config())?;
    let id = image_id(&args.input);
    let rows: Vec<ReportRow> = table
        .entries
        .iter()
        .map(|e| ReportRow {
            image_id: id.clone(),
            sigma: args.sigma,
            lambda: e.lambda,
            theta: e.theta,
            psnr_db: e.psnr_db,
            iterations: e.iterations,
            runtime_ms: 0.0,
            objective: e.objective,
            method: "sweep".into(),
        })
        .collect();
    write_csv(&rows, &args.output)?;
    let best = table.best_entry();
    println!(
        "{} grid points; best lambda {} theta {} at {:.3} dB",
        rows.len(),
        best.lambda,
        best.theta,
        best.psnr_db
    );
    let converged = table.entries.iter().all(|e| e.converged);
    Ok(if converged { 0 } else { 2 })
}

fn cmd_refine(args: &RefineArgs) -> CmdResult {
    let levels: Vec<u32> = parse_list("levels", &args.levels)?
        .into_iter()
        .map(|l| {
            if l >= 0.0 && l.fract() == 0.0 && l <= 12.0 {
                Ok(l as u32)
            } else {
                Err(bad(format!("--levels: {l} is not a level in 0..=12")))
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    let img = load_image(&args.input)?;
    let fits = args.crop.min(img.rows()).min(img.cols());
    if fits == 0 {
        return Err(bad("--crop must be positive"));
    }
    let side = 1usize << fits.ilog2();
    let y = img.crop(side, side)?;
    let base_level = GridLevel::from_side(side).expect("power of two");
    if let Some(&l) = levels.iter().find(|&&l| l < base_level.n()) {
        return Err(MtvError::LevelTooCoarse {
            level: base_level.n(),
            target: l,
        }
        .into());
    }
    let (lambda, theta) = reparametrized_to_exact(args.lambda, args.theta, side)?;
    let base = DenoiseProblem::new(y, lambda, theta, Parametrization::Exact)?;
    let cfg = SolverConfig::default().with_tol(args.tol).with_max_iter(args.max_iter);

    let mut solutions: Vec<(u32, PixelImage, f64, bool)> = Vec::new();
    for &level in &levels {
        let (prob, weight) = base.embedded(level - base_level.n())?;
        let (a, rep) = denoise_dual_apg(&prob, &cfg)?;
        solutions.push((level, a, weight * rep.final_objective, rep.converged));
    }
    // Deviations are measured against the coarsest level requested.
    let coarsest = solutions.iter().min_by_key(|s| s.0).expect("nonempty");
    let reference = measure(&coarsest.1, base_level)?;
    let mut csv = String::from("level,objective,measurement_deviation,refinement_deviation\n");
    let mut objectives = Vec::new();
    for (level, a, obj, _) in &solutions {
        let meas = measure(a, base_level)?.max_abs_diff(&reference)?;
        let refined = a.max_abs_diff(&refine_by(&reference, level - base_level.n()))?;
        writeln!(csv, "{level},{obj:.17e},{meas:.6e},{refined:.6e}").expect("string write");
        println!("level {level}: objective {obj:.15}, measurement deviation {meas:.2e}, refinement deviation {refined:.2e}");
        objectives.push(*obj);
    }
    fs::write(&args.output, csv).map_err(MtvError::from)?;
    let spread = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - objectives.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("objective spread {spread:.2e}");
    if solutions.iter().any(|s| !s.3) {
        return Ok(2);
    }
    if spread > 1e-8 {
        return Err(Failure(1, format!("objective spread {spread:.2e} exceeds 1e-8")));
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let sigmas = parse_list("sigma", &args.sigma)?;
    let paths = list_images(&args.data_dir)?;
    if paths.is_empty() {
        return Err(bad(format!("no .pgm or .png images in {}", args.data_dir.display())));
    }
    let images: Vec<(String, PixelImage)> = paths
        .iter()
        .map(|p| Ok((image_id(p), load_image(p)?)))
        .collect::<std::result::Result<_, MtvError>>()?;
    let cfg = BenchConfig {
        sigmas,
        mode: match args.mode {
            Mode::PerImage => TuneMode::PerImage,
            Mode::PerSigma => TuneMode::PerSigma,
        },
        fixed_theta: args.theta,
        seed: args.seed,
        tuning: TuningConfig {
            solver: SolverConfig::default().with_tol(args.tol).with_max_iter(args.max_iter),
            ..TuningConfig::default()
        },
    };
    let out = run_bench(&images, &cfg)?;
    write_csv(&out.rows, &args.output)?;
    println!("{:>9}  {:>8}  {:>8}  {:>7}  {:>7}  {:>7}", "sigma*255", "TV", "MTV", "gain", "theta*", "std");
    for s in &out.summaries {
        println!(
            "{:>9.1}  {:>8.3}  {:>8.3}  {:>+7.3}  {:>7.3}  {:>7.3}",
            s.sigma * 255.0,
            s.tv_mean_psnr,
            s.mtv_mean_psnr,
            s.gain_db(),
            s.theta_mean,
            s.theta_std
        );
    }
    // Re-read as a cheap check that the report is well-formed.
    read_csv(&args.output)?;
    Ok(0)
}
