use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use airi::dataset::{
    background_sigma, extract_patches, make_pair, preprocess_raw, solve_exponentiation, split_tiles,
    DatasetError, LowDrImage, PatchOptions, PreprocessOptions, DEFAULT_SIGMA0,
};
use airi::denoiser::{
    apply_equivariant, certify, load_model, DenoiserError, DenoiserHandle, EquivariantMode, Rescaled,
};
use airi::harness::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use airi::harness::metrics::{logsnr, residual_image, snr};
use airi::harness::phantoms::{radio_galaxy, GalaxySpec};
use airi::harness::render::{save_png, Scale};
use airi::harness::tracks::{gen_uv_tracks, TrackSpec};
use airi::harness::visfile::{read_image, read_visibilities, write_visibilities, VisFileError};
use airi::operator::{
    simulate_visibilities, KernelSpec, LinearOperator, MeasurementOperator, NoiseSpec, OperatorError,
    UVCoverage,
};
use airi::sara::Dictionary;
use airi::solvers::{
    heuristic_sigma, heuristic_usara, run_airi, run_usara, HeuristicCorrection, Problem, SolverConfig,
    SolverError, SolverReport,
};
use airi::Image;

#[derive(Parser)]
#[command(
    name = "airi",
    version,
    about = "Radio-interferometric imaging with AIRI and uSARA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a uv-coverage and noisy visibilities of a groundtruth.
    Simulate(SimulateArgs),
    /// Reconstruct an image from visibilities.
    Solve(SolveArgs),
    /// Apply a denoiser once.
    Denoise(DenoiseArgs),
    /// Build training data.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Compare a reconstruction with its groundtruth.
    Metrics(MetricsArgs),
    /// Run a JSON-configured experiment grid.
    Experiment { config: PathBuf },
    /// Estimate Jacobian norms of a model along groundtruth/noisy segments.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    PerVisibility,
    Total,
}

#[derive(Args)]
struct SimulateArgs {
    /// Groundtruth image (.img or .png); a synthetic galaxy when absent.
    #[arg(long)]
    groundtruth: Option<PathBuf>,
    /// Side of the synthetic groundtruth.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    phantom_seed: u64,
    /// Read the coverage from a `u,v` CSV instead of generating tracks.
    #[arg(long)]
    coverage: Option<PathBuf>,
    #[arg(long)]
    band: Option<f64>,
    #[arg(long, default_value_t = 64)]
    antennas: usize,
    #[arg(long, default_value_t = 1.0)]
    hours: f64,
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    pointing: u64,
    /// Input SNR in dB; omit for noiseless data.
    #[arg(long)]
    isnr: Option<f64>,
    #[arg(long, value_enum, default_value_t = Convention::PerVisibility)]
    convention: Convention,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Output visibility CSV; a JSON sidecar is written next to it.
    #[arg(long, short)]
    out: PathBuf,
    /// Also save the groundtruth and the dirty image here.
    #[arg(long)]
    images: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Usara,
    Airi,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(value_enum)]
    solver: SolverKind,
    #[arg(long)]
    vis: PathBuf,
    /// Image rows and columns.
    #[arg(long, num_args = 2, required = true, value_names = ["ROWS", "COLS"])]
    dims: Vec<usize>,
    #[arg(long)]
    band: Option<f64>,
    /// SolverConfig as JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise standard deviation, overriding the sidecar.
    #[arg(long)]
    tau: Option<f64>,
    /// Multiplier of the heuristic regularisation level.
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = airi::sara::DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long)]
    one_third: bool,
    #[arg(long, short)]
    out: PathBuf,
    /// Groundtruth for reporting SNR and logSNR.
    #[arg(long)]
    groundtruth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Off,
    Dihedral,
    Flips,
}

impl From<Mode> for EquivariantMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Off => EquivariantMode::Off,
            Mode::Dihedral => EquivariantMode::Dihedral,
            Mode::Flips => EquivariantMode::Flips,
        }
    }
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Off)]
    equivariant: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Denoise a raw image into a low-dynamic-range one.
    Preprocess {
        #[arg(long, short)]
        input: PathBuf,
        /// Background noise level; estimated from the image when absent.
        #[arg(long)]
        sigma_hat: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Split an image into mirror-padded tiles.
    Tiles {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = airi::dataset::DEFAULT_TILE)]
        tile: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Exponentiate low-dynamic-range patches and add noise.
    Pairs {
        #[arg(long, short)]
        input: PathBuf,
        /// Target noise level; the exponentiation follows from it.
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA0)]
        sigma0: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = airi::dataset::DEFAULT_PATCH)]
        patch: usize,
        #[arg(long)]
        augment: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    groundtruth: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Groundtruths (.img or .png); synthetic galaxies when absent.
    #[arg(long)]
    images: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    synthetic: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Noise level of the segments; the model's own when absent.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 2)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure classes mapped to exit codes 2 and 3.
enum Failure {
    Validation(String),
    Numerical(String),
}

type Outcome = Result<(), Failure>;

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. } | SolverError::Diverged { .. } => Failure::Numerical(e.to_string()),
            SolverError::Denoiser(DenoiserError::NonFinite { .. }) => Failure::Numerical(e.to_string()),
            other => validation(other),
        }
    }
}

impl From<DenoiserError> for Failure {
    fn from(e: DenoiserError) -> Self {
        match e {
            DenoiserError::NonFinite { .. } => Failure::Numerical(e.to_string()),
            other => validation(other),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Solver(s) => s.into(),
            DatasetError::NoRoot { .. } => Failure::Numerical(e.to_string()),
            other => validation(other),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                validation(e)
            }
        }
    )*};
}

validation_from!(
    OperatorError,
    VisFileError,
    ExperimentError,
    airi::image::ImageError,
    airi::harness::render::RenderError,
    airi::harness::metrics::MetricsError,
    std::io::Error,
    serde_json::Error
);

fn save_with_png(img: &Image, path: &Path, scale: Scale) -> Outcome {
    img.save(path)?;
    save_png(img, path.with_extension("png"), scale)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    let gt = match &a.groundtruth {
        Some(p) => read_image(p)?,
        None => radio_galaxy(a.size, a.phantom_seed, &GalaxySpec::default()),
    };
    let coverage = match &a.coverage {
        Some(p) => UVCoverage::from_csv(p, a.band)?,
        None => gen_uv_tracks(&TrackSpec {
            n_antennas: a.antennas,
            rate_per_h: a.rate,
            ..TrackSpec::meerkat_like(a.hours, a.pointing)
        })?,
    };
    let op = MeasurementOperator::build(coverage, gt.dims(), 2.0, KernelSpec::default())?;
    let noise = match (a.isnr, a.convention) {
        (None, _) => NoiseSpec::Noiseless,
        (Some(db), Convention::PerVisibility) => NoiseSpec::PerVisibilitySnrDb(db),
        (Some(db), Convention::Total) => NoiseSpec::InputSnrDb(db),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.noise_seed);
    let vis = simulate_visibilities(&op, &gt, noise, &mut rng)?;
    write_visibilities(&a.out, op.coverage(), &vis.values, vis.tau)?;
    if let Some(dir) = &a.images {
        fs::create_dir_all(dir)?;
        save_with_png(&gt, &dir.join("groundtruth.img"), Scale::Log { saturation: 1.0 })?;
        let dirty = op.dirty_image(&vis.values)?;
        save_with_png(&dirty, &dir.join("dirty.img"), Scale::auto_linear(&dirty))?;
    }
    println!(
        "{} visibilities, tau = {:e}, image {}x{}",
        vis.len(),
        vis.tau,
        gt.rows(),
        gt.cols()
    );
    Ok(())
}

fn report_line(report: &SolverReport) -> String {
    format!(
        "{} iterations, converged: {}, reweights: {}, gradient {:.2}s, regulariser {:.2}s",
        report.iterations,
        report.converged,
        report.reweights,
        report.timings.gradient.as_secs_f64(),
        report.timings.regularizer.as_secs_f64()
    )
}

fn solve(a: SolveArgs) -> Outcome {
    let (coverage, y, meta) = read_visibilities(&a.vis, a.band)?;
    let dims = (a.dims[0], a.dims[1]);
    let op = MeasurementOperator::build(coverage, dims, 2.0, KernelSpec::default())?;
    let mut config: SolverConfig = match &a.config {
        Some(p) => serde_json::from_slice(&fs::read(p)?)?,
        None => SolverConfig::default(),
    };
    let tau = a
        .tau
        .or(meta.map(|m| m.tau))
        .ok_or_else(|| validation("no noise level: pass --tau or keep the sidecar JSON"))?;
    if !(a.multiplier > 0.0) {
        return Err(validation("multiplier must be positive"));
    }
    let problem = Problem::new(&op, &y)?;
    let l = problem.lipschitz();
    let report = match a.solver {
        SolverKind::Usara => {
            let correction = if a.one_third {
                HeuristicCorrection::OneThird
            } else {
                HeuristicCorrection::None
            };
            let h = heuristic_usara(tau, l, correction)?;
            let gamma = config.gamma_factor / l;
            config.lambda = a.multiplier * h.lambda(gamma);
            config.rho = h.rho;
            println!(
                "L = {l:e}, gamma*lambda = {:e}, rho = {:e}",
                gamma * config.lambda,
                config.rho
            );
            run_usara(&problem, &Dictionary::sara(a.depth), &config, None)?
        }
        SolverKind::Airi => {
            let manifest = a
                .manifest
                .as_ref()
                .ok_or_else(|| validation("airi needs --manifest"))?;
            let handle = DenoiserHandle::new(load_model(manifest)?);
            let sigma = a.multiplier * heuristic_sigma(tau, l)?;
            let trained = handle.model().sigma;
            println!("L = {l:e}, sigma = {sigma:e}, model sigma = {trained:e}");
            let scale = if trained > 0.0 { sigma / trained } else { 1.0 };
            run_airi(&problem, &Rescaled::new(&handle, scale), &config, None)?
        }
    };
    println!("{}", report_line(&report));
    save_with_png(&report.image, &a.out, Scale::Log { saturation: 1.0 })?;
    let residual = residual_image(&op, &y, &report.image)?;
    save_with_png(
        &residual,
        &a.out.with_extension("residual.img"),
        Scale::auto_linear(&residual),
    )?;
    if let Some(gt) = &a.groundtruth {
        let gt = read_image(gt)?;
        println!(
            "snr {:.4} dB, logsnr {:.4} dB",
            snr(&report.image, &gt)?,
            logsnr(&report.image, &gt)?
        );
    }
    Ok(())
}

fn denoise(a: DenoiseArgs) -> Outcome {
    let handle = DenoiserHandle::new(load_model(&a.manifest)?);
    let x = read_image(&a.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let out = apply_equivariant(&handle, &x, a.equivariant.into(), &mut rng)?;
    save_with_png(&out, &a.out, Scale::Log { saturation: 0.1 })
}

fn dataset(cmd: DatasetCommand) -> Outcome {
    match cmd {
        DatasetCommand::Preprocess {
            input,
            sigma_hat,
            out,
        } => {
            let img = read_image(&input)?;
            let raw = LowDrImage::normalized(&img, DEFAULT_SIGMA0)?;
            let s = match sigma_hat {
                Some(s) => s,
                None => background_sigma(raw.image(), None)?,
            };
            let low = preprocess_raw(&raw, s, &PreprocessOptions::default())?;
            println!("sigma_hat = {s:e}");
            save_with_png(low.image(), &out, Scale::Linear { lo: 0.0, hi: 1.0 })
        }
        DatasetCommand::Tiles { input, tile, out_dir } => {
            let img = read_image(&input)?;
            fs::create_dir_all(&out_dir)?;
            let tiles = split_tiles(&img, tile)?;
            for (i, t) in tiles.iter().enumerate() {
                t.save(out_dir.join(format!("tile_{i:04}.img")))?;
            }
            println!("{} tiles", tiles.len());
            Ok(())
        }
        DatasetCommand::Pairs {
            input,
            sigma,
            sigma0,
            count,
            patch,
            augment,
            seed,
            out_dir,
        } => {
            let img = read_image(&input)?;
            let a = solve_exponentiation(sigma, sigma0)?;
            let patches = extract_patches(
                &img,
                &PatchOptions {
                    size: patch,
                    count,
                    augment,
                    seed,
                    ..PatchOptions::default()
                },
            )?;
            fs::create_dir_all(&out_dir)?;
            for (i, p) in patches.into_iter().enumerate() {
                let low = LowDrImage::new(p.map(|v| v.clamp(0.0, 1.0)), sigma0)?;
                let pair = make_pair(&low, a, sigma, seed.wrapping_add(i as u64))?;
                pair.groundtruth
                    .save(out_dir.join(format!("pair_{i:04}_gt.img")))?;
                pair.noisy.save(out_dir.join(format!("pair_{i:04}_noisy.img")))?;
            }
            println!("a = {a:e}, {count} pairs");
            Ok(())
        }
    }
}

fn metrics(a: MetricsArgs) -> Outcome {
    let x = read_image(&a.estimate)?;
    let gt = read_image(&a.groundtruth)?;
    println!("snr_db,logsnr_db");
    println!("{},{}", snr(&x, &gt)?, logsnr(&x, &gt)?);
    Ok(())
}

fn certify_cmd(a: CertifyArgs) -> Outcome {
    let handle = DenoiserHandle::new(load_model(&a.manifest)?);
    let sigma = a.sigma.unwrap_or(handle.model().sigma);
    if !(sigma > 0.0) {
        return Err(validation(
            "no noise level: pass --sigma or set it in the manifest",
        ));
    }
    let gts: Vec<Image> = if a.images.is_empty() {
        let spec = GalaxySpec {
            exponent_a: handle.model().a.max(2.0),
            ..GalaxySpec::default()
        };
        (0..a.synthetic as u64)
            .map(|s| radio_galaxy(a.size, s, &spec))
            .collect()
    } else {
        a.images.iter().map(read_image).collect::<Result<_, _>>()?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let pairs: Vec<(Image, Image)> = gts
        .into_iter()
        .map(|u| {
            use rand::Rng;
            let z = Image::from_fn(u.rows(), u.cols(), |r, c| {
                u[(r, c)] + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            (u, z)
        })
        .collect();
    let report = certify(&handle, &pairs, a.samples, a.iters, a.seed, a.margin)?;
    println!(
        "points {}, max {:.6}, mean {:.6}, kinks {}, passed {}",
        report.norms.len(),
        report.max,
        report.mean,
        report.kinks,
        report.passed
    );
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Denoise(a) => denoise(a),
        Command::Dataset(c) => dataset(c),
        Command::Metrics(a) => metrics(a),
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            let out = run_experiment(&cfg)?;
            let failed = out.rows.iter().filter(|r| r.status != "ok").count();
            println!(
                "{} runs, {} failed, results in {}",
                out.rows.len(),
                failed,
                cfg.output.display()
            );
            Ok(())
        }
        Command::Certify(a) => certify_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
