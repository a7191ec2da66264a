//! Config-driven experiment runner: a grid of groundtruths × pointings ×
//! parameter multipliers, each reconstructed and scored, with per-run
//! artifacts and a summary across the grid.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{logsnr, residual_image, snr, summarize, Summary};
use super::phantoms::{test_set, GalaxySpec};
use super::render::{save_png, Scale};
use super::tracks::{gen_uv_tracks, TrackSpec};
use super::visfile::read_image;
use crate::denoiser::{load_model, DenoiserError, DenoiserHandle, Rescaled};
use crate::image::Image;
use crate::operator::{
    simulate_visibilities, KernelSpec, LinearOperator, MeasurementOperator, NoiseSpec, OperatorError,
    PowerOptions, ToeplitzNormal, UVCoverage,
};
use crate::sara::Dictionary;
use crate::solvers::{
    heuristic_sigma, heuristic_usara, run_airi, run_usara, HeuristicCorrection, Problem, SolverConfig,
    SolverError, SolverReport,
};

/// Multipliers sampling a factor √2 around the heuristic, `{1/(4√2), 1/(2√2), 1/√2, 1, √2, 2√2}`.
pub fn sqrt2_sweep() -> Vec<f64> {
    let s = std::f64::consts::SQRT_2;
    vec![1.0 / (4.0 * s), 1.0 / (2.0 * s), 1.0 / s, 1.0, s, 2.0 * s]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundtruthSource {
    /// `.img` files, or PNG files averaged to grayscale.
    Paths(Vec<PathBuf>),
    /// Seeded synthetic radio galaxies.
    Synthetic {
        count: usize,
        size: usize,
        #[serde(default)]
        spec: GalaxySpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageSource {
    /// One coverage per pointing seed.
    Generated {
        #[serde(default = "default_antennas")]
        antennas: usize,
        delta_t_h: f64,
        #[serde(default = "default_rate")]
        rate_per_h: f64,
        pointing_seeds: Vec<u64>,
        #[serde(default)]
        declination_deg: Option<f64>,
    },
    /// A single coverage read from a `u,v` CSV.
    Csv { path: PathBuf, band: Option<f64> },
}

fn default_antennas() -> usize {
    64
}

fn default_rate() -> f64 {
    100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Usara {
        #[serde(default = "default_depth")]
        depth: usize,
        #[serde(default)]
        correction: HeuristicCorrection,
    },
    Airi {
        manifest: PathBuf,
    },
}

fn default_depth() -> usize {
    crate::sara::DEFAULT_DEPTH
}

/// How the input SNR is turned into a noise level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrConvention {
    /// Relative to the RMS visibility amplitude.
    #[default]
    PerVisibility,
    /// Relative to the full norm `‖Φx̄‖`.
    Total,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub groundtruths: GroundtruthSource,
    pub coverage: CoverageSource,
    pub isnr_db: f64,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    pub solver: SolverChoice,
    #[serde(default)]
    pub config: SolverConfig,
    /// Multipliers of the heuristic value (σ for AIRI, γλ for uSARA).
    #[serde(default = "default_sweep")]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    pub output: PathBuf,
    /// Write per-run images and PNG renders.
    #[serde(default = "default_true")]
    pub save_images: bool,
}

fn default_sweep() -> Vec<f64> {
    vec![1.0]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = serde_json::from_slice(&fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.sweep.is_empty() || self.sweep.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return bad("sweep multipliers must be positive and finite");
        }
        if !self.isnr_db.is_finite() {
            return bad("isnr_db must be finite");
        }
        match &self.groundtruths {
            GroundtruthSource::Paths(p) if p.is_empty() => return bad("no groundtruth paths"),
            GroundtruthSource::Synthetic { count: 0, .. } => return bad("synthetic count is zero"),
            _ => {}
        }
        if let CoverageSource::Generated {
            pointing_seeds,
            delta_t_h,
            ..
        } = &self.coverage
        {
            if pointing_seeds.is_empty() {
                return bad("no pointing seeds");
            }
            if !(*delta_t_h > 0.0) {
                return bad("delta_t_h must be positive");
            }
        }
        self.config
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

/// One scored reconstruction. Timings are kept apart from the metrics so
/// the metrics CSV is reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub groundtruth: usize,
    pub pointing: usize,
    pub multiplier: f64,
    /// Heuristic value at multiplier 1 (σ for AIRI, γλ for uSARA).
    pub heuristic: f64,
    pub value: f64,
    pub snr_db: f64,
    pub logsnr_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
    #[serde(skip)]
    pub gradient_time: Duration,
    #[serde(skip)]
    pub regularizer_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub multiplier: f64,
    pub snr: Summary,
    pub logsnr: Summary,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SweepSummary>,
}

fn load_groundtruth(path: &Path) -> Result<Image, ExperimentError> {
    let wrap = |message: String| ExperimentError::Input {
        path: path.to_path_buf(),
        message,
    };
    let img = read_image(path).map_err(|e| wrap(e.to_string()))?;
    let peak = img.max();
    if !(peak > 0.0) {
        return Err(wrap("groundtruth has no positive pixel".into()));
    }
    Ok(img.map(|v| v.max(0.0) / peak))
}

fn groundtruths(src: &GroundtruthSource) -> Result<Vec<Image>, ExperimentError> {
    match src {
        GroundtruthSource::Paths(paths) => {
            let imgs = paths
                .iter()
                .map(|p| load_groundtruth(p))
                .collect::<Result<Vec<_>, _>>()?;
            if imgs.iter().any(|i| i.dims() != imgs[0].dims()) {
                return Err(ExperimentError::Config("groundtruths differ in size".into()));
            }
            Ok(imgs)
        }
        GroundtruthSource::Synthetic { count, size, spec } => {
            let mut all = test_set(*size, spec);
            all.extend(
                (all.len() as u64..*count as u64).map(|s| super::phantoms::radio_galaxy(*size, s, spec)),
            );
            all.truncate(*count);
            Ok(all)
        }
    }
}

fn coverages(src: &CoverageSource) -> Result<Vec<UVCoverage>, ExperimentError> {
    match src {
        CoverageSource::Generated {
            antennas,
            delta_t_h,
            rate_per_h,
            pointing_seeds,
            declination_deg,
        } => pointing_seeds
            .iter()
            .map(|&seed| {
                let spec = TrackSpec {
                    n_antennas: *antennas,
                    rate_per_h: *rate_per_h,
                    declination_deg: *declination_deg,
                    ..TrackSpec::meerkat_like(*delta_t_h, seed)
                };
                Ok(gen_uv_tracks(&spec)?)
            })
            .collect(),
        CoverageSource::Csv { path, band } => Ok(vec![UVCoverage::from_csv(path, *band)?]),
    }
}

struct RunOutput {
    row: MetricsRow,
    images: Option<(Image, Image, Image)>,
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    gt_index: usize,
    gt: &Image,
    pointing: usize,
    op: &MeasurementOperator,
    toeplitz: &ToeplitzNormal,
    lipschitz: f64,
    multiplier: f64,
    denoiser: Option<&DenoiserHandle>,
) -> RunOutput {
    let mut row = MetricsRow {
        groundtruth: gt_index,
        pointing,
        multiplier,
        heuristic: f64::NAN,
        value: f64::NAN,
        snr_db: f64::NAN,
        logsnr_db: f64::NAN,
        iterations: 0,
        converged: false,
        status: "ok".into(),
        gradient_time: Duration::ZERO,
        regularizer_time: Duration::ZERO,
    };
    let noise = match cfg.snr_convention {
        SnrConvention::PerVisibility => NoiseSpec::PerVisibilitySnrDb(cfg.isnr_db),
        SnrConvention::Total => NoiseSpec::InputSnrDb(cfg.isnr_db),
    };
    // the noise realisation depends only on the groundtruth and pointing
    let seed = cfg.noise_seed ^ ((gt_index as u64) << 32) ^ pointing as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = (|| -> Result<(SolverReport, Image), String> {
        let vis = simulate_visibilities(op, gt, noise, &mut rng).map_err(|e| e.to_string())?;
        let problem = Problem::new(op, &vis.values)
            .and_then(|p| p.with_lipschitz(lipschitz))
            .and_then(|p| p.with_toeplitz(toeplitz.clone()))
            .map_err(|e| e.to_string())?;
        let report = match (&cfg.solver, denoiser) {
            (SolverChoice::Usara { depth, correction }, _) => {
                let h = heuristic_usara(vis.tau, lipschitz, *correction).map_err(|e| e.to_string())?;
                let gamma = cfg.config.gamma_factor / lipschitz;
                row.heuristic = h.gamma_lambda;
                row.value = multiplier * h.gamma_lambda;
                let config = SolverConfig {
                    lambda: row.value / gamma,
                    rho: h.rho,
                    ..cfg.config
                };
                let dict = Dictionary::sara(*depth);
                run_usara(&problem, &dict, &config, None)
            }
            (SolverChoice::Airi { .. }, Some(d)) => {
                let sigma = heuristic_sigma(vis.tau, lipschitz).map_err(|e| e.to_string())?;
                row.heuristic = sigma;
                row.value = multiplier * sigma;
                let trained = d.model().sigma;
                let scale = if trained > 0.0 { row.value / trained } else { 1.0 };
                let rescaled = Rescaled::new(d, scale);
                run_airi(&problem, &rescaled, &cfg.config, None)
            }
            (SolverChoice::Airi { .. }, None) => unreachable!("denoiser loaded before the runs"),
        };
        let report = match report {
            Ok(r) => r,
            Err(SolverError::Diverged {
                iteration,
                reason,
                report,
            }) => {
                row.status = format!("diverged at iteration {iteration}: {reason}");
                *report
            }
            Err(e) => return Err(e.to_string()),
        };
        let residual = residual_image(op, &vis.values, &report.image).map_err(|e| e.to_string())?;
        Ok((report, residual))
    })();
    match result {
        Ok((report, residual)) => {
            row.iterations = report.iterations;
            row.converged = report.converged;
            row.gradient_time = report.timings.gradient;
            row.regularizer_time = report.timings.regularizer;
            row.snr_db = snr(&report.image, gt).unwrap_or(f64::NAN);
            row.logsnr_db = logsnr(&report.image, gt).unwrap_or(f64::NAN);
            let images = cfg.save_images.then(|| {
                let dirty = op
                    .dirty_image(&op.forward(gt).unwrap_or_default())
                    .unwrap_or_else(|_| Image::zeros(gt.rows(), gt.cols()));
                (report.image, residual, dirty)
            });
            RunOutput { row, images }
        }
        Err(msg) => {
            row.status = format!("error: {msg}");
            RunOutput { row, images: None }
        }
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.6e}")
    }
}

fn write_outputs(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<(), ExperimentError> {
    let mut metrics = String::from(
        "groundtruth,pointing,multiplier,heuristic,value,snr_db,logsnr_db,iterations,converged,status\n",
    );
    let mut timings = String::from("groundtruth,pointing,multiplier,gradient_s,regularizer_s\n");
    for r in &outcome.rows {
        let status = r.status.replace([',', '\n'], ";");
        writeln!(
            metrics,
            "{},{},{},{},{},{},{},{},{},{}",
            r.groundtruth,
            r.pointing,
            fmt_f(r.multiplier),
            fmt_f(r.heuristic),
            fmt_f(r.value),
            fmt_f(r.snr_db),
            fmt_f(r.logsnr_db),
            r.iterations,
            r.converged,
            status
        )
        .expect("writing to a String");
        writeln!(
            timings,
            "{},{},{},{:.6},{:.6}",
            r.groundtruth,
            r.pointing,
            fmt_f(r.multiplier),
            r.gradient_time.as_secs_f64(),
            r.regularizer_time.as_secs_f64()
        )
        .expect("writing to a String");
    }
    let mut summary = String::from("multiplier,snr_mean,snr_ci95,logsnr_mean,logsnr_ci95,runs,failures\n");
    for s in &outcome.summary {
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            fmt_f(s.multiplier),
            fmt_f(s.snr.mean),
            fmt_f(s.snr.ci95),
            fmt_f(s.logsnr.mean),
            fmt_f(s.logsnr.ci95),
            s.snr.count,
            s.failures
        )
        .expect("writing to a String");
    }
    fs::write(cfg.output.join("metrics.csv"), metrics)?;
    fs::write(cfg.output.join("timings.csv"), timings)?;
    fs::write(cfg.output.join("summary.csv"), summary)?;
    fs::write(
        cfg.output.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;
    Ok(())
}

fn save_run_images(
    dir: &Path,
    model: &Image,
    residual: &Image,
    dirty: &Image,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    let io = |e: crate::image::ImageError| ExperimentError::Input {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let png = |e: super::render::RenderError| ExperimentError::Input {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    model.save(dir.join("model.img")).map_err(io)?;
    residual.save(dir.join("residual.img")).map_err(io)?;
    dirty.save(dir.join("dirty.img")).map_err(io)?;
    save_png(model, dir.join("model.png"), Scale::Log { saturation: 1.0 }).map_err(png)?;
    save_png(residual, dir.join("residual.png"), Scale::auto_linear(residual)).map_err(png)?;
    save_png(dirty, dir.join("dirty.png"), Scale::auto_linear(dirty)).map_err(png)?;
    Ok(())
}

/// Runs the whole grid and writes `metrics.csv`, `timings.csv`,
/// `summary.csv`, `config.json` and, if enabled, one directory of images
/// per run into `cfg.output`. A failing run is recorded in its status
/// column and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)?;
    let gts = groundtruths(&cfg.groundtruths)?;
    let dims = gts[0].dims();
    let covs = coverages(&cfg.coverage)?;
    let denoiser = match &cfg.solver {
        SolverChoice::Airi { manifest } => Some(DenoiserHandle::new(load_model(manifest)?)),
        SolverChoice::Usara { .. } => None,
    };

    let ops = covs
        .into_par_iter()
        .map(|cov| {
            let op = MeasurementOperator::build(cov, dims, 2.0, KernelSpec::default())?;
            let t = ToeplitzNormal::from_operator(&op)?;
            let l = t.spectral_norm(&PowerOptions::default())?.value;
            Ok((op, t, l))
        })
        .collect::<Result<Vec<_>, OperatorError>>()?;

    let mut jobs = Vec::new();
    for g in 0..gts.len() {
        for p in 0..ops.len() {
            for &m in &cfg.sweep {
                jobs.push((g, p, m));
            }
        }
    }
    let outputs: Vec<RunOutput> = jobs
        .par_iter()
        .map(|&(g, p, m)| {
            let (op, t, l) = &ops[p];
            run_one(cfg, g, &gts[g], p, op, t, *l, m, denoiser.as_ref())
        })
        .collect();

    let mut rows = Vec::with_capacity(outputs.len());
    for out in outputs {
        if let Some((model, residual, dirty)) = &out.images {
            let r = &out.row;
            let dir = cfg.output.join(format!(
                "run_g{}_p{}_m{:.4}",
                r.groundtruth, r.pointing, r.multiplier
            ));
            save_run_images(&dir, model, residual, dirty)?;
        }
        rows.push(out.row);
    }
    let summary = cfg
        .sweep
        .iter()
        .map(|&m| {
            let ok: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.multiplier == m && r.snr_db.is_finite() && r.logsnr_db.is_finite())
                .collect();
            let total = rows.iter().filter(|r| r.multiplier == m).count();
            SweepSummary {
                multiplier: m,
                snr: summarize(&ok.iter().map(|r| r.snr_db).collect::<Vec<_>>()),
                logsnr: summarize(&ok.iter().map(|r| r.logsnr_db).collect::<Vec<_>>()),
                failures: total - ok.len(),
            }
        })
        .collect();
    let outcome = ExperimentOutcome { rows, summary };
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}

/// Mean heuristic noise level over every groundtruth and coverage,
/// with noise drawn at the per-visibility input SNR.
pub fn heuristic_table(
    gts: &[Image],
    coverages: Vec<UVCoverage>,
    isnr_db: f64,
    seed: u64,
) -> Result<f64, ExperimentError> {
    let dims = gts[0].dims();
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, cov) in coverages.into_iter().enumerate() {
        let op = MeasurementOperator::build(cov, dims, 2.0, KernelSpec::default())?;
        let t = ToeplitzNormal::from_operator(&op)?;
        let l = t
            .spectral_norm(&PowerOptions {
                tol: 1e-4,
                ..PowerOptions::default()
            })?
            .value;
        for (g, gt) in gts.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((g as u64) << 32) ^ p as u64);
            let vis = simulate_visibilities(&op, gt, NoiseSpec::PerVisibilitySnrDb(isnr_db), &mut rng)?;
            total += heuristic_sigma(vis.tau, l).map_err(|e| ExperimentError::Config(e.to_string()))?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

impl From<crate::image::ImageError> for ExperimentError {
    fn from(e: crate::image::ImageError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}
