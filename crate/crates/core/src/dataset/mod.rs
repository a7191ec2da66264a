//! Training-database construction: low-dynamic-range preprocessing,
//! tiling, exponentiation to a target dynamic range and noisy pairs.

mod corpus;
mod exponent;
mod patches;

pub use corpus::{
    background_sigma, read_manifest, write_manifest, BackgroundBox, CorpusEntry, LOW_DIR, MANIFEST_CSV,
    RAW_DIR,
};
pub use exponent::{exponentiate, make_pair, solve_exponentiation, TrainingPair};
pub use patches::{extract_patches, split_tiles, PatchOptions, DEFAULT_PATCH, DEFAULT_TILE};

use thiserror::Error;

use crate::image::{Image, ImageError};
use crate::operator::IdentityOperator;
use crate::sara::Dictionary;
use crate::solvers::{run_usara, Problem, SolverConfig, SolverError};

/// Nominal floor of the preprocessed low-dynamic-range images.
pub const DEFAULT_SIGMA0: f64 = 1.0 / 64.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no root with a > 1 for sigma = {sigma}, sigma0 = {sigma0}: the dynamic range 1/sigma cannot be reached")]
    NoRoot { sigma: f64, sigma0: f64 },
    #[error("patch of size {size} does not fit in a {rows}x{cols} image")]
    PatchTooLarge { size: usize, rows: usize, cols: usize },
    #[error("pixel values must lie in [0, 1], found {0}")]
    OutOfRange(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("corpus manifest: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An image with pixels in `[0, 1]` and its nominal noise floor.
#[derive(Clone, Debug, PartialEq)]
pub struct LowDrImage {
    image: Image,
    sigma0: f64,
}

impl LowDrImage {
    pub fn new(image: Image, sigma0: f64) -> Result<Self, DatasetError> {
        if !(sigma0 > 0.0 && sigma0 < 1.0) {
            return Err(DatasetError::InvalidArgument(format!(
                "sigma0 must lie in (0, 1), got {sigma0}"
            )));
        }
        if let Some(&v) = image.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DatasetError::OutOfRange(v));
        }
        Ok(LowDrImage { image, sigma0 })
    }

    /// Clips negatives and rescales to a unit peak.
    pub fn normalized(image: &Image, sigma0: f64) -> Result<Self, DatasetError> {
        let mut x = image.map(|v| v.max(0.0));
        let peak = x.max();
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(DatasetError::InvalidArgument(
                "image has no positive finite pixel".into(),
            ));
        }
        x.map_inplace(|v| (v / peak).min(1.0));
        LowDrImage::new(x, sigma0)
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn into_image(self) -> Image {
        self.image
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessOptions {
    pub depth: usize,
    pub config: SolverConfig,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            depth: 3,
            config: SolverConfig {
                gamma_factor: 1.0,
                max_iter: 500,
                ..SolverConfig::default()
            },
        }
    }
}

/// Removes the noise of standard deviation `sigma_hat` from a raw image by
/// running uSARA with `Φ = I` and `γ = 1`, soft threshold and reweighting
/// floor both set to `sigma_hat`. The result is clipped to `[0, 1]`; the
/// floor metadata is kept.
pub fn preprocess_raw(
    raw: &LowDrImage,
    sigma_hat: f64,
    opts: &PreprocessOptions,
) -> Result<LowDrImage, DatasetError> {
    if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    let (rows, cols) = raw.image.dims();
    let dict = Dictionary::sara(opts.depth);
    let q = 1usize << opts.depth;
    // the wavelet transform needs dimensions divisible by 2^depth
    let pr = rows.div_ceil(q) * q;
    let pc = cols.div_ceil(q) * q;
    let padded = patches::symmetric_pad(&raw.image, pr, pc);
    let op = IdentityOperator::new(pr, pc);
    let y = IdentityOperator::embed(&padded);
    let config = SolverConfig {
        gamma_factor: 1.0,
        lambda: sigma_hat,
        rho: sigma_hat,
        ..opts.config
    };
    let problem = Problem::new(&op, &y)?.with_lipschitz(1.0)?;
    let report = run_usara(&problem, &dict, &config, None)?;
    let out = report.image.crop(0, 0, rows, cols).map(|v| v.clamp(0.0, 1.0));
    LowDrImage::new(out, raw.sigma0)
}
