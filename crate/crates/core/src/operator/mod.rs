//! The RI measurement operator `Φ = GFZ` and the linear-operator
//! abstraction the solvers are written against.
//!
//! Every operator maps a real image to complex measurements; the
//! adjoint always returns `Re{Φ†y}`.

mod coverage;
mod kernel;
mod nufft;
mod power;
mod toeplitz;
mod visibilities;

pub use coverage::{CoverageMeta, UVCoverage};
pub use kernel::{bessel_i0, KaiserBessel, KernelSpec};
pub use nufft::{Footprint, MeasurementOperator};
pub use power::{spectral_norm, spectral_norm_with, PowerOptions, SpectralNorm};
pub use toeplitz::ToeplitzNormal;
pub use visibilities::{simulate_visibilities, NoiseSpec, VisibilitySet};

use num_complex::Complex64;
use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("uv point {index} at ({u}, {v}) lies outside the band |u|,|v| <= {band}")]
    OutOfBand { index: usize, u: f64, v: f64, band: f64 },
    #[error("image dimensions must be even, got {0}x{1}")]
    OddDims(usize, usize),
    #[error("coverage has no points")]
    EmptyCoverage,
    #[error("image is {actual:?}, operator expects {expected:?}")]
    DimMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("measurement vector has length {actual}, operator expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("degenerate coverage: the point spread function vanishes at every pixel")]
    DegenerateBeam,
    #[error("groundtruth is zero, so the noise level implied by an input SNR is undefined")]
    ZeroSignal,
    #[error("invalid operator configuration: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
}

/// A linear map from real images to complex measurement vectors.
pub trait LinearOperator: Send + Sync {
    fn image_dims(&self) -> (usize, usize);

    fn num_measurements(&self) -> usize;

    fn forward(&self, x: &Image) -> Result<Vec<Complex64>, OperatorError>;

    /// `Re{Φ†y}`.
    fn adjoint(&self, y: &[Complex64]) -> Result<Image, OperatorError>;

    /// Lipschitz constant of the data-fidelity gradient, if already known.
    fn cached_lipschitz(&self) -> Option<f64> {
        None
    }

    /// `Re{Φ†Φ}x`.
    fn normal(&self, x: &Image) -> Result<Image, OperatorError> {
        let y = self.forward(x)?;
        self.adjoint(&y)
    }

    fn check_image(&self, x: &Image) -> Result<(), OperatorError> {
        if x.dims() != self.image_dims() {
            return Err(OperatorError::DimMismatch {
                expected: self.image_dims(),
                actual: x.dims(),
            });
        }
        Ok(())
    }

    fn check_data(&self, y: &[Complex64]) -> Result<(), OperatorError> {
        if y.len() != self.num_measurements() {
            return Err(OperatorError::LengthMismatch {
                expected: self.num_measurements(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Unnormalised point spread function `Re{Φ†Φ}δ` and its peak.
    fn psf(&self) -> Result<(Image, f64), OperatorError> {
        let (r, c) = self.image_dims();
        let psf = self.normal(&Image::impulse(r, c))?;
        let peak = psf.max();
        if !(peak > 0.0) {
            return Err(OperatorError::DegenerateBeam);
        }
        Ok((psf, peak))
    }

    /// `β = 1 / max_i (Φ†Φδ)_i`.
    fn beta(&self) -> Result<f64, OperatorError> {
        Ok(1.0 / self.psf()?.1)
    }

    /// Point spread function normalised to a peak of exactly one.
    fn dirty_beam(&self) -> Result<Image, OperatorError> {
        let (psf, peak) = self.psf()?;
        Ok(psf.map(|v| v / peak))
    }

    /// `β Re{Φ†y}`.
    fn dirty_image(&self, y: &[Complex64]) -> Result<Image, OperatorError> {
        let (_, peak) = self.psf()?;
        Ok(self.adjoint(y)?.map(|v| v / peak))
    }

    /// Dense `m × n` matrix, row-major, built column by column from
    /// impulses. Only sensible for small problems.
    fn to_dense(&self) -> Result<Vec<Complex64>, OperatorError> {
        let (r, c) = self.image_dims();
        let n = r * c;
        let m = self.num_measurements();
        let mut dense = vec![Complex64::new(0.0, 0.0); m * n];
        let mut e = Image::zeros(r, c);
        for j in 0..n {
            e.as_mut_slice()[j] = 1.0;
            let col = self.forward(&e)?;
            for (i, v) in col.into_iter().enumerate() {
                dense[i * n + j] = v;
            }
            e.as_mut_slice()[j] = 0.0;
        }
        Ok(dense)
    }
}

/// `Φ = I`: the pure denoising configuration. Measurements are the
/// pixels embedded as complex numbers with zero imaginary part.
#[derive(Clone, Copy, Debug)]
pub struct IdentityOperator {
    rows: usize,
    cols: usize,
}

impl IdentityOperator {
    pub fn new(rows: usize, cols: usize) -> Self {
        IdentityOperator { rows, cols }
    }

    pub fn embed(x: &Image) -> Vec<Complex64> {
        x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

impl LinearOperator for IdentityOperator {
    fn image_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn num_measurements(&self) -> usize {
        self.rows * self.cols
    }

    fn forward(&self, x: &Image) -> Result<Vec<Complex64>, OperatorError> {
        self.check_image(x)?;
        Ok(Self::embed(x))
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<Image, OperatorError> {
        self.check_data(y)?;
        Ok(Image::from_vec(self.rows, self.cols, y.iter().map(|v| v.re).collect()).unwrap())
    }

    fn cached_lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Explicit complex matrix, row-major `m × n`.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    m: usize,
    matrix: Vec<Complex64>,
}

impl DenseOperator {
    pub fn new(dims: (usize, usize), m: usize, matrix: Vec<Complex64>) -> Result<Self, OperatorError> {
        if matrix.len() != m * dims.0 * dims.1 {
            return Err(OperatorError::InvalidConfig(format!(
                "dense matrix has {} entries, expected {}",
                matrix.len(),
                m * dims.0 * dims.1
            )));
        }
        Ok(DenseOperator {
            rows: dims.0,
            cols: dims.1,
            m,
            matrix,
        })
    }

    pub fn from_operator(op: &dyn LinearOperator) -> Result<Self, OperatorError> {
        DenseOperator::new(op.image_dims(), op.num_measurements(), op.to_dense()?)
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn image_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn num_measurements(&self) -> usize {
        self.m
    }

    fn forward(&self, x: &Image) -> Result<Vec<Complex64>, OperatorError> {
        self.check_image(x)?;
        let n = x.len();
        Ok((0..self.m)
            .map(|i| {
                self.matrix[i * n..(i + 1) * n]
                    .iter()
                    .zip(x.as_slice())
                    .map(|(a, &b)| a * b)
                    .sum()
            })
            .collect())
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<Image, OperatorError> {
        self.check_data(y)?;
        let n = self.rows * self.cols;
        let mut out = vec![0.0; n];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.matrix[i * n..(i + 1) * n]) {
                *o += (a.conj() * yi).re;
            }
        }
        Ok(Image::from_vec(self.rows, self.cols, out).unwrap())
    }
}

/// Real inner product `Re⟨a, b⟩` on measurement vectors.
pub fn data_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn data_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
