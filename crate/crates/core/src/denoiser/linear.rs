//! Small reference denoisers: explicit matrices, scalings and closures.
//! Handy as surrogates in tests and for wiring checks.

use super::{Denoiser, DenoiserError, Differentiable, Linearization};
use crate::image::Image;

/// `D(x) = s·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledIdentity(pub f64);

impl Denoiser for ScaledIdentity {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        Ok(x.scaled(self.0))
    }
}

struct ScaleLin(f64);

impl Linearization for ScaleLin {
    fn jvp(&self, v: &Image) -> Result<Image, DenoiserError> {
        Ok(v.scaled(self.0))
    }
    fn vjp(&self, u: &Image) -> Result<Image, DenoiserError> {
        Ok(u.scaled(self.0))
    }
}

impl Differentiable for ScaledIdentity {
    fn linearize<'a>(&'a self, _x: &Image) -> Result<Box<dyn Linearization + 'a>, DenoiserError> {
        Ok(Box::new(ScaleLin(self.0)))
    }
}

/// `D(x) = A·vec(x)` for a dense row-major `A` acting on images of fixed
/// size, flattened row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDenoiser {
    dims: (usize, usize),
    matrix: Vec<f64>,
}

impl MatrixDenoiser {
    pub fn new(dims: (usize, usize), matrix: Vec<f64>) -> Result<Self, DenoiserError> {
        let n = dims.0 * dims.1;
        if matrix.len() != n * n {
            return Err(DenoiserError::InvalidArgument(format!(
                "matrix has {} entries, {n}x{n} expected",
                matrix.len()
            )));
        }
        Ok(MatrixDenoiser { dims, matrix })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    fn check(&self, x: &Image) -> Result<(), DenoiserError> {
        if x.dims() != self.dims {
            return Err(DenoiserError::DimMismatch {
                expected: self.dims,
                actual: x.dims(),
            });
        }
        Ok(())
    }

    fn mul(&self, x: &Image, transpose: bool) -> Result<Image, DenoiserError> {
        self.check(x)?;
        let n = x.len();
        let xs = x.as_slice();
        let out = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let a = if transpose {
                            self.matrix[j * n + i]
                        } else {
                            self.matrix[i * n + j]
                        };
                        a * xs[j]
                    })
                    .sum()
            })
            .collect();
        Ok(Image::from_vec(self.dims.0, self.dims.1, out).expect("dims checked"))
    }
}

impl Denoiser for MatrixDenoiser {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        self.mul(x, false)
    }
}

struct MatrixLin<'a>(&'a MatrixDenoiser);

impl Linearization for MatrixLin<'_> {
    fn jvp(&self, v: &Image) -> Result<Image, DenoiserError> {
        self.0.mul(v, false)
    }
    fn vjp(&self, u: &Image) -> Result<Image, DenoiserError> {
        self.0.mul(u, true)
    }
}

impl Differentiable for MatrixDenoiser {
    fn linearize<'a>(&'a self, x: &Image) -> Result<Box<dyn Linearization + 'a>, DenoiserError> {
        self.check(x)?;
        Ok(Box::new(MatrixLin(self)))
    }
}

/// Wraps any `Fn(&Image) -> Image`.
pub struct FnDenoiser<F>(pub F);

impl<F> Denoiser for FnDenoiser<F>
where
    F: Fn(&Image) -> Image + Send + Sync,
{
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        Ok((self.0)(x))
    }
}

/// `x ↦ s·D(x/s)`: a denoiser trained at noise level `σ` run at `sσ`.
pub struct Rescaled<'a> {
    inner: &'a dyn Denoiser,
    scale: f64,
}

impl<'a> Rescaled<'a> {
    pub fn new(inner: &'a dyn Denoiser, scale: f64) -> Self {
        Rescaled { inner, scale }
    }
}

impl Denoiser for Rescaled<'_> {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        if self.scale == 1.0 {
            return self.inner.denoise(x);
        }
        Ok(self
            .inner
            .denoise(&x.scaled(1.0 / self.scale))?
            .scaled(self.scale))
    }
}
