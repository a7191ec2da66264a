//! Reconstruction quality metrics and the residual image.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::image::Image;
use crate::operator::{LinearOperator, OperatorError};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("images differ in size: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("the reference image is zero")]
    ZeroReference,
}

/// `log10(10³x + 1)/3`: maps `[0, 1]` onto `[0, ≈1.00014]` while
/// stretching intensities down to `10⁻³`.
pub fn rlog_value(x: f64) -> f64 {
    (1e3 * x + 1.0).log10() / 3.0
}

pub fn rlog(x: &Image) -> Image {
    x.map(rlog_value)
}

/// `20 log10(‖x̄‖/‖x̄ − x̂‖)` in dB; `+∞` when the images are equal.
pub fn snr(xhat: &Image, xbar: &Image) -> Result<f64, MetricsError> {
    if xhat.dims() != xbar.dims() {
        return Err(MetricsError::DimMismatch(xhat.dims(), xbar.dims()));
    }
    let reference = xbar.norm();
    if reference == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let err = xbar.sub(xhat).norm();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (reference / err).log10())
}

/// SNR of the `rlog`-mapped images.
pub fn logsnr(xhat: &Image, xbar: &Image) -> Result<f64, MetricsError> {
    if xhat.dims() != xbar.dims() {
        return Err(MetricsError::DimMismatch(xhat.dims(), xbar.dims()));
    }
    snr(&rlog(xhat), &rlog(xbar))
}

/// `β Re{Φ†(y − Φx̂)}`.
pub fn residual_image(
    op: &dyn LinearOperator,
    y: &[Complex64],
    xhat: &Image,
) -> Result<Image, OperatorError> {
    op.check_data(y)?;
    let mut r = op.forward(xhat)?;
    for (a, b) in r.iter_mut().zip(y) {
        *a = b - *a;
    }
    let beta = op.beta()?;
    Ok(op.adjoint(&r)?.scaled(beta))
}

/// Sample mean and half-width of the normal 95% interval,
/// `1.96·s/√n`. The half-width is 0 for fewer than two samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci95: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            ci95: f64::NAN,
            count: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci95 = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    };
    Summary { mean, ci95, count: n }
}
