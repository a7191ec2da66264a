//! Proximal building blocks for the weighted-ℓ1 + positivity prior.

use thiserror::Error;

use crate::image::Image;
use crate::sara::{Dictionary, SaraError, WaveletCoeffs};

#[derive(Debug, Error, PartialEq)]
pub enum ProxError {
    #[error("threshold {value} at index {index} is negative")]
    NegativeThreshold { index: usize, value: f64 },
    #[error("length mismatch: {expected} expected, {actual} given")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Sara(#[from] SaraError),
}

/// `sign(c)·max(|c| − η, 0)`.
#[inline]
pub fn soft_threshold_scalar(c: f64, eta: f64) -> f64 {
    if c > eta {
        c - eta
    } else if c < -eta {
        c + eta
    } else {
        0.0
    }
}

pub fn soft_threshold(c: &[f64], thresholds: &[f64]) -> Result<Vec<f64>, ProxError> {
    if c.len() != thresholds.len() {
        return Err(ProxError::LengthMismatch {
            expected: c.len(),
            actual: thresholds.len(),
        });
    }
    if let Some((index, &value)) = thresholds.iter().enumerate().find(|(_, t)| !(**t >= 0.0)) {
        return Err(ProxError::NegativeThreshold { index, value });
    }
    Ok(c.iter()
        .zip(thresholds)
        .map(|(&v, &t)| soft_threshold_scalar(v, t))
        .collect())
}

pub fn project_positive(x: &Image) -> Image {
    x.map(|v| v.max(0.0))
}

/// Diagonal of the weighting matrix `W`, one entry per dictionary
/// coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    diag: Vec<f64>,
}

impl WeightMatrix {
    pub fn identity(len: usize) -> Self {
        WeightMatrix { diag: vec![1.0; len] }
    }

    pub fn from_diag(diag: Vec<f64>) -> Result<Self, ProxError> {
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(ProxError::NegativeThreshold { index, value });
        }
        Ok(WeightMatrix { diag })
    }

    /// `W_jj = ρ / (ρ + |c_j|)`.
    pub fn from_coeffs(c: &WaveletCoeffs, rho: f64) -> Result<Self, ProxError> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ProxError::InvalidParameter(format!(
                "reweighting floor rho must be positive, got {rho}"
            )));
        }
        Ok(WeightMatrix {
            diag: c.as_slice().iter().map(|v| rho / (rho + v.abs())).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Reweighting step of uSARA: `W = Diag(ρ / (ρ + |Ψ†x|))`.
pub fn update_weights(dict: &Dictionary, x: &Image, rho: f64) -> Result<WeightMatrix, ProxError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ProxError::InvalidParameter(format!(
            "reweighting floor rho must be positive, got {rho}"
        )));
    }
    WeightMatrix::from_coeffs(&dict.analysis(x)?, rho)
}

/// `Σ_j W_jj |(Ψ†x)_j|`.
pub fn weighted_l1(dict: &Dictionary, x: &Image, w: &WeightMatrix) -> Result<f64, ProxError> {
    let c = dict.analysis(x)?;
    if c.len() != w.len() {
        return Err(ProxError::LengthMismatch {
            expected: c.len(),
            actual: w.len(),
        });
    }
    Ok(c.as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(a, b)| a.abs() * b)
        .sum())
}

/// Dual variable of the prox sub-problem, kept between calls for warm
/// starts.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    v: WaveletCoeffs,
}

impl DualState {
    pub fn zeros(dict: &Dictionary, dims: (usize, usize)) -> Self {
        DualState {
            v: WaveletCoeffs::zeros(dims, dict.depth(), dict.num_bases()),
        }
    }

    pub fn coeffs(&self) -> &WaveletCoeffs {
        &self.v
    }

    pub fn is_finite(&self) -> bool {
        self.v.as_slice().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualFbOptions {
    /// Relative-change tolerance `ξ2`.
    pub xi2: f64,
    pub max_iter: usize,
}

impl Default for DualFbOptions {
    fn default() -> Self {
        DualFbOptions {
            xi2: 1e-5,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxOutput {
    pub image: Image,
    pub iterations: usize,
    pub converged: bool,
}

/// Dual forward-backward evaluation of `prox_{γλ g(·, W)}(z)` with
/// `g(x, W) = ‖WΨ†x‖₁ + ι₊(x)`. The dual step is 1, so the dual update
/// reduces to clipping `v + Ψ†x` to `[−γλW, γλW]`.
pub fn prox_weighted_l1(
    dict: &Dictionary,
    z: &Image,
    step_reg: f64,
    weights: &WeightMatrix,
    dual: &mut DualState,
    opts: &DualFbOptions,
) -> Result<ProxOutput, ProxError> {
    if !(step_reg >= 0.0 && step_reg.is_finite()) {
        return Err(ProxError::InvalidParameter(format!(
            "gamma*lambda must be nonnegative, got {step_reg}"
        )));
    }
    if !(opts.xi2 > 0.0) {
        return Err(ProxError::InvalidParameter(format!(
            "xi2 must be positive, got {}",
            opts.xi2
        )));
    }
    let expected = dict.coeff_len(z.dims());
    for len in [weights.len(), dual.v.len()] {
        if len != expected {
            return Err(ProxError::LengthMismatch {
                expected,
                actual: len,
            });
        }
    }
    if dual.v.dims() != z.dims() {
        *dual = DualState::zeros(dict, z.dims());
    }

    let mut prev: Option<Image> = None;
    let mut x = z.clone();
    for it in 1..=opts.max_iter.max(1) {
        let psi_v = dict.synthesis(&dual.v)?;
        x = z.sub(&psi_v);
        x.map_inplace(|v| v.max(0.0));

        let c = dict.analysis(&x)?;
        for ((v, a), w) in dual
            .v
            .as_mut_slice()
            .iter_mut()
            .zip(c.as_slice())
            .zip(weights.as_slice())
        {
            let eta = step_reg * w;
            *v = (*v + a).clamp(-eta, eta);
        }

        if let Some(p) = &prev {
            if x.relative_change_from(p) < opts.xi2 {
                return Ok(ProxOutput {
                    image: x,
                    iterations: it,
                    converged: true,
                });
            }
        }
        prev = Some(x.clone());
    }
    Ok(ProxOutput {
        image: x,
        iterations: opts.max_iter.max(1),
        converged: false,
    })
}
