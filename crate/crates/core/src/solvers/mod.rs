//! The forward-backward imaging solvers: re-weighted uSARA and the
//! plug-and-play AIRI iteration, plus the noise-level heuristics that set
//! their parameters.

mod airi;
mod heuristics;
mod usara;

pub use airi::run_airi;
pub use heuristics::{heuristic_sigma, heuristic_usara, HeuristicCorrection, UsaraHeuristic};
pub use usara::run_usara;

use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoiser::{DenoiserError, EquivariantMode};
use crate::image::Image;
use crate::operator::{spectral_norm, LinearOperator, OperatorError, PowerOptions, ToeplitzNormal};
use crate::prox::ProxError;
use crate::sara::SaraError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Sara(#[from] SaraError),
    #[error(transparent)]
    Denoiser(#[from] DenoiserError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("iterations diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        report: Box<SolverReport>,
    },
}

/// Aborts a plug-and-play run whose iterates run away.
///
/// Fires when the relative change stays above `factor` times its running
/// minimum for `window` consecutive iterations, or when the image norm
/// grows at every one of `window` consecutive iterations and ends more
/// than `factor` times larger than where that streak started.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRule {
    pub window: usize,
    pub factor: f64,
}

impl Default for DivergenceRule {
    fn default() -> Self {
        DivergenceRule {
            window: 50,
            factor: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// `γ = gamma_factor / L`, in `(0, 2)`.
    pub gamma_factor: f64,
    /// Regularisation weight of uSARA; the soft threshold is `γλ`.
    pub lambda: f64,
    /// Reweighting floor of uSARA.
    pub rho: f64,
    /// FB iterations per reweighting.
    pub inner_iters: usize,
    /// uSARA stopping tolerance on the relative image change.
    pub xi1: f64,
    /// Tolerance of the dual FB loop evaluating the uSARA prox.
    pub xi2: f64,
    /// AIRI stopping tolerance on the relative image change.
    pub xi3: f64,
    /// Cap on the total number of FB iterations.
    pub max_iter: usize,
    /// Optional cap on the number of uSARA reweightings; the run then
    /// stops after at most `max_outer · inner_iters` iterations.
    pub max_outer: Option<usize>,
    pub prox_max_iter: usize,
    pub equivariant: EquivariantMode,
    pub seed: u64,
    pub divergence: DivergenceRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma_factor: 1.98,
            lambda: 0.0,
            rho: 1.0,
            inner_iters: 5,
            xi1: 5e-6,
            xi2: 1e-5,
            xi3: 5e-6,
            max_iter: 6000,
            max_outer: None,
            prox_max_iter: 200,
            equivariant: EquivariantMode::Off,
            seed: 0,
            divergence: DivergenceRule::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.gamma_factor > 0.0 && self.gamma_factor < 2.0) {
            return bad(format!(
                "gamma_factor must lie in (0, 2), got {}",
                self.gamma_factor
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        for (name, v) in [("xi1", self.xi1), ("xi2", self.xi2), ("xi3", self.xi3)] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.inner_iters == 0 || self.max_iter == 0 || self.prox_max_iter == 0 {
            return bad("iteration counts must be at least 1".into());
        }
        if self.max_outer == Some(0) {
            return bad("max_outer must be at least 1".into());
        }
        if self.divergence.window == 0 || !(self.divergence.factor > 1.0) {
            return bad("divergence rule needs a nonzero window and a factor above 1".into());
        }
        Ok(())
    }

    fn iteration_cap(&self) -> usize {
        match self.max_outer {
            Some(o) => self.max_iter.min(o.saturating_mul(self.inner_iters)),
            None => self.max_iter,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub gradient: Duration,
    pub regularizer: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverReport {
    #[serde(skip)]
    pub image: Image,
    pub iterations: usize,
    /// Relative image change of every FB iteration.
    pub trace: Vec<f64>,
    pub timings: Timings,
    pub converged: bool,
    pub stop: StopReason,
    /// Number of reweightings performed (uSARA only).
    pub reweights: usize,
    pub gamma: f64,
}

/// What a callback sees after each FB iteration.
pub struct IterationInfo<'a> {
    /// 1-based iteration count.
    pub iteration: usize,
    pub relative_change: f64,
    pub image: &'a Image,
}

pub type Callback<'a> = &'a mut dyn FnMut(&IterationInfo);

/// Measurements, operator and derived quantities shared by both solvers.
pub struct Problem<'a> {
    op: &'a dyn LinearOperator,
    y: &'a [Complex64],
    backprojection: Image,
    toeplitz: Option<ToeplitzNormal>,
    lipschitz: f64,
    x0: Option<Image>,
}

impl<'a> Problem<'a> {
    /// Uses the operator's cached Lipschitz constant if it has one, and a
    /// power-method estimate otherwise.
    pub fn new(op: &'a dyn LinearOperator, y: &'a [Complex64]) -> Result<Self, SolverError> {
        op.check_data(y)?;
        let backprojection = op.adjoint(y)?;
        let lipschitz = match op.cached_lipschitz() {
            Some(l) => l,
            None => spectral_norm(op, &PowerOptions::default())?.value,
        };
        Ok(Problem {
            op,
            y,
            backprojection,
            toeplitz: None,
            lipschitz,
            x0: None,
        })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Result<Self, SolverError> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "Lipschitz constant must be positive, got {l}"
            )));
        }
        self.lipschitz = l;
        Ok(self)
    }

    /// Evaluates `Re{Φ†Φ}x` through the given circulant embedding instead
    /// of a forward and an adjoint pass.
    pub fn with_toeplitz(mut self, t: ToeplitzNormal) -> Result<Self, SolverError> {
        if t.dims() != self.op.image_dims() {
            return Err(OperatorError::DimMismatch {
                expected: self.op.image_dims(),
                actual: t.dims(),
            }
            .into());
        }
        self.toeplitz = Some(t);
        Ok(self)
    }

    pub fn with_initial(mut self, x0: Image) -> Result<Self, SolverError> {
        self.op.check_image(&x0)?;
        self.x0 = Some(x0);
        Ok(self)
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.op
    }

    pub fn data(&self) -> &[Complex64] {
        self.y
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `Re{Φ†y}`.
    pub fn backprojection(&self) -> &Image {
        &self.backprojection
    }

    /// The starting point: the one supplied, or the dirty image clipped to
    /// nonnegative values.
    pub fn initial_image(&self) -> Result<Image, SolverError> {
        if let Some(x) = &self.x0 {
            return Ok(x.clone());
        }
        let beta = self.op.beta()?;
        Ok(self.backprojection.map(|v| (beta * v).max(0.0)))
    }

    /// `∇f(x) = Re{Φ†Φ}x − Re{Φ†y}`.
    pub fn gradient(&self, x: &Image) -> Result<Image, SolverError> {
        let normal = match &self.toeplitz {
            Some(t) => t.apply(x)?,
            None => {
                self.op.check_image(x)?;
                self.op.normal(x)?
            }
        };
        Ok(normal.sub(&self.backprojection))
    }

    /// `½‖Φx − y‖²`.
    pub fn data_fidelity(&self, x: &Image) -> Result<f64, SolverError> {
        let r = self.op.forward(x)?;
        Ok(0.5 * r.iter().zip(self.y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
    }

    fn step_size(&self, config: &SolverConfig) -> f64 {
        config.gamma_factor / self.lipschitz
    }
}

/// `x − γ Re{Φ†(Φx − y)}` with one forward and one adjoint pass.
pub fn gradient_step(
    op: &dyn LinearOperator,
    x: &Image,
    y: &[Complex64],
    gamma: f64,
) -> Result<Image, SolverError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    op.check_image(x)?;
    op.check_data(y)?;
    let mut r = op.forward(x)?;
    for (a, b) in r.iter_mut().zip(y) {
        *a -= b;
    }
    Ok(x.axpy(-gamma, &op.adjoint(&r)?))
}

fn check_iterate(x: &Image, iteration: usize) -> Result<(), SolverError> {
    if x.check_finite().is_err() {
        return Err(SolverError::NonFinite { iteration });
    }
    Ok(())
}
