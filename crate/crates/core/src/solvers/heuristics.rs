use serde::{Deserialize, Serialize};

use super::SolverError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicCorrection {
    #[default]
    None,
    /// Divide by 3, the per-basis normalisation of the nine-basis
    /// dictionary.
    OneThird,
}

fn check(tau: f64, l: f64) -> Result<(), SolverError> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "Lipschitz constant must be positive, got {l}"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "noise level must be nonnegative, got {tau}"
        )));
    }
    Ok(())
}

/// Image-domain noise level `σ = τ/√(2L)` for the training of an AIRI
/// denoiser.
pub fn heuristic_sigma(tau: f64, l: f64) -> Result<f64, SolverError> {
    check(tau, l)?;
    Ok(tau / (2.0 * l).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UsaraHeuristic {
    /// Soft-thresholding level `γλ`.
    pub gamma_lambda: f64,
    /// Reweighting floor, set to the same wavelet-domain noise level.
    pub rho: f64,
}

impl UsaraHeuristic {
    /// `λ` for a given step size.
    pub fn lambda(&self, gamma: f64) -> f64 {
        self.gamma_lambda / gamma
    }
}

pub fn heuristic_usara(
    tau: f64,
    l: f64,
    correction: HeuristicCorrection,
) -> Result<UsaraHeuristic, SolverError> {
    let mut level = heuristic_sigma(tau, l)?;
    if correction == HeuristicCorrection::OneThird {
        level /= 3.0;
    }
    Ok(UsaraHeuristic {
        gamma_lambda: level,
        rho: level,
    })
}
