use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{data_norm, LinearOperator, OperatorError};
use crate::image::Image;

/// Measured visibilities `y` with the noise level used to make them.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilitySet {
    pub values: Vec<Complex64>,
    /// Standard deviation of the complex noise (`τ²` total variance).
    pub tau: f64,
}

impl VisibilitySet {
    pub fn new(values: Vec<Complex64>, tau: f64) -> Self {
        VisibilitySet { values, tau }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn permuted(&self, order: &[usize]) -> VisibilitySet {
        VisibilitySet {
            values: order.iter().map(|&i| self.values[i]).collect(),
            tau: self.tau,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    Noiseless,
    /// Input SNR `20 log10(‖Φx̄‖/τ)` in dB.
    InputSnrDb(f64),
    /// Input SNR `20 log10(‖Φx̄‖/(√m τ))` in dB: the signal is the RMS
    /// visibility amplitude, so `τ` shrinks as `1/√m` for a fixed image.
    PerVisibilitySnrDb(f64),
}

impl NoiseSpec {
    /// `+∞` dB is read as noiseless.
    pub fn from_isnr(db: f64) -> Self {
        if db == f64::INFINITY {
            NoiseSpec::Noiseless
        } else {
            NoiseSpec::InputSnrDb(db)
        }
    }
}

/// `y = Φx̄ + e` with complex Gaussian noise whose real and imaginary
/// parts each have variance `τ²/2`.
pub fn simulate_visibilities<R: Rng + ?Sized>(
    op: &dyn LinearOperator,
    groundtruth: &Image,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<VisibilitySet, OperatorError> {
    op.check_image(groundtruth)?;
    let clean = op.forward(groundtruth)?;
    let signal = data_norm(&clean);
    match noise {
        NoiseSpec::Noiseless => Ok(VisibilitySet::new(clean, 0.0)),
        NoiseSpec::InputSnrDb(db) | NoiseSpec::PerVisibilitySnrDb(db) => {
            if !db.is_finite() {
                return Err(OperatorError::InvalidConfig(format!(
                    "input SNR must be finite, got {db}"
                )));
            }
            if signal == 0.0 {
                return Err(OperatorError::ZeroSignal);
            }
            let reference = match noise {
                NoiseSpec::PerVisibilitySnrDb(_) => signal / (clean.len() as f64).sqrt(),
                _ => signal,
            };
            let tau = reference * 10f64.powf(-db / 20.0);
            let s = tau / std::f64::consts::SQRT_2;
            let values = clean
                .into_iter()
                .map(|v| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    v + Complex64::new(s * re, s * im)
                })
                .collect();
            Ok(VisibilitySet::new(values, tau))
        }
    }
}
