use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{LinearOperator, OperatorError};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-6,
            max_iter: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `Re{Φ†Φ}`. Stops once successive Rayleigh
/// quotients agree to `tol` in relative terms; otherwise returns the
/// last estimate with `converged = false`.
pub fn spectral_norm(op: &dyn LinearOperator, opts: &PowerOptions) -> Result<SpectralNorm, OperatorError> {
    spectral_norm_with(op.image_dims(), opts, |v| op.normal(v))
}

/// Power iteration on an arbitrary symmetric positive semi-definite map
/// given as a closure.
pub fn spectral_norm_with<F>(
    dims: (usize, usize),
    opts: &PowerOptions,
    mut apply: F,
) -> Result<SpectralNorm, OperatorError>
where
    F: FnMut(&Image) -> Result<Image, OperatorError>,
{
    if !(opts.tol > 0.0) {
        return Err(OperatorError::InvalidConfig(format!(
            "power-method tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let (r, c) = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = Image::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let n0 = v.norm();
    v.map_inplace(|x| x / n0);

    let mut prev = 0.0;
    for it in 1..=opts.max_iter {
        let w = apply(&v)?;
        let rq = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(SpectralNorm {
                value: 0.0,
                iterations: it,
                converged: true,
            });
        }
        v = w.map(|x| x / wn);
        if it > 1 && (rq - prev).abs() < opts.tol * rq.abs() {
            return Ok(SpectralNorm {
                value: rq,
                iterations: it,
                converged: true,
            });
        }
        prev = rq;
    }
    Ok(SpectralNorm {
        value: prev,
        iterations: opts.max_iter,
        converged: false,
    })
}
