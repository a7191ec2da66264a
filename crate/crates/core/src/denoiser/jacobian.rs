//! Power-method estimate of `‖∇Q(x)‖_S` with `Q = 2D − I`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{DenoiserError, Differentiable};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianNorm {
    pub value: f64,
    pub iterations: usize,
    /// An activation sat exactly on a relu kink; relu'(0) = 0 was used.
    pub kink: bool,
}

/// Runs `iters` power iterations on `∇Qᵀ∇Q` at `x`.
///
/// The estimate after each iteration is `‖∇Q v‖/‖v‖` for the current
/// iterate `v`; the returned value is the largest one seen, so it never
/// decreases as `iters` grows.
pub fn jacobian_spectral_norm(
    d: &dyn Differentiable,
    x: &Image,
    iters: usize,
    seed: u64,
) -> Result<JacobianNorm, DenoiserError> {
    if iters == 0 {
        return Err(DenoiserError::InvalidArgument("iters must be at least 1".into()));
    }
    if x.check_finite().is_err() {
        return Err(DenoiserError::NonFiniteInput);
    }
    let lin = d.linearize(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = x.dims();
    let mut v = Image::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut best = 0.0f64;
    for _ in 0..iters {
        let jv = lin.jvp(&v)?;
        let qv = jv.scaled(2.0).sub(&v);
        let vv = v.dot(&v);
        let est = (qv.dot(&qv) / vv).sqrt();
        best = best.max(est);
        let jtq = lin.vjp(&qv)?;
        let next = jtq.scaled(2.0).sub(&qv);
        let n = next.norm();
        if !n.is_finite() {
            return Err(DenoiserError::NonFinite { layer: 0 });
        }
        if n == 0.0 {
            break;
        }
        v = next.scaled(1.0 / n);
    }
    Ok(JacobianNorm {
        value: best,
        iterations: iters,
        kink: lin.at_kink(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub norms: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    /// Number of sample points where a relu kink was hit.
    pub kinks: usize,
    pub margin: f64,
    pub passed: bool,
}

/// Estimates the Jacobian norm at `samples_per_pair` points drawn
/// uniformly on each segment `[z, u]`; passes iff the largest estimate is
/// at most `1 + margin`.
pub fn certify(
    d: &dyn Differentiable,
    pairs: &[(Image, Image)],
    samples_per_pair: usize,
    iters: usize,
    seed: u64,
    margin: f64,
) -> Result<CertifyReport, DenoiserError> {
    if pairs.is_empty() || samples_per_pair == 0 {
        return Err(DenoiserError::InvalidArgument(
            "certification needs at least one sample point".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms = Vec::with_capacity(pairs.len() * samples_per_pair);
    let mut kinks = 0;
    for (z, u) in pairs {
        if z.dims() != u.dims() {
            return Err(DenoiserError::DimMismatch {
                expected: z.dims(),
                actual: u.dims(),
            });
        }
        for _ in 0..samples_per_pair {
            let t: f64 = rng.random();
            let x = u.axpy(t, &z.sub(u));
            let est = jacobian_spectral_norm(d, &x, iters, rng.random())?;
            kinks += usize::from(est.kink);
            norms.push(est.value);
        }
    }
    let max = norms.iter().copied().fold(0.0, f64::max);
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    Ok(CertifyReport {
        passed: max <= 1.0 + margin,
        norms,
        max,
        mean,
        kinks,
        margin,
    })
}
