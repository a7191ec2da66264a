use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetError, LowDrImage};
use crate::image::Image;

/// The exponentiation parameter `a` for which images with floor `σ₀`
/// reach a nominal dynamic range `1/σ`: `a = b/σ` with `b` the largest
/// root of `b = σ(1 + b)^{1/σ₀}`.
pub fn solve_exponentiation(sigma: f64, sigma0: f64) -> Result<f64, DatasetError> {
    for (name, v) in [("sigma", sigma), ("sigma0", sigma0)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(DatasetError::InvalidArgument(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    let p = 1.0 / sigma0;
    // log form of σ(1 + b)^p − b, negative between the two roots
    let h = |b: f64| sigma.ln() + p * b.ln_1p() - b.ln();
    let b_min = 1.0 / (p - 1.0);
    if !(h(b_min) < 0.0) {
        return Err(DatasetError::NoRoot { sigma, sigma0 });
    }
    let mut lo = b_min;
    let mut hi = 2.0 * b_min;
    while h(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(DatasetError::NoRoot { sigma, sigma0 });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = if h(lo).abs() < h(hi).abs() { lo } else { hi };
    let a = b / sigma;
    if !(a > 1.0) {
        return Err(DatasetError::NoRoot { sigma, sigma0 });
    }
    Ok(a)
}

/// Pixel-wise `(a^u − 1)/a`.
pub fn exponentiate(u: &Image, a: f64) -> Result<Image, DatasetError> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "exponentiation parameter must exceed 1, got {a}"
        )));
    }
    let ln_a = a.ln();
    Ok(u.map(|v| (v * ln_a).exp_m1() / a))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub groundtruth: Image,
    pub noisy: Image,
    pub sigma: f64,
    pub a: f64,
    pub seed: u64,
}

/// `u = exponentiate(u_low, a)`, `z = u + σw` with `w` drawn from `seed`.
pub fn make_pair(u_low: &LowDrImage, a: f64, sigma: f64, seed: u64) -> Result<TrainingPair, DatasetError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "noise level must be nonnegative, got {sigma}"
        )));
    }
    let u = exponentiate(u_low.image(), a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = u.clone();
    for v in noisy.as_mut_slice() {
        *v += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(TrainingPair {
        groundtruth: u,
        noisy,
        sigma,
        a,
        seed,
    })
}
