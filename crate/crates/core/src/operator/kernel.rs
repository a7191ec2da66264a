//! Kaiser-Bessel gridding kernel and its continuous Fourier transform.

use serde::{Deserialize, Serialize};

/// Interpolation kernel parameters. `beta = None` picks the usual
/// Beatty et al. shape parameter for the oversampling in use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub support: usize,
    pub beta: Option<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            support: 7,
            beta: None,
        }
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    // power series; converges for every x, enough terms for |x| <= 50
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

#[derive(Clone, Copy, Debug)]
pub struct KaiserBessel {
    pub support: usize,
    pub beta: f64,
    norm: f64,
}

impl KaiserBessel {
    pub fn new(spec: KernelSpec, oversampling: f64) -> Self {
        let j = spec.support as f64;
        let beta = spec.beta.unwrap_or_else(|| {
            let a = oversampling;
            let arg = (j / a).powi(2) * (a - 0.5).powi(2) - 0.8;
            std::f64::consts::PI * arg.max(0.0).sqrt()
        });
        KaiserBessel {
            support: spec.support,
            beta,
            norm: bessel_i0(beta),
        }
    }

    /// Kernel value at offset `s` in grid units; zero outside `|s| <= J/2`.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let half = 0.5 * self.support as f64;
        let r = s / half;
        if r.abs() > 1.0 {
            return 0.0;
        }
        bessel_i0(self.beta * (1.0 - r * r).sqrt()) / self.norm
    }

    /// `∫ φ(s) exp(2πi s ξ) ds` with ξ in cycles per grid cell.
    pub fn fourier(&self, xi: f64) -> f64 {
        let j = self.support as f64;
        let z2 = self.beta * self.beta - (std::f64::consts::PI * j * xi).powi(2);
        let val = if z2 > 1e-12 {
            let z = z2.sqrt();
            z.sinh() / z
        } else if z2 < -1e-12 {
            let z = (-z2).sqrt();
            z.sin() / z
        } else {
            1.0
        };
        j * val / self.norm
    }
}
