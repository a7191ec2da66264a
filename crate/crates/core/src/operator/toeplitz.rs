//! `Re{Φ†Φ}` as a convolution, evaluated with FFTs on a doubled grid.
//!
//! For a Fourier measurement operator `(Φ†Φ)_{pq}` only depends on
//! `p − q`, so the normal operator is fully described by one kernel image
//! twice the size of the target. Applying it costs two FFTs regardless of
//! the number of visibilities.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{power, LinearOperator, MeasurementOperator, OperatorError, PowerOptions, SpectralNorm};
use crate::image::Image;

#[derive(Clone)]
pub struct ToeplitzNormal {
    rows: usize,
    cols: usize,
    // spectrum of the circulant embedding, 2rows x 2cols row-major
    spectrum: Arc<Vec<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ToeplitzNormal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzNormal")
            .field("dims", &(self.rows, self.cols))
            .finish()
    }
}

fn fft2(buf: &mut [Complex64], rows: usize, cols: usize, row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
    let mut scratch =
        vec![Complex64::new(0.0, 0.0); row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
    row.process_with_scratch(buf, &mut scratch);
    let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = buf[r * cols + c];
        }
    }
    col.process_with_scratch(&mut t, &mut scratch);
    for c in 0..cols {
        for r in 0..rows {
            buf[r * cols + c] = t[c * rows + r];
        }
    }
}

impl ToeplitzNormal {
    /// Builds the kernel by back-projecting the squared row weights of
    /// `op` onto an image of twice its size.
    pub fn from_operator(op: &MeasurementOperator) -> Result<Self, OperatorError> {
        let (rows, cols) = op.image_dims();
        let (big_r, big_c) = (2 * rows, 2 * cols);
        let big = MeasurementOperator::build(
            op.coverage().clone(),
            (big_r, big_c),
            op.oversampling(),
            op.kernel_spec(),
        )?;
        let weights: Vec<Complex64> = (0..op.num_measurements())
            .map(|k| Complex64::new(op.row_gain(k).powi(2), 0.0))
            .collect();
        // kernel(d) = Re Σ_k w_k² e^{+iω_k·d}, d relative to the centre
        let kernel = big.adjoint(&weights)?;
        drop(big);

        let mut circ = vec![Complex64::new(0.0, 0.0); big_r * big_c];
        for r in 0..big_r {
            let dr = r as i64 - rows as i64;
            if dr == -(rows as i64) {
                continue;
            }
            for c in 0..big_c {
                let dc = c as i64 - cols as i64;
                if dc == -(cols as i64) {
                    continue;
                }
                let gr = dr.rem_euclid(big_r as i64) as usize;
                let gc = dc.rem_euclid(big_c as i64) as usize;
                circ[gr * big_c + gc] = Complex64::new(kernel[(r, c)], 0.0);
            }
        }
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(big_c);
        let row_inv = planner.plan_fft_inverse(big_c);
        let col_fwd = planner.plan_fft_forward(big_r);
        let col_inv = planner.plan_fft_inverse(big_r);
        fft2(&mut circ, big_r, big_c, row_fwd.as_ref(), col_fwd.as_ref());
        // symmetric real kernel: the spectrum is real up to rounding
        let scale = 1.0 / (big_r * big_c) as f64;
        let spectrum = circ.iter().map(|v| v.re * scale).collect();
        Ok(ToeplitzNormal {
            rows,
            cols,
            spectrum: Arc::new(spectrum),
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `Re{Φ†Φ}x`.
    pub fn apply(&self, x: &Image) -> Result<Image, OperatorError> {
        if x.dims() != (self.rows, self.cols) {
            return Err(OperatorError::DimMismatch {
                expected: (self.rows, self.cols),
                actual: x.dims(),
            });
        }
        let (big_r, big_c) = (2 * self.rows, 2 * self.cols);
        let mut buf = vec![Complex64::new(0.0, 0.0); big_r * big_c];
        for r in 0..self.rows {
            for c in 0..self.cols {
                buf[r * big_c + c] = Complex64::new(x[(r, c)], 0.0);
            }
        }
        fft2(
            &mut buf,
            big_r,
            big_c,
            self.row_fwd.as_ref(),
            self.col_fwd.as_ref(),
        );
        for (b, s) in buf.iter_mut().zip(self.spectrum.iter()) {
            *b *= *s;
        }
        fft2(
            &mut buf,
            big_r,
            big_c,
            self.row_inv.as_ref(),
            self.col_inv.as_ref(),
        );
        Ok(Image::from_fn(self.rows, self.cols, |r, c| buf[r * big_c + c].re))
    }

    /// Power-method estimate of the largest eigenvalue of the embedded
    /// normal operator.
    pub fn spectral_norm(&self, opts: &PowerOptions) -> Result<SpectralNorm, OperatorError> {
        power::spectral_norm_with(self.dims(), opts, |v| self.apply(v))
    }
}
