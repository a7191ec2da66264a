use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{
    power, KaiserBessel, KernelSpec, LinearOperator, OperatorError, PowerOptions, SpectralNorm, UVCoverage,
};
use crate::image::Image;

/// Non-zero pattern of one row of `G`: a separable `J × J` footprint on
/// the oversampled grid. Starts are already wrapped into the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Footprint {
    pub row_start: usize,
    pub col_start: usize,
    pub row_weights: Vec<f64>,
    pub col_weights: Vec<f64>,
}

#[derive(Clone)]
struct Plans {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

/// `Φ = Θ G F Z` on an oversampled grid with a Kaiser-Bessel kernel.
///
/// Visibilities are held internally in a canonical order fixed by their
/// coordinates, so the floating-point reduction order of the adjoint
/// does not depend on how the caller ordered the coverage.
#[derive(Clone)]
pub struct MeasurementOperator {
    coverage: Arc<UVCoverage>,
    rows: usize,
    cols: usize,
    grid_rows: usize,
    grid_cols: usize,
    oversampling: f64,
    kernel: KaiserBessel,
    kernel_spec: KernelSpec,
    // canonical position -> caller index
    order: Arc<Vec<u32>>,
    starts: Arc<Vec<(i64, i64)>>,
    // per canonical visibility: J row weights then J column weights
    weights: Arc<Vec<f64>>,
    corr_row: Vec<f64>,
    corr_col: Vec<f64>,
    // natural weighting, caller order
    vis_weights: Option<Arc<Vec<f64>>>,
    gain: f64,
    plans: Plans,
    lipschitz: OnceLock<f64>,
}

impl std::fmt::Debug for MeasurementOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementOperator")
            .field("dims", &(self.rows, self.cols))
            .field("grid", &(self.grid_rows, self.grid_cols))
            .field("m", &self.order.len())
            .field("support", &self.kernel.support)
            .field("beta", &self.kernel.beta)
            .field("gain", &self.gain)
            .finish()
    }
}

fn oversampled_len(n: usize, oversampling: f64) -> usize {
    let k = (n as f64 * oversampling).ceil() as usize;
    k + (k % 2)
}

#[inline]
fn wrap(i: i64, k: usize) -> usize {
    i.rem_euclid(k as i64) as usize
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

impl MeasurementOperator {
    pub fn build(
        coverage: UVCoverage,
        dims: (usize, usize),
        oversampling: f64,
        kernel: KernelSpec,
    ) -> Result<Self, OperatorError> {
        let (rows, cols) = dims;
        if rows == 0 || cols == 0 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(OperatorError::OddDims(rows, cols));
        }
        if !(oversampling >= 1.0) {
            return Err(OperatorError::InvalidConfig(format!(
                "oversampling must be >= 1, got {oversampling}"
            )));
        }
        if kernel.support < 2 {
            return Err(OperatorError::InvalidConfig(format!(
                "kernel support must be >= 2, got {}",
                kernel.support
            )));
        }
        let band = coverage.band_half_width();
        for (index, p) in coverage.points().iter().enumerate() {
            if !(p[0].abs() <= band && p[1].abs() <= band) {
                return Err(OperatorError::OutOfBand {
                    index,
                    u: p[0],
                    v: p[1],
                    band,
                });
            }
        }

        let grid_rows = oversampled_len(rows, oversampling);
        let grid_cols = oversampled_len(cols, oversampling);
        let kb = KaiserBessel::new(kernel, oversampling);
        let j = kb.support;
        let half = 0.5 * j as f64;

        // v runs along image rows, u along columns
        let pos: Vec<(f64, f64)> = coverage
            .points()
            .iter()
            .map(|p| {
                (
                    p[1] * grid_rows as f64 / (2.0 * band),
                    p[0] * grid_cols as f64 / (2.0 * band),
                )
            })
            .collect();
        let start_of = |t: f64| (t - half).floor() as i64 + 1;

        let mut order: Vec<u32> = (0..pos.len() as u32).collect();
        order.sort_by(|&a, &b| {
            let (ta, tb) = (pos[a as usize], pos[b as usize]);
            (start_of(ta.1), start_of(ta.0))
                .cmp(&(start_of(tb.1), start_of(tb.0)))
                .then(ta.1.total_cmp(&tb.1))
                .then(ta.0.total_cmp(&tb.0))
        });

        let mut starts = Vec::with_capacity(pos.len());
        let mut weights = Vec::with_capacity(pos.len() * 2 * j);
        for &k in &order {
            let (tr, tc) = pos[k as usize];
            let (r0, c0) = (start_of(tr), start_of(tc));
            starts.push((r0, c0));
            for a in 0..j {
                weights.push(kb.eval(tr - (r0 + a as i64) as f64));
            }
            for a in 0..j {
                weights.push(kb.eval(tc - (c0 + a as i64) as f64));
            }
        }

        let corr = |n: usize, k: usize| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let p = i as f64 - (n / 2) as f64;
                    1.0 / kb.fourier(p / k as f64)
                })
                .collect()
        };

        let mut planner = FftPlanner::new();
        let plans = Plans {
            row_fwd: planner.plan_fft_forward(grid_cols),
            row_inv: planner.plan_fft_inverse(grid_cols),
            col_fwd: planner.plan_fft_forward(grid_rows),
            col_inv: planner.plan_fft_inverse(grid_rows),
        };

        Ok(MeasurementOperator {
            coverage: Arc::new(coverage),
            rows,
            cols,
            grid_rows,
            grid_cols,
            oversampling,
            kernel: kb,
            kernel_spec: kernel,
            order: Arc::new(order),
            starts: Arc::new(starts),
            weights: Arc::new(weights),
            corr_row: corr(rows, grid_rows),
            corr_col: corr(cols, grid_cols),
            vis_weights: None,
            gain: 1.0,
            plans,
            lipschitz: OnceLock::new(),
        })
    }

    /// Natural weighting: scales each row of `Φ` by the inverse noise
    /// standard deviation of its visibility.
    pub fn with_natural_weights(&self, noise_std: &[f64]) -> Result<Self, OperatorError> {
        self.check_data_len(noise_std.len())?;
        if let Some(i) = noise_std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(OperatorError::InvalidConfig(format!(
                "noise standard deviation at visibility {i} must be positive"
            )));
        }
        let mut op = self.clone();
        op.vis_weights = Some(Arc::new(noise_std.iter().map(|s| 1.0 / s).collect()));
        op.lipschitz = OnceLock::new();
        Ok(op)
    }

    /// Operator with every entry of `G` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut op = self.clone();
        op.gain *= factor;
        op.lipschitz = OnceLock::new();
        op
    }

    fn check_data_len(&self, len: usize) -> Result<(), OperatorError> {
        if len != self.order.len() {
            return Err(OperatorError::LengthMismatch {
                expected: self.order.len(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn coverage(&self) -> &UVCoverage {
        &self.coverage
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.grid_rows, self.grid_cols)
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    pub fn kernel(&self) -> &KaiserBessel {
        &self.kernel
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        self.kernel_spec
    }

    /// Combined natural weight and gain of visibility `index`.
    pub fn row_gain(&self, index: usize) -> f64 {
        self.row_scale(index)
    }

    /// Gridding-correction factors folded into `Z` (rows, columns).
    pub fn deapodization(&self) -> (&[f64], &[f64]) {
        (&self.corr_row, &self.corr_col)
    }

    /// Footprint of row `index` of `G`, in the caller's visibility order.
    pub fn footprint(&self, index: usize) -> Footprint {
        let k = self
            .order
            .iter()
            .position(|&o| o as usize == index)
            .expect("visibility index out of range");
        let j = self.kernel.support;
        let (r0, c0) = self.starts[k];
        let w = &self.weights[k * 2 * j..(k + 1) * 2 * j];
        Footprint {
            row_start: wrap(r0, self.grid_rows),
            col_start: wrap(c0, self.grid_cols),
            row_weights: w[..j].to_vec(),
            col_weights: w[j..].to_vec(),
        }
    }

    /// Non-zero entries `(grid row, grid col, value)` of row `index` of `G`.
    pub fn g_row(&self, index: usize) -> Vec<(usize, usize, f64)> {
        let fp = self.footprint(index);
        let mut out = Vec::new();
        for (a, wr) in fp.row_weights.iter().enumerate() {
            for (b, wc) in fp.col_weights.iter().enumerate() {
                let v = wr * wc * self.gain;
                if v != 0.0 {
                    out.push((
                        (fp.row_start + a) % self.grid_rows,
                        (fp.col_start + b) % self.grid_cols,
                        v,
                    ));
                }
            }
        }
        out
    }

    /// Power-method estimate of `‖Re{Φ†Φ}‖_S`; the first converged value
    /// is cached for [`LinearOperator::cached_lipschitz`].
    pub fn spectral_norm(&self, opts: &PowerOptions) -> Result<SpectralNorm, OperatorError> {
        let est = power::spectral_norm(self, opts)?;
        if est.converged {
            let _ = self.lipschitz.set(est.value);
        }
        Ok(est)
    }

    /// Cached Lipschitz constant, computed with default power-method
    /// options on first use.
    pub fn lipschitz(&self) -> Result<f64, OperatorError> {
        if let Some(l) = self.lipschitz.get() {
            return Ok(*l);
        }
        let est = power::spectral_norm(self, &PowerOptions::default())?;
        Ok(*self.lipschitz.get_or_init(|| est.value))
    }

    pub fn set_lipschitz(&self, value: f64) -> bool {
        self.lipschitz.set(value).is_ok()
    }

    #[inline]
    fn row_scale(&self, caller_index: usize) -> f64 {
        match &self.vis_weights {
            Some(w) => w[caller_index] * self.gain,
            None => self.gain,
        }
    }

    /// Row blocks of the oversampled grid that hold image pixels.
    fn occupied_rows(&self) -> [std::ops::Range<usize>; 2] {
        let h = self.rows / 2;
        [0..h, self.grid_rows - h..self.grid_rows]
    }
}

impl LinearOperator for MeasurementOperator {
    fn image_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn num_measurements(&self) -> usize {
        self.order.len()
    }

    fn cached_lipschitz(&self) -> Option<f64> {
        self.lipschitz.get().copied()
    }

    fn forward(&self, x: &Image) -> Result<Vec<Complex64>, OperatorError> {
        self.check_image(x)?;
        let (k1, k2) = (self.grid_rows, self.grid_cols);
        let zero = Complex64::new(0.0, 0.0);
        let mut grid = vec![zero; k1 * k2];
        let (hr, hc) = ((self.rows / 2) as i64, (self.cols / 2) as i64);
        for r in 0..self.rows {
            let gr = wrap(r as i64 - hr, k1);
            let cr = self.corr_row[r];
            let src = &x.as_slice()[r * self.cols..(r + 1) * self.cols];
            for (c, &v) in src.iter().enumerate() {
                let gc = wrap(c as i64 - hc, k2);
                grid[gr * k2 + gc] = Complex64::new(v * cr * self.corr_col[c], 0.0);
            }
        }

        let mut scratch = vec![
            zero;
            self.plans
                .row_fwd
                .get_inplace_scratch_len()
                .max(self.plans.col_fwd.get_inplace_scratch_len())
        ];
        for block in self.occupied_rows() {
            self.plans
                .row_fwd
                .process_with_scratch(&mut grid[block.start * k2..block.end * k2], &mut scratch);
        }
        // columns become contiguous: t[q2 * k1 + q1]
        let mut t = vec![zero; k1 * k2];
        transpose(&grid, k1, k2, &mut t);
        drop(grid);
        self.plans.col_fwd.process_with_scratch(&mut t, &mut scratch);

        let j = self.kernel.support;
        let mut out = vec![zero; self.order.len()];
        for (k, &orig) in self.order.iter().enumerate() {
            let (r0, c0) = self.starts[k];
            let w = &self.weights[k * 2 * j..(k + 1) * 2 * j];
            let (wr, wc) = w.split_at(j);
            let fast_rows = r0 >= 0 && (r0 as usize + j) <= k1;
            let mut acc = zero;
            for (b, &wcb) in wc.iter().enumerate() {
                let col = wrap(c0 + b as i64, k2);
                let base = col * k1;
                let mut inner = zero;
                if fast_rows {
                    let seg = &t[base + r0 as usize..base + r0 as usize + j];
                    for (a, s) in seg.iter().enumerate() {
                        inner += s * wr[a];
                    }
                } else {
                    for (a, &wra) in wr.iter().enumerate() {
                        inner += t[base + wrap(r0 + a as i64, k1)] * wra;
                    }
                }
                acc += inner * wcb;
            }
            out[orig as usize] = acc * self.row_scale(orig as usize);
        }
        Ok(out)
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<Image, OperatorError> {
        self.check_data(y)?;
        let (k1, k2) = (self.grid_rows, self.grid_cols);
        let zero = Complex64::new(0.0, 0.0);
        let j = self.kernel.support;

        let mut t = vec![zero; k1 * k2];
        for (k, &orig) in self.order.iter().enumerate() {
            let yv = y[orig as usize] * self.row_scale(orig as usize);
            if yv == zero {
                continue;
            }
            let (r0, c0) = self.starts[k];
            let w = &self.weights[k * 2 * j..(k + 1) * 2 * j];
            let (wr, wc) = w.split_at(j);
            let fast_rows = r0 >= 0 && (r0 as usize + j) <= k1;
            for (b, &wcb) in wc.iter().enumerate() {
                let col = wrap(c0 + b as i64, k2);
                let base = col * k1;
                let yc = yv * wcb;
                if fast_rows {
                    let seg = &mut t[base + r0 as usize..base + r0 as usize + j];
                    for (a, s) in seg.iter_mut().enumerate() {
                        *s += yc * wr[a];
                    }
                } else {
                    for (a, &wra) in wr.iter().enumerate() {
                        t[base + wrap(r0 + a as i64, k1)] += yc * wra;
                    }
                }
            }
        }

        let mut scratch = vec![
            zero;
            self.plans
                .row_inv
                .get_inplace_scratch_len()
                .max(self.plans.col_inv.get_inplace_scratch_len())
        ];
        self.plans.col_inv.process_with_scratch(&mut t, &mut scratch);

        // back to row-major, but only the rows that carry pixels
        let h = self.rows / 2;
        let mut rows_buf = vec![zero; self.rows * k2];
        for (slot, gr) in (0..h).chain(k1 - h..k1).enumerate() {
            let dst = &mut rows_buf[slot * k2..(slot + 1) * k2];
            for (gc, d) in dst.iter_mut().enumerate() {
                *d = t[gc * k1 + gr];
            }
        }
        drop(t);
        self.plans
            .row_inv
            .process_with_scratch(&mut rows_buf, &mut scratch);

        let hc = (self.cols / 2) as i64;
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            // slot layout: grid rows 0..h hold pixel rows h..rows
            let slot = if r >= h { r - h } else { h + r };
            let src = &rows_buf[slot * k2..(slot + 1) * k2];
            let cr = self.corr_row[r];
            for c in 0..self.cols {
                let gc = wrap(c as i64 - hc, k2);
                out[r * self.cols + c] = src[gc].re * cr * self.corr_col[c];
            }
        }
        Ok(Image::from_vec(self.rows, self.cols, out).unwrap())
    }
}
