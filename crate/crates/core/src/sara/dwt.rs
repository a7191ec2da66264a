//! Periodic orthonormal 2D discrete wavelet transform, Mallat layout:
//! after each level the approximation occupies the top-left quarter of
//! the current region, details the remaining three quarters.

pub(crate) struct FilterPair {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FilterPair {
    pub(crate) fn new(lo: &[f64]) -> Self {
        let l = lo.len();
        let hi = (0..l)
            .map(|i| if i % 2 == 0 { -lo[l - 1 - i] } else { lo[l - 1 - i] })
            .collect();
        FilterPair { lo: lo.to_vec(), hi }
    }
}

fn forward_1d(f: &FilterPair, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let half = n / 2;
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        let mut idx = 2 * k;
        for (h, g) in f.lo.iter().zip(&f.hi) {
            while idx >= n {
                idx -= n;
            }
            a += h * x[idx];
            d += g * x[idx];
            idx += 1;
        }
        out[k] = a;
        out[half + k] = d;
    }
}

fn inverse_1d(f: &FilterPair, c: &[f64], out: &mut [f64]) {
    let n = c.len();
    let half = n / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..half {
        let (a, d) = (c[k], c[half + k]);
        let mut idx = 2 * k;
        for (h, g) in f.lo.iter().zip(&f.hi) {
            while idx >= n {
                idx -= n;
            }
            out[idx] += h * a + g * d;
            idx += 1;
        }
    }
}

/// In-place forward transform of a `rows × cols` row-major buffer.
pub(crate) fn forward_2d(f: &FilterPair, data: &mut [f64], rows: usize, cols: usize, depth: usize) {
    let mut line = vec![0.0; rows.max(cols)];
    let mut out = vec![0.0; rows.max(cols)];
    let (mut r, mut c) = (rows, cols);
    for _ in 0..depth {
        for i in 0..r {
            let row = &mut data[i * cols..i * cols + c];
            forward_1d(f, row, &mut out[..c]);
            row.copy_from_slice(&out[..c]);
        }
        for j in 0..c {
            for i in 0..r {
                line[i] = data[i * cols + j];
            }
            forward_1d(f, &line[..r], &mut out[..r]);
            for i in 0..r {
                data[i * cols + j] = out[i];
            }
        }
        r /= 2;
        c /= 2;
    }
}

/// Inverse of [`forward_2d`].
pub(crate) fn inverse_2d(f: &FilterPair, data: &mut [f64], rows: usize, cols: usize, depth: usize) {
    let mut line = vec![0.0; rows.max(cols)];
    let mut out = vec![0.0; rows.max(cols)];
    for level in (0..depth).rev() {
        let (r, c) = (rows >> level, cols >> level);
        for j in 0..c {
            for i in 0..r {
                line[i] = data[i * cols + j];
            }
            inverse_1d(f, &line[..r], &mut out[..r]);
            for i in 0..r {
                data[i * cols + j] = out[i];
            }
        }
        for i in 0..r {
            let row = &mut data[i * cols..i * cols + c];
            inverse_1d(f, row, &mut out[..c]);
            row.copy_from_slice(&out[..c]);
        }
    }
}
