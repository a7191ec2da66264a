//! Oracles shared by the integration tests. None of them call the
//! routine they are checking.
#![allow(dead_code)]

use airi::sara::Dictionary;
use airi::Image;

/// Dense `Ψ†` as a row-major `(b·n) × n` matrix, assembled column by
/// column from the analysis of unit impulses.
pub fn dense_analysis(dict: &Dictionary, dims: (usize, usize)) -> Vec<Vec<f64>> {
    let n = dims.0 * dims.1;
    let mut cols = Vec::with_capacity(n);
    let mut e = Image::zeros(dims.0, dims.1);
    for j in 0..n {
        e.as_mut_slice()[j] = 1.0;
        cols.push(dict.analysis(&e).unwrap().into_vec());
        e.as_mut_slice()[j] = 0.0;
    }
    let m = cols[0].len();
    (0..m).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn matvec_t(a: &[Vec<f64>], w: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, wj) in a.iter().zip(w) {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x * wj;
        }
    }
    out
}

/// ADMM solver for `min_u ½‖u − z‖² + ι₊(u) + Σ_j η_j |(A u)_j|` with
/// the splittings `w = Au` and `s = u`, for an analysis matrix with
/// `AᵀA = I`. It stops once a duality gap below `gap_tol` certifies the
/// answer; the objective is 1-strongly convex, so the returned point is
/// within `sqrt(2·gap_tol)` of the minimiser.
pub fn weighted_l1_positive_prox_oracle(a: &[Vec<f64>], z: &[f64], eta: &[f64], gap_tol: f64) -> Vec<f64> {
    let n = z.len();
    let m = a.len();
    for i in 0..n {
        for j in 0..n {
            let g: f64 = a.iter().map(|r| r[i] * r[j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-10, "oracle needs AᵀA = I");
        }
    }

    let primal = |u: &[f64]| -> f64 {
        let fid: f64 = u.iter().zip(z).map(|(x, y)| 0.5 * (x - y) * (x - y)).sum();
        let reg: f64 = matvec(a, u).iter().zip(eta).map(|(c, e)| e * c.abs()).sum();
        fid + reg
    };
    // dual objective for a box-feasible p: −F*(−Aᵀp), F = ½‖·−z‖² + ι₊,
    // together with the primal point it induces
    let dual = |p: &[f64]| -> (f64, Vec<f64>) {
        let w: Vec<f64> = matvec_t(a, p, n).iter().map(|x| -x).collect();
        let u: Vec<f64> = z.iter().zip(&w).map(|(zi, wi)| (zi + wi).max(0.0)).collect();
        let fstar: f64 = (0..n).map(|i| w[i] * u[i] - 0.5 * (u[i] - z[i]).powi(2)).sum();
        (-fstar, u)
    };

    let rho = 1.0;
    let mut u: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
    let mut w = matvec(a, &u);
    let mut s = u.clone();
    let mut l1 = vec![0.0; m];
    let mut l2 = vec![0.0; n];
    let mut best = (f64::INFINITY, u.clone());
    for it in 0..2_000_000 {
        let wl: Vec<f64> = w.iter().zip(&l1).map(|(a, b)| a - b).collect();
        let back = matvec_t(a, &wl, n);
        u = (0..n)
            .map(|i| (z[i] + rho * back[i] + rho * (s[i] - l2[i])) / (1.0 + 2.0 * rho))
            .collect();
        let au = matvec(a, &u);
        for j in 0..m {
            let t = au[j] + l1[j];
            let e = eta[j] / rho;
            w[j] = if t > e {
                t - e
            } else if t < -e {
                t + e
            } else {
                0.0
            };
            l1[j] += au[j] - w[j];
        }
        for i in 0..n {
            s[i] = (u[i] + l2[i]).max(0.0);
            l2[i] += u[i] - s[i];
        }
        if it % 25 == 0 {
            let p: Vec<f64> = l1.iter().zip(eta).map(|(l, e)| (rho * l).clamp(-e, *e)).collect();
            let (d, ud) = dual(&p);
            for cand in [&s, &ud] {
                let gap = primal(cand) - d;
                if gap < best.0 {
                    best = (gap, cand.clone());
                }
            }
            if best.0 < gap_tol {
                break;
            }
        }
    }
    assert!(best.0 < gap_tol, "oracle did not certify: gap {}", best.0);
    best.1
}
