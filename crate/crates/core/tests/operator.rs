use airi::operator::{
    data_dot, simulate_visibilities, spectral_norm, DenseOperator, KernelSpec, LinearOperator,
    MeasurementOperator, NoiseSpec, OperatorError, PowerOptions, ToeplitzNormal, UVCoverage,
};
use airi::Image;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

const BAND: f64 = 1000.0;

fn random_coverage(rng: &mut ChaCha8Rng, m: usize) -> UVCoverage {
    let pts = (0..m)
        .map(|_| [rng.random_range(-BAND..=BAND), rng.random_range(-BAND..=BAND)])
        .collect();
    UVCoverage::new(pts, BAND).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Image {
    Image::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_data(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn build(cov: UVCoverage, dims: (usize, usize)) -> MeasurementOperator {
    MeasurementOperator::build(cov, dims, 2.0, KernelSpec::default()).unwrap()
}

/// Direct non-uniform DFT: `A[k, p] = exp(-i (ω_v p_row + ω_u p_col))`
/// with centred pixel coordinates and ω = π · (u / band).
fn direct_dft(cov: &UVCoverage, dims: (usize, usize)) -> Vec<Complex64> {
    let (r, c) = dims;
    let mut a = Vec::with_capacity(cov.count() * r * c);
    for p in cov.points() {
        let wu = PI * p[0] / cov.band_half_width();
        let wv = PI * p[1] / cov.band_half_width();
        for i in 0..r {
            for j in 0..c {
                let ph = wv * (i as f64 - (r / 2) as f64) + wu * (j as f64 - (c / 2) as f64);
                a.push(Complex64::from_polar(1.0, -ph));
            }
        }
    }
    a
}

fn rel_err_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn forward_and_adjoint_match_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(dims, m) in &[((8, 8), 20), ((16, 16), 60), ((8, 12), 35)] {
        let cov = random_coverage(&mut rng, m);
        let oracle = DenseOperator::new(dims, m, direct_dft(&cov, dims)).unwrap();
        let op = build(cov, dims);
        for _ in 0..3 {
            let x = random_image(&mut rng, dims.0, dims.1);
            let e = rel_err_c(&op.forward(&x).unwrap(), &oracle.forward(&x).unwrap());
            assert!(e <= 1e-6, "forward rel err {e:e} for {dims:?}");
            let y = random_data(&mut rng, m);
            let a = op.adjoint(&y).unwrap();
            let b = oracle.adjoint(&y).unwrap();
            let e = a.sub(&b).norm() / b.norm();
            assert!(e <= 1e-6, "adjoint rel err {e:e} for {dims:?}");
        }
    }
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cov = random_coverage(&mut rng, 500);
    let op = build(cov, (32, 32));
    for _ in 0..50 {
        let x = random_image(&mut rng, 32, 32);
        let y = random_data(&mut rng, 500);
        let lhs = data_dot(&op.forward(&x).unwrap(), &y);
        let rhs = x.dot(&op.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }
}

#[test]
fn dc_point_sums_pixels() {
    let op = build(UVCoverage::new(vec![[0.0, 0.0]], BAND).unwrap(), (10, 6));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_image(&mut rng, 10, 6);
    let y = op.forward(&x).unwrap();
    assert!((y[0].re - x.sum()).abs() <= 1e-6 * x.norm());
    assert!(y[0].im.abs() <= 1e-6 * x.norm());
}

#[test]
fn centre_impulse_gives_flat_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let op = build(random_coverage(&mut rng, 100), (16, 16));
    let y = op.forward(&Image::impulse(16, 16)).unwrap();
    for v in y {
        assert!((v.norm() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn zero_in_zero_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let op = build(random_coverage(&mut rng, 40), (8, 8));
    assert!(op
        .forward(&Image::zeros(8, 8))
        .unwrap()
        .iter()
        .all(|v| v.norm() == 0.0));
    let zero = vec![Complex64::new(0.0, 0.0); 40];
    assert_eq!(op.adjoint(&zero).unwrap(), Image::zeros(8, 8));
    assert_eq!(op.dirty_image(&zero).unwrap(), Image::zeros(8, 8));
}

#[test]
fn g_rows_have_bounded_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let op = build(random_coverage(&mut rng, 30), (8, 8));
    for k in 0..30 {
        assert!(op.g_row(k).len() <= 49);
    }
}

#[test]
fn build_rejects_bad_inputs() {
    let cov = UVCoverage::new(vec![[0.0, 0.0]], BAND).unwrap();
    assert!(matches!(
        MeasurementOperator::build(cov.clone(), (7, 8), 2.0, KernelSpec::default()),
        Err(OperatorError::OddDims(7, 8))
    ));
    assert!(matches!(
        MeasurementOperator::build(cov.clone(), (8, 8), 0.5, KernelSpec::default()),
        Err(OperatorError::InvalidConfig(_))
    ));
    let bad_kernel = KernelSpec {
        support: 1,
        beta: None,
    };
    assert!(MeasurementOperator::build(cov, (8, 8), 2.0, bad_kernel).is_err());
}

#[test]
fn dirty_beam_peaks_at_one_and_scales_point_sources() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let op = build(random_coverage(&mut rng, 300), (32, 32));
    let beam = op.dirty_beam().unwrap();
    assert_eq!(beam.max(), 1.0);
    let c = 3.25;
    let y = op.forward(&Image::impulse(32, 32).scaled(c)).unwrap();
    let dirty = op.dirty_image(&y).unwrap();
    let diff = dirty.sub(&beam.scaled(c)).map(f64::abs).max();
    assert!(diff <= 1e-8, "{diff:e}");
}

#[test]
fn degenerate_beam_is_an_error() {
    let op = build(UVCoverage::new(vec![[0.0, 0.0]], BAND).unwrap(), (8, 8)).scaled(0.0);
    assert!(matches!(op.dirty_beam(), Err(OperatorError::DegenerateBeam)));
}

#[test]
fn spectral_norm_of_unitary_embedding_is_one() {
    let n = 8usize;
    // every DFT frequency of the 8x8 grid, scaled so Φ is unitary
    let mut pts = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let fu = (a as f64 - (n / 2) as f64) / n as f64 * 2.0 * BAND;
            let fv = (b as f64 - (n / 2) as f64) / n as f64 * 2.0 * BAND;
            pts.push([fu, fv]);
        }
    }
    let op = build(UVCoverage::new(pts, BAND).unwrap(), (n, n)).scaled(1.0 / n as f64);
    let tol = 1e-8;
    let est = op
        .spectral_norm(&PowerOptions {
            tol,
            max_iter: 100,
            seed: 1,
        })
        .unwrap();
    assert!(est.converged);
    // NUFFT interpolation error enters at the 1e-6 level
    assert!((est.value - 1.0).abs() <= 1e-6, "{}", est.value);
    assert_eq!(op.cached_lipschitz(), Some(est.value));
}

#[test]
fn spectral_norm_matches_dense_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let op = build(random_coverage(&mut rng, 40), (8, 8));
    let dense = op.to_dense().unwrap();
    let n = 64;
    let normal = DMatrix::from_fn(n, n, |i, j| {
        (0..40)
            .map(|k| (dense[k * n + i].conj() * dense[k * n + j]).re)
            .sum::<f64>()
    });
    let top = normal.symmetric_eigen().eigenvalues.max();
    let est = spectral_norm(
        &op,
        &PowerOptions {
            tol: 1e-13,
            max_iter: 20000,
            seed: 2,
        },
    )
    .unwrap();
    assert!(est.converged);
    assert!((est.value - top).abs() <= 1e-6 * top, "{} vs {}", est.value, top);

    let doubled = spectral_norm(
        &op.scaled(2.0),
        &PowerOptions {
            tol: 1e-13,
            max_iter: 20000,
            seed: 2,
        },
    )
    .unwrap();
    assert!((doubled.value - 4.0 * est.value).abs() <= 1e-9 * doubled.value);
}

#[test]
fn permuting_visibilities_leaves_spectral_norm_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cov = random_coverage(&mut rng, 200);
    let mut order: Vec<usize> = (0..200).collect();
    order.reverse();
    order.swap(3, 77);
    let a = build(cov.clone(), (16, 16));
    let b = build(cov.permuted(&order), (16, 16));
    let opts = PowerOptions {
        tol: 1e-10,
        max_iter: 500,
        seed: 4,
    };
    assert_eq!(
        spectral_norm(&a, &opts).unwrap().value,
        spectral_norm(&b, &opts).unwrap().value
    );
    // adjoints agree bit for bit once the data follow the permutation
    let y = random_data(&mut rng, 200);
    let yp: Vec<Complex64> = order.iter().map(|&i| y[i]).collect();
    assert_eq!(a.adjoint(&y).unwrap(), b.adjoint(&yp).unwrap());
}

#[test]
fn simulated_noise_level_follows_input_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let op = build(random_coverage(&mut rng, 4000), (16, 16));
    let gt = Image::from_fn(16, 16, |r, c| if (r + c) % 5 == 0 { 1.0 } else { 0.1 });
    let clean = op.forward(&gt).unwrap();
    let signal = clean.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    let mut r1 = ChaCha8Rng::seed_from_u64(99);
    let vis = simulate_visibilities(&op, &gt, NoiseSpec::InputSnrDb(30.0), &mut r1).unwrap();
    assert!((vis.tau - signal * 10f64.powf(-1.5)).abs() <= 1e-12 * vis.tau);
    // empirical noise power within a few percent of τ² (m = 4000)
    let noise: f64 = vis
        .values
        .iter()
        .zip(&clean)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / 4000.0;
    assert!((noise / (vis.tau * vis.tau) - 1.0).abs() < 0.1);

    let mut r2 = ChaCha8Rng::seed_from_u64(99);
    let again = simulate_visibilities(&op, &gt, NoiseSpec::InputSnrDb(30.0), &mut r2).unwrap();
    assert_eq!(vis, again);

    let noiseless = simulate_visibilities(&op, &gt, NoiseSpec::from_isnr(f64::INFINITY), &mut r2).unwrap();
    assert_eq!(noiseless.values, clean);
    assert_eq!(noiseless.tau, 0.0);

    assert!(matches!(
        simulate_visibilities(&op, &Image::zeros(16, 16), NoiseSpec::InputSnrDb(30.0), &mut r2),
        Err(OperatorError::ZeroSignal)
    ));
}

#[test]
fn per_visibility_snr_scales_with_measurement_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let op = build(random_coverage(&mut rng, 900), (16, 16));
    let gt = Image::impulse(16, 16);
    let signal = op
        .forward(&gt)
        .unwrap()
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let vis = simulate_visibilities(&op, &gt, NoiseSpec::PerVisibilitySnrDb(30.0), &mut rng).unwrap();
    let expected = signal / 30.0 * 10f64.powf(-1.5);
    assert!((vis.tau - expected).abs() <= 1e-12 * expected);
}

#[test]
fn toeplitz_normal_matches_explicit_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for dims in [(16, 16), (12, 20)] {
        let op = build(random_coverage(&mut rng, 300), dims);
        let weighted = op
            .with_natural_weights(&(0..300).map(|k| 0.5 + (k % 7) as f64 * 0.1).collect::<Vec<_>>())
            .unwrap();
        for o in [&op, &weighted] {
            let t = ToeplitzNormal::from_operator(o).unwrap();
            let x = random_image(&mut rng, dims.0, dims.1);
            let a = o.normal(&x).unwrap();
            let b = t.apply(&x).unwrap();
            let err = a.sub(&b).norm() / a.norm();
            assert!(err < 1e-6, "{dims:?}: {err}");
        }
        let exact = op
            .spectral_norm(&PowerOptions {
                tol: 1e-10,
                max_iter: 5000,
                seed: 1,
            })
            .unwrap();
        let fast = ToeplitzNormal::from_operator(&op)
            .unwrap()
            .spectral_norm(&PowerOptions {
                tol: 1e-10,
                max_iter: 5000,
                seed: 1,
            })
            .unwrap();
        assert!((exact.value - fast.value).abs() < 1e-6 * exact.value);
    }
}
