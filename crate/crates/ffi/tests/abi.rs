use std::ffi::{CStr, CString};
use std::ptr;

use airi::denoiser::{save_model, DenoiserModel};
use airi::operator::{KernelSpec, LinearOperator, MeasurementOperator, UVCoverage};
use airi::Image;
use airi_ffi::*;

fn points(m: usize) -> Vec<f64> {
    (0..m)
        .flat_map(|k| {
            let t = k as f64 * 0.37;
            [
                0.9 * t.sin() * (k % 7) as f64 / 7.0,
                0.8 * (1.3 * t).cos() * (k % 5) as f64 / 5.0,
            ]
        })
        .collect()
}

fn last_error() -> String {
    let p = airi_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn operator_roundtrip_matches_the_library() {
    let uv = points(120);
    let mut op = ptr::null_mut();
    let st = unsafe { airi_operator_new(uv.as_ptr(), 120, 1.0, 8, 8, &mut op) };
    assert_eq!(st, AiriStatus::Ok);
    assert_eq!(unsafe { airi_operator_num_measurements(op) }, 120);

    let pts = uv.chunks(2).map(|c| [c[0], c[1]]).collect();
    let direct = MeasurementOperator::build(
        UVCoverage::new(pts, 1.0).unwrap(),
        (8, 8),
        2.0,
        KernelSpec::default(),
    )
    .unwrap();
    let x = Image::from_fn(8, 8, |r, c| (r * 8 + c) as f64 / 64.0);
    let mut y = vec![0.0; 240];
    assert_eq!(
        unsafe { airi_operator_forward(op, x.as_slice().as_ptr(), y.as_mut_ptr()) },
        AiriStatus::Ok
    );
    let want = direct.forward(&x).unwrap();
    for (k, v) in want.iter().enumerate() {
        assert_eq!((y[2 * k], y[2 * k + 1]), (v.re, v.im));
    }
    let mut back = vec![0.0; 64];
    assert_eq!(
        unsafe { airi_operator_adjoint(op, y.as_ptr(), back.as_mut_ptr()) },
        AiriStatus::Ok
    );
    assert_eq!(back, direct.adjoint(&want).unwrap().into_vec());

    let mut l = 0.0;
    assert_eq!(unsafe { airi_operator_lipschitz(op, &mut l) }, AiriStatus::Ok);
    assert!((l - direct.lipschitz().unwrap()).abs() <= 1e-9 * l);
    unsafe { airi_operator_free(op) };
}

#[test]
fn errors_are_reported() {
    let mut op = ptr::null_mut();
    let uv = points(4);
    assert_eq!(
        unsafe { airi_operator_new(ptr::null(), 4, 1.0, 8, 8, &mut op) },
        AiriStatus::NullPointer
    );
    assert!(last_error().contains("uv"));
    assert_eq!(
        unsafe { airi_operator_new(uv.as_ptr(), 4, 1.0, 7, 8, &mut op) },
        AiriStatus::InvalidArgument
    );
    assert!(last_error().contains("even"));
    assert!(op.is_null());
    assert_eq!(unsafe { airi_operator_num_measurements(ptr::null()) }, 0);
    unsafe { airi_operator_free(ptr::null_mut()) };

    let missing = CString::new("/nonexistent/manifest.json").unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { airi_denoiser_load(missing.as_ptr(), &mut d) },
        AiriStatus::Io
    );
    assert!(!unsafe { CStr::from_ptr(airi_version()) }.to_bytes().is_empty());
}

#[test]
fn denoiser_and_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = DenoiserModel::zero_dncnn(2);
    model.sigma = 1e-3;
    save_model(&model, dir.path()).unwrap();
    let manifest = CString::new(dir.path().join("manifest.json").to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { airi_denoiser_load(manifest.as_ptr(), &mut d) },
        AiriStatus::Ok
    );
    assert_eq!(unsafe { airi_denoiser_sigma(d) }, 1e-3);

    let x: Vec<f64> = (0..64).map(|k| k as f64 / 32.0 - 1.0).collect();
    let mut out = vec![0.0; 64];
    assert_eq!(
        unsafe { airi_denoiser_apply(d, 8, 8, x.as_ptr(), out.as_mut_ptr()) },
        AiriStatus::Ok
    );
    assert_eq!(out, x.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
    let mut norm = 0.0;
    let xs: Vec<f64> = x.iter().map(|v| v + 0.01).collect();
    assert_eq!(
        unsafe { airi_denoiser_jacobian_norm(d, 8, 8, xs.as_ptr(), 20, 0, &mut norm) },
        AiriStatus::Ok
    );
    assert!((norm - 1.0).abs() < 1e-12);

    let uv = points(150);
    let mut op = ptr::null_mut();
    assert_eq!(
        unsafe { airi_operator_new(uv.as_ptr(), 150, 0.0, 8, 8, &mut op) },
        AiriStatus::Ok
    );
    let truth: Vec<f64> = (0..64).map(|k| if k % 9 == 0 { 1.0 } else { 0.0 }).collect();
    let mut y = vec![0.0; 300];
    assert_eq!(
        unsafe { airi_operator_forward(op, truth.as_ptr(), y.as_mut_ptr()) },
        AiriStatus::Ok
    );
    let opts = AiriSolveOptions {
        tau: 1e-3,
        multiplier: 0.0,
        max_iter: 100,
        depth: 2,
    };
    let mut res = AiriSolveResult::default();
    let mut img = vec![0.0; 64];
    assert_eq!(
        unsafe { airi_solve_usara(op, y.as_ptr(), opts, img.as_mut_ptr(), &mut res) },
        AiriStatus::Ok
    );
    assert!(res.iterations > 0 && res.iterations <= 100 && res.level > 0.0);
    assert!(img.iter().all(|v| *v >= 0.0));
    assert_eq!(
        unsafe { airi_solve_airi(op, d, y.as_ptr(), opts, img.as_mut_ptr(), ptr::null_mut()) },
        AiriStatus::Ok
    );
    let bad = AiriSolveOptions { tau: -1.0, ..opts };
    assert_eq!(
        unsafe { airi_solve_usara(op, y.as_ptr(), bad, img.as_mut_ptr(), &mut res) },
        AiriStatus::InvalidArgument
    );
    unsafe {
        airi_operator_free(op);
        airi_denoiser_free(d);
    }
}
