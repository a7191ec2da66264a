//! C interface to the `airi` library.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AiriStatus`]; on failure a message is available from
//! [`airi_last_error`] on the same thread. Images are row-major `double`
//! buffers, visibilities are interleaved `(re, im)` pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use airi::denoiser::{jacobian_spectral_norm, load_model, Denoiser, DenoiserError, DenoiserHandle, Rescaled};
use airi::operator::{KernelSpec, LinearOperator, MeasurementOperator, OperatorError, UVCoverage};
use airi::sara::Dictionary;
use airi::solvers::{
    heuristic_sigma, heuristic_usara, run_airi, run_usara, HeuristicCorrection, Problem, SolverConfig,
    SolverError,
};
use airi::Image;
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AiriStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// Measurement operator for a fixed coverage and image size.
pub struct AiriOperator {
    op: MeasurementOperator,
}

/// A loaded denoiser network.
pub struct AiriDenoiser {
    handle: DenoiserHandle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(AiriStatus, String);

impl From<OperatorError> for Fail {
    fn from(e: OperatorError) -> Self {
        let status = match e {
            OperatorError::Io(_) => AiriStatus::Io,
            _ => AiriStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<DenoiserError> for Fail {
    fn from(e: DenoiserError) -> Self {
        let status = match e {
            DenoiserError::NonFinite { .. } | DenoiserError::NonFiniteInput => AiriStatus::Numerical,
            DenoiserError::Io(_) => AiriStatus::Io,
            _ => AiriStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

impl From<SolverError> for Fail {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. } | SolverError::Diverged { .. } => {
                Fail(AiriStatus::Numerical, e.to_string())
            }
            SolverError::Denoiser(d) => d.into(),
            SolverError::Operator(o) => o.into(),
            other => Fail(AiriStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(AiriStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AiriStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AiriStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AiriStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),*) => {
        $(if $p.is_null() {
            return Err(Fail(AiriStatus::NullPointer, concat!("`", stringify!($p), "` is null").into()));
        })*
    };
}

unsafe fn image_from(ptr: *const f64, rows: usize, cols: usize) -> Result<Image, Fail> {
    let data = std::slice::from_raw_parts(ptr, rows * cols).to_vec();
    Image::from_vec(rows, cols, data).map_err(|e| invalid(e.to_string()))
}

unsafe fn image_into(img: &Image, out: *mut f64) {
    ptr::copy_nonoverlapping(img.as_slice().as_ptr(), out, img.len());
}

unsafe fn vis_from(ptr: *const f64, m: usize) -> Vec<Complex64> {
    std::slice::from_raw_parts(ptr, 2 * m)
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn airi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn airi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds an operator from `m` points `uv[2k], uv[2k+1]` (wavelengths).
/// A non-positive `band` makes the outermost point sit on the band edge.
///
/// # Safety
/// `uv` must point to `2m` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_new(
    uv: *const f64,
    m: usize,
    band: f64,
    rows: usize,
    cols: usize,
    out: *mut *mut AiriOperator,
) -> AiriStatus {
    guard(|| {
        non_null!(uv, out);
        let points = std::slice::from_raw_parts(uv, 2 * m)
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let coverage = if band > 0.0 {
            UVCoverage::new(points, band)?
        } else {
            UVCoverage::fill_band(points)?
        };
        let op = MeasurementOperator::build(coverage, (rows, cols), 2.0, KernelSpec::default())?;
        *out = Box::into_raw(Box::new(AiriOperator { op }));
        Ok(())
    })
}

/// # Safety
/// `op` must come from [`airi_operator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_free(op: *mut AiriOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of visibilities, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_num_measurements(op: *const AiriOperator) -> usize {
    op.as_ref().map_or(0, |o| o.op.num_measurements())
}

/// `y = Φx`, written as `2m` interleaved doubles.
///
/// # Safety
/// `x` must hold `rows·cols` doubles and `y` room for `2m`.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_forward(
    op: *const AiriOperator,
    x: *const f64,
    y: *mut f64,
) -> AiriStatus {
    guard(|| {
        non_null!(op, x, y);
        let op = &(*op).op;
        let (r, c) = op.image_dims();
        let vis = op.forward(&image_from(x, r, c)?)?;
        for (k, v) in vis.iter().enumerate() {
            *y.add(2 * k) = v.re;
            *y.add(2 * k + 1) = v.im;
        }
        Ok(())
    })
}

/// `x = Re{Φ†y}`.
///
/// # Safety
/// `y` must hold `2m` doubles and `x` room for `rows·cols`.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_adjoint(
    op: *const AiriOperator,
    y: *const f64,
    x: *mut f64,
) -> AiriStatus {
    guard(|| {
        non_null!(op, y, x);
        let op = &(*op).op;
        let img = op.adjoint(&vis_from(y, op.num_measurements()))?;
        image_into(&img, x);
        Ok(())
    })
}

/// Spectral norm of `Re{Φ†Φ}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn airi_operator_lipschitz(op: *const AiriOperator, out: *mut f64) -> AiriStatus {
    guard(|| {
        non_null!(op, out);
        *out = (*op).op.lipschitz()?;
        Ok(())
    })
}

/// Loads `manifest.json` with `weights.bin` beside it.
///
/// # Safety
/// `manifest` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn airi_denoiser_load(
    manifest: *const c_char,
    out: *mut *mut AiriDenoiser,
) -> AiriStatus {
    guard(|| {
        non_null!(manifest, out);
        let path = CStr::from_ptr(manifest)
            .to_str()
            .map_err(|_| invalid("manifest path is not UTF-8"))?;
        let handle = DenoiserHandle::new(load_model(path)?);
        *out = Box::into_raw(Box::new(AiriDenoiser { handle }));
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`airi_denoiser_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn airi_denoiser_free(d: *mut AiriDenoiser) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Noise level the network was trained at.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn airi_denoiser_sigma(d: *const AiriDenoiser) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.handle.model().sigma)
}

/// `out = D(x)` for a `rows × cols` image.
///
/// # Safety
/// `x` and `out` must each hold `rows·cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn airi_denoiser_apply(
    d: *const AiriDenoiser,
    rows: usize,
    cols: usize,
    x: *const f64,
    out: *mut f64,
) -> AiriStatus {
    guard(|| {
        non_null!(d, x, out);
        let y = (*d).handle.denoise(&image_from(x, rows, cols)?)?;
        image_into(&y, out);
        Ok(())
    })
}

/// Spectral norm of the Jacobian of `2D − I` at `x`.
///
/// # Safety
/// `x` must hold `rows·cols` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn airi_denoiser_jacobian_norm(
    d: *const AiriDenoiser,
    rows: usize,
    cols: usize,
    x: *const f64,
    iters: usize,
    seed: u64,
    out: *mut f64,
) -> AiriStatus {
    guard(|| {
        non_null!(d, x, out);
        let est = jacobian_spectral_norm(&(*d).handle, &image_from(x, rows, cols)?, iters, seed)?;
        *out = est.value;
        Ok(())
    })
}

/// Solver settings shared by both solvers; zero fields take defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct AiriSolveOptions {
    /// Standard deviation of the visibility noise.
    pub tau: f64,
    /// Multiplier of the heuristic regularisation level; 0 means 1.
    pub multiplier: f64,
    /// Iteration cap; 0 means the library default.
    pub max_iter: usize,
    /// Wavelet depth for uSARA; 0 means the library default.
    pub depth: usize,
}

/// Summary written back by the solvers.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AiriSolveResult {
    pub iterations: usize,
    pub converged: bool,
    /// Regularisation level used (γλ for uSARA, σ for AIRI).
    pub level: f64,
}

fn solver_config(opts: &AiriSolveOptions) -> Result<(SolverConfig, f64), Fail> {
    if !(opts.tau > 0.0 && opts.tau.is_finite()) {
        return Err(invalid("tau must be positive"));
    }
    let mult = if opts.multiplier == 0.0 {
        1.0
    } else {
        opts.multiplier
    };
    if !(mult > 0.0 && mult.is_finite()) {
        return Err(invalid("multiplier must be positive"));
    }
    let mut config = SolverConfig::default();
    if opts.max_iter > 0 {
        config.max_iter = opts.max_iter;
    }
    Ok((config, mult))
}

/// Runs uSARA with the heuristic regularisation scaled by the multiplier.
///
/// # Safety
/// `y` must hold `2m` doubles, `x` room for `rows·cols`, `result` may be null.
#[no_mangle]
pub unsafe extern "C" fn airi_solve_usara(
    op: *const AiriOperator,
    y: *const f64,
    opts: AiriSolveOptions,
    x: *mut f64,
    result: *mut AiriSolveResult,
) -> AiriStatus {
    guard(|| {
        non_null!(op, y, x);
        let op = &(*op).op;
        let (mut config, mult) = solver_config(&opts)?;
        let vis = vis_from(y, op.num_measurements());
        let problem = Problem::new(op, &vis)?;
        let l = problem.lipschitz();
        let h = heuristic_usara(opts.tau, l, HeuristicCorrection::None)?;
        let gamma = config.gamma_factor / l;
        config.lambda = mult * h.lambda(gamma);
        config.rho = h.rho;
        let depth = if opts.depth == 0 {
            airi::sara::DEFAULT_DEPTH
        } else {
            opts.depth
        };
        let report = run_usara(&problem, &Dictionary::sara(depth), &config, None)?;
        image_into(&report.image, x);
        if let Some(r) = result.as_mut() {
            *r = AiriSolveResult {
                iterations: report.iterations,
                converged: report.converged,
                level: gamma * config.lambda,
            };
        }
        Ok(())
    })
}

/// Runs AIRI with the denoiser rescaled to the heuristic noise level
/// times the multiplier.
///
/// # Safety
/// `y` must hold `2m` doubles, `x` room for `rows·cols`, `result` may be null.
#[no_mangle]
pub unsafe extern "C" fn airi_solve_airi(
    op: *const AiriOperator,
    d: *const AiriDenoiser,
    y: *const f64,
    opts: AiriSolveOptions,
    x: *mut f64,
    result: *mut AiriSolveResult,
) -> AiriStatus {
    guard(|| {
        non_null!(op, d, y, x);
        let op = &(*op).op;
        let handle = &(*d).handle;
        let (config, mult) = solver_config(&opts)?;
        let vis = vis_from(y, op.num_measurements());
        let problem = Problem::new(op, &vis)?;
        let sigma = mult * heuristic_sigma(opts.tau, problem.lipschitz())?;
        let trained = handle.model().sigma;
        let scale = if trained > 0.0 { sigma / trained } else { 1.0 };
        let report = run_airi(&problem, &Rescaled::new(handle, scale), &config, None)?;
        image_into(&report.image, x);
        if let Some(r) = result.as_mut() {
            *r = AiriSolveResult {
                iterations: report.iterations,
                converged: report.converged,
                level: sigma,
            };
        }
        Ok(())
    })
}
