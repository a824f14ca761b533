//! C ABI over `idfield`: opaque handles, integer status codes and a thread-local
//! last-error message.
//!
//! Every function returns an [`IdfStatus`]; outputs go through pointer arguments.
//! Handles are released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use idfield::bench::{ExperimentConfig, Method, MethodSetup};
use idfield::invert::{contraction_factor, PivotRule};
use idfield::model::{SimpleKernel, WeightH};
use idfield::numcore::GridFunction;
use idfield::simulate::{sample_field, seeded_rng, GridSample, DEFAULT_MAX_CELLS};
use idfield::Error;

/// Status codes; the nonzero values match the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdfStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or a buffer that is too small.
    InvalidArgument = 1,
    Config = 2,
    Numeric = 3,
    Io = 4,
    Panic = 5,
}

/// Experiment configuration.
pub struct IdfConfig(ExperimentConfig);

/// Field sample on a lattice window.
pub struct IdfSample(GridSample);

/// Estimate of `g₀ = h·v₀` on the configured x-grid.
pub struct IdfEstimate {
    est: GridFunction<f64>,
    truth: GridFunction<f64>,
    mse: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> IdfStatus {
    match e.exit_code() {
        2 => IdfStatus::Config,
        4 => IdfStatus::Io,
        _ => IdfStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (IdfStatus, String)>) -> IdfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            IdfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside idfield".into());
            IdfStatus::Panic
        }
    }
}

fn lib(e: Error) -> (IdfStatus, String) {
    (status_of(&e), e.to_string())
}

fn arg(msg: &str) -> (IdfStatus, String) {
    (IdfStatus::InvalidArgument, msg.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (IdfStatus, String)> {
    if p.is_null() {
        return Err(arg(&format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| arg(&format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, (IdfStatus, String)> {
    p.as_ref().ok_or_else(|| arg(&format!("{name} is null")))
}

unsafe fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), (IdfStatus, String)> {
    if out.is_null() {
        return Err(arg("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copy the last error message of this thread into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn idf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn idf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Reference configuration (d = 2, coefficients 1.3/0.2/0.1/0.1, Gaussian jumps).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_config_default(out: *mut *mut IdfConfig) -> IdfStatus {
    guard(|| out_arg(out, IdfConfig(ExperimentConfig::default())))
}

/// Parse and validate a JSON configuration; unknown keys are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_config_from_json(json: *const c_char, out: *mut *mut IdfConfig) -> IdfStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let cfg = ExperimentConfig::from_json(text).map_err(lib)?;
        out_arg(out, IdfConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idf_config_free(cfg: *mut IdfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulate the configured field on its window, stream `rep` of `seed`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_simulate(cfg: *const IdfConfig, seed: u64, rep: u64, out: *mut *mut IdfSample) -> IdfStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.0;
        let kernel = cfg.kernel_model().map_err(lib)?;
        let law = cfg.jump_law.build().map_err(lib)?;
        let mut rng = seeded_rng(seed, rep);
        let s = sample_field(&kernel, &law, &cfg.window, cfg.mesh, &mut rng, DEFAULT_MAX_CELLS).map_err(lib)?;
        out_arg(out, IdfSample(s))
    })
}

/// Wrap caller-owned values (row-major, last index fastest) as a sample.
///
/// # Safety
/// `dims` must point to `ndims` values and `values` to their product.
#[no_mangle]
pub unsafe extern "C" fn idf_sample_from_values(
    dims: *const usize,
    ndims: usize,
    values: *const f64,
    mesh: i64,
    out: *mut *mut IdfSample,
) -> IdfStatus {
    guard(|| {
        if dims.is_null() || values.is_null() || ndims == 0 {
            return Err(arg("dims and values must be non-null"));
        }
        let dims = std::slice::from_raw_parts(dims, ndims).to_vec();
        let n: usize = dims.iter().product();
        let vals = std::slice::from_raw_parts(values, n).to_vec();
        out_arg(out, IdfSample(GridSample::new(dims, mesh, vals).map_err(lib)?))
    })
}

/// Number of values in the sample.
///
/// # Safety
/// `sample` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_sample_len(sample: *const IdfSample, len: *mut usize) -> IdfStatus {
    guard(|| {
        let s = &ref_arg(sample, "sample")?.0;
        if len.is_null() {
            return Err(arg("len is null"));
        }
        *len = s.len();
        Ok(())
    })
}

/// Copy the sample values into `buf`, which must hold at least `idf_sample_len` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn idf_sample_values(sample: *const IdfSample, buf: *mut f64, len: usize) -> IdfStatus {
    guard(|| {
        let s = &ref_arg(sample, "sample")?.0;
        if buf.is_null() || len < s.len() {
            return Err(arg("buffer is null or too small"));
        }
        ptr::copy_nonoverlapping(s.values().as_ptr(), buf, s.len());
        Ok(())
    })
}

/// # Safety
/// `sample` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idf_sample_free(sample: *mut IdfSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Run one estimator (`"plugin"`, `"fourier"` or `"onb"`) with smoothing as configured.
///
/// # Safety
/// `cfg` and `sample` must be live handles, `method` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_estimate(
    cfg: *const IdfConfig,
    method: *const c_char,
    sample: *const IdfSample,
    out: *mut *mut IdfEstimate,
) -> IdfStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.0;
        let sample = &ref_arg(sample, "sample")?.0;
        let method = Method::parse(str_arg(method, "method")?).map_err(lib)?;
        let setup = MethodSetup::new(cfg, method).map_err(lib)?;
        let est = setup.estimate(sample).map_err(lib)?;
        let mse = setup.mse(&est).map_err(lib)?;
        out_arg(out, IdfEstimate { est, truth: setup.g0_true, mse })
    })
}

/// Number of x-grid points of the estimate.
///
/// # Safety
/// `est` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_estimate_len(est: *const IdfEstimate, len: *mut usize) -> IdfStatus {
    guard(|| {
        let e = ref_arg(est, "est")?;
        if len.is_null() {
            return Err(arg("len is null"));
        }
        *len = e.est.values().len();
        Ok(())
    })
}

/// Copy grid nodes, estimate and true `g₀` into caller buffers of `len` doubles each;
/// any of the three may be null to skip it.
///
/// # Safety
/// Non-null buffers must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn idf_estimate_copy(
    est: *const IdfEstimate,
    x: *mut f64,
    g0_hat: *mut f64,
    g0_true: *mut f64,
    len: usize,
) -> IdfStatus {
    guard(|| {
        let e = ref_arg(est, "est")?;
        let n = e.est.values().len();
        if len < n {
            return Err(arg("buffers are too small"));
        }
        if !x.is_null() {
            let nodes = e.est.grid().nodes();
            ptr::copy_nonoverlapping(nodes.as_ptr(), x, n);
        }
        if !g0_hat.is_null() {
            ptr::copy_nonoverlapping(e.est.values().as_ptr(), g0_hat, n);
        }
        if !g0_true.is_null() {
            ptr::copy_nonoverlapping(e.truth.values().as_ptr(), g0_true, n);
        }
        Ok(())
    })
}

/// `‖g₀ - ĝ₀‖₂²` on the x-grid.
///
/// # Safety
/// `est` must be a live handle and `mse` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn idf_estimate_mse(est: *const IdfEstimate, mse: *mut f64) -> IdfStatus {
    guard(|| {
        let e = ref_arg(est, "est")?;
        if mse.is_null() {
            return Err(arg("mse is null"));
        }
        *mse = e.mse;
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idf_estimate_free(est: *mut IdfEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Contraction factor `e(f, h)` with automatic pivot; `volumes` may be null for unit
/// volumes, `signed_h` selects `x^β` over `|x|^β`.
///
/// # Safety
/// `coeffs` (and `volumes` when non-null) must point to `n` doubles; `e` and `satisfied`
/// must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn idf_contraction_factor(
    coeffs: *const f64,
    volumes: *const f64,
    n: usize,
    beta: f64,
    signed_h: c_int,
    e: *mut f64,
    satisfied: *mut c_int,
) -> IdfStatus {
    guard(|| {
        if coeffs.is_null() || e.is_null() || satisfied.is_null() || n == 0 {
            return Err(arg("coeffs, e and satisfied must be non-null and n > 0"));
        }
        let c = std::slice::from_raw_parts(coeffs, n).to_vec();
        let v = if volumes.is_null() { vec![1.0; n] } else { std::slice::from_raw_parts(volumes, n).to_vec() };
        let offsets = (0..n as i64).map(|k| vec![k]).collect();
        let kernel = SimpleKernel::new(c, offsets, v).map_err(lib)?;
        let h = WeightH { beta, signed: signed_h != 0 };
        let r = contraction_factor(&kernel, &h, PivotRule::Auto).map_err(lib)?;
        *e = r.e;
        *satisfied = c_int::from(r.satisfied);
        Ok(())
    })
}
