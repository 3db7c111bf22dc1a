//! C ABI over the stochheat toolkit.
//!
//! Objects are opaque handles created by `sh_*_new` style functions and released
//! with the matching `sh_*_free`. Every fallible call returns an [`ShStatus`]; on
//! failure the message is available from [`sh_last_error`] on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stochheat::config::{resolve, RunConfig, Setup};
use stochheat::kernel::{KernelSpec, OverlapMethod, WalkKernel};
use stochheat::lattice::Site;
use stochheat::moments::exact_second_moment;
use stochheat::solver::{evolve, Problem, Trajectory};
use stochheat::spectral::{burkholder_constant, SpectralProfile, UpsilonMethod};
use stochheat::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    /// A malformed string, spec or numeric argument.
    InvalidArgument = 2,
    /// A model assumption does not hold for the given inputs.
    Assumption = 3,
    /// The resolved region cannot hold the requested computation.
    RegionTooSmall = 4,
    Estimation = 5,
    /// The output buffer is shorter than required.
    BufferTooSmall = 6,
    /// An internal panic was caught.
    Internal = 7,
}

/// Selects how Upsilon is evaluated.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShUpsilonMethod {
    Quadrature = 0,
    Series = 1,
}

/// A random walk kernel.
pub struct ShKernel {
    inner: WalkKernel,
}

/// Spectral data of a kernel with its cached overlaps.
pub struct ShSpectral {
    inner: SpectralProfile,
}

/// A validated configuration and the problem it defines.
pub struct ShProblem {
    config: RunConfig,
    setup: Setup,
    problem: Problem,
}

/// u_0, ..., u_{n_max} of one replica.
pub struct ShTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> ShStatus {
    match e {
        Error::Assumption(_) => ShStatus::Assumption,
        Error::RegionTooSmall(_) => ShStatus::RegionTooSmall,
        Error::Estimation(_) => ShStatus::Estimation,
        _ => ShStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (ShStatus, String)>) -> ShStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ShStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {m}"));
            ShStatus::Internal
        }
    }
}

fn lib(e: Error) -> (ShStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ShStatus, String) {
    (ShStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ShStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ShStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ShStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ShStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a kernel from a shorthand (`simple1`, `lazy2:0.5`) or a JSON kernel spec.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_kernel_new(spec: *const c_char, out: *mut *mut ShKernel) -> ShStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = read_str(spec, "spec")?.trim();
        let spec: KernelSpec = if text.starts_with('{') {
            serde_json::from_str(text).map_err(|e| (ShStatus::InvalidArgument, format!("kernel spec: {e}")))?
        } else {
            text.parse().map_err(lib)?
        };
        let inner = WalkKernel::new(&spec).map_err(lib)?;
        *out = Box::into_raw(Box::new(ShKernel { inner }));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from [`sh_kernel_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_kernel_free(kernel: *mut ShKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Lattice dimension and support radius.
///
/// # Safety
/// `kernel` must be a live handle; `dim` and `radius` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sh_kernel_shape(kernel: *const ShKernel, dim: *mut usize, radius: *mut u64) -> ShStatus {
    guard(|| {
        let k = &in_ref(kernel, "kernel")?.inner;
        *out_ref(dim, "dim")? = k.dim();
        *out_ref(radius, "radius")? = k.radius();
        Ok(())
    })
}

/// q_n = sum_z (P^n_{0,z})^2 by exact convolution.
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_kernel_overlap(kernel: *const ShKernel, n: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        let k = &in_ref(kernel, "kernel")?.inner;
        *out_ref(out, "out")? = k.overlap_q(n, OverlapMethod::Convolution);
        Ok(())
    })
}

/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_spectral_new(kernel: *const ShKernel, out: *mut *mut ShSpectral) -> ShStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let k = &in_ref(kernel, "kernel")?.inner;
        *out = Box::into_raw(Box::new(ShSpectral { inner: SpectralProfile::new(k) }));
        Ok(())
    })
}

/// # Safety
/// `spectral` must come from [`sh_spectral_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_spectral_free(spectral: *mut ShSpectral) {
    if !spectral.is_null() {
        drop(Box::from_raw(spectral));
    }
}

/// Upsilon(lambda) for lambda > 1.
///
/// # Safety
/// `spectral` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_spectral_upsilon(spectral: *const ShSpectral, lambda: f64, method: ShUpsilonMethod, out: *mut f64) -> ShStatus {
    guard(|| {
        let s = &in_ref(spectral, "spectral")?.inner;
        let m = match method {
            ShUpsilonMethod::Quadrature => UpsilonMethod::Quadrature,
            ShUpsilonMethod::Series => UpsilonMethod::Series,
        };
        *out_ref(out, "out")? = s.upsilon(lambda, m).map_err(lib)?;
        Ok(())
    })
}

/// sup{lambda > 1 : Upsilon(lambda) > x} with the empty set mapped to 1 and x = +inf to 0.
///
/// # Safety
/// `spectral` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_spectral_upsilon_inverse(spectral: *const ShSpectral, x: f64, out: *mut f64) -> ShStatus {
    guard(|| {
        let s = &in_ref(spectral, "spectral")?.inner;
        *out_ref(out, "out")? = s.upsilon_inverse(x).map_err(lib)?;
        Ok(())
    })
}

/// Burkholder constant c_p for p >= 2.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_burkholder_constant(p: f64, out: *mut f64) -> ShStatus {
    guard(|| {
        *out_ref(out, "out")? = burkholder_constant(p).map_err(lib)?;
        Ok(())
    })
}

/// Builds a problem from a JSON run configuration; missing keys take their defaults.
///
/// # Safety
/// `config_json` must be a NUL-terminated string (null means all defaults) and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_problem_new(config_json: *const c_char, out: *mut *mut ShProblem) -> ShStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = if config_json.is_null() { None } else { Some(read_str(config_json, "config")?) };
        let (config, setup) =
            resolve(text.map(|t| ("<config>", t)), &[]).map_err(|e| (ShStatus::InvalidArgument, e.to_string()))?;
        let problem = setup.problem(&config).map_err(lib)?;
        *out = Box::into_raw(Box::new(ShProblem { config, setup, problem }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`sh_problem_new`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_problem_free(problem: *mut ShProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// The fully resolved configuration as JSON, written NUL-terminated into `buf`.
///
/// `needed` receives the buffer length required, including the terminator.
///
/// # Safety
/// `problem` must be a live handle, `buf` valid for `len` bytes (may be null when `len` is 0), `needed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_problem_config(problem: *const ShProblem, buf: *mut c_char, len: usize, needed: *mut usize) -> ShStatus {
    guard(|| {
        let p = in_ref(problem, "problem")?;
        let text = p.config.echo();
        let need = text.len() + 1;
        *out_ref(needed, "needed")? = need;
        if len < need {
            return Err((ShStatus::BufferTooSmall, format!("need {need} bytes, have {len}")));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Evolves replica `replica` of the problem for `n_max` steps under the configured seed.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_evolve(problem: *const ShProblem, n_max: usize, replica: u64, out: *mut *mut ShTrajectory) -> ShStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let p = in_ref(problem, "problem")?;
        let inner = evolve(&p.problem, n_max, p.config.seed, replica).map_err(lib)?;
        *out = Box::into_raw(Box::new(ShTrajectory { inner }));
        Ok(())
    })
}

/// # Safety
/// `trajectory` must come from [`sh_evolve`] and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_free(trajectory: *mut ShTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of stored steps, n_max + 1.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_len(trajectory: *const ShTrajectory, out: *mut usize) -> ShStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(trajectory, "trajectory")?.inner.len();
        Ok(())
    })
}

/// u_n(x) for a site given by `dim` coordinates.
///
/// # Safety
/// `trajectory` must be a live handle, `coords` valid for `dim` values, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_value(
    trajectory: *const ShTrajectory,
    n: usize,
    coords: *const i64,
    dim: usize,
    out: *mut f64,
) -> ShStatus {
    guard(|| {
        let t = &in_ref(trajectory, "trajectory")?.inner;
        if n >= t.len() {
            return Err((ShStatus::InvalidArgument, format!("step {n} beyond the horizon {}", t.len() - 1)));
        }
        let f = t.field(n);
        if dim != f.dim() {
            return Err((ShStatus::InvalidArgument, format!("expected {} coordinates, got {dim}", f.dim())));
        }
        if coords.is_null() {
            return Err(null("coords"));
        }
        let x = Site::new(std::slice::from_raw_parts(coords, dim));
        *out_ref(out, "out")? = f.get(&x);
        Ok(())
    })
}

/// M_n = sup_x |u_n(x)|.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_trajectory_sup_norm(trajectory: *const ShTrajectory, n: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        let t = &in_ref(trajectory, "trajectory")?.inner;
        if n >= t.len() {
            return Err((ShStatus::InvalidArgument, format!("step {n} beyond the horizon {}", t.len() - 1)));
        }
        *out_ref(out, "out")? = t.field(n).sup_norm();
        Ok(())
    })
}

/// sup_x E u_n(x)^2 for n = 0..len-1 by the exact renewal recursion.
///
/// Needs linear sigma and white noise in the problem's configuration.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn sh_exact_second_moment_sup(problem: *const ShProblem, out: *mut f64, len: usize) -> ShStatus {
    guard(|| {
        let p = in_ref(problem, "problem")?;
        let nu = p
            .config
            .sigma
            .linear_coefficient()
            .ok_or_else(|| (ShStatus::Assumption, format!("exact second moments need linear sigma, got {}", p.config.sigma)))?;
        if !p.setup.noise.is_white() {
            return Err((ShStatus::Assumption, "exact second moments need white noise".into()));
        }
        if len == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let m = exact_second_moment(&p.setup.kernel, &p.setup.u0, nu.abs(), len - 1).map_err(lib)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&m.sup_series());
        Ok(())
    })
}
