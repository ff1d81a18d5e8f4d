//! C ABI over `glstat`.
//!
//! Handles are opaque and owned by the caller: every `*_new` / `*_from_*`
//! has a matching `*_free`. Functions return a [`GlstatStatus`]; on failure
//! [`glstat_last_error`] holds a message for the calling thread until its
//! next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use glstat::glstat::{Estimator, GLSpecConfig, QMode};
use glstat::kernels::builtin_kernel;
use glstat::lrv::{gl_confidence_interval, lrv_gl, lrv_ustat, BandwidthPolicy, LrvConfig};
use glstat::processes::{ProcessModel, SimConfig};
use glstat::ustat::u_statistic;
use glstat::{GLSpec, GlError, Sample};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlstatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    InsufficientData = 4,
    Capacity = 5,
    UnknownName = 6,
    DegenerateDensity = 7,
    DegenerateVariance = 8,
    Stationarity = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

/// Opaque sample handle.
pub struct GlstatSample {
    inner: Sample,
}

/// Opaque GL-statistic specification handle.
pub struct GlstatSpec {
    inner: GLSpec,
}

/// Output of [`glstat_lrv_gl`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GlstatVarianceReport {
    /// Clamped at zero.
    pub sigma2_gl: f64,
    pub sigma2_raw: f64,
    /// `m^2 * sigma2_gl`.
    pub sigma2_scaled: f64,
    pub bandwidth: f64,
    pub statistic: f64,
    /// Nonzero when the raw estimate was negative.
    pub clamped: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &GlError) -> GlstatStatus {
    match e {
        GlError::Argument(_) => GlstatStatus::InvalidArgument,
        GlError::Domain(_) => GlstatStatus::Domain,
        GlError::InsufficientData { .. } => GlstatStatus::InsufficientData,
        GlError::Capacity { .. } => GlstatStatus::Capacity,
        GlError::UnknownKernel(_) | GlError::UnknownEstimator(_) => GlstatStatus::UnknownName,
        GlError::DegenerateDensity { .. } => GlstatStatus::DegenerateDensity,
        GlError::DegenerateVariance(_) => GlstatStatus::DegenerateVariance,
        GlError::Stationarity(_) => GlstatStatus::Stationarity,
        GlError::Config(_) => GlstatStatus::Config,
        GlError::Io(_) | GlError::Csv(_) => GlstatStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(GlError),
}

impl From<GlError> for Failure {
    fn from(e: GlError) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GlstatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlstatStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GlstatStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GlstatStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(GlError::Argument(format!("{what} is not valid UTF-8"))))
}

fn lrv_config(bandwidth: f64) -> LrvConfig {
    LrvConfig {
        bandwidth: if bandwidth > 0.0 {
            BandwidthPolicy::Fixed { b: bandwidth }
        } else {
            BandwidthPolicy::Auto
        },
        ..LrvConfig::default()
    }
}

fn kernel(name: &str, m: usize) -> Result<glstat::KernelSpec, GlError> {
    let mut params = std::collections::BTreeMap::new();
    if m > 0 {
        params.insert("m".to_string(), m as f64);
    }
    builtin_kernel(name, &params)
}

fn estimator(name: &str, m: usize, alpha: f64) -> Result<Estimator, GlError> {
    let m = (m > 0).then_some(m);
    let alpha = (!alpha.is_nan()).then_some(alpha);
    Ok(match Estimator::from_name(name, m, alpha)? {
        Estimator::Q { m: 3, alpha, .. } => Estimator::Q {
            m: 3,
            alpha,
            mode: QMode::FastExact,
        },
        other => other,
    })
}

/// Message of the calling thread's last failure. Valid until that thread's
/// next failing call; empty when nothing failed yet.
#[no_mangle]
pub extern "C" fn glstat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glstat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` finite values into a new sample handle.
///
/// # Safety
/// `values` must point to `len` readable doubles (may be null when `len` is 0)
/// and `out_sample` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn glstat_sample_new(values: *const f64, len: usize, out_sample: *mut *mut GlstatSample) -> GlstatStatus {
    guard(|| {
        let slot = out(out_sample, "out_sample")?;
        let data = if len == 0 {
            Vec::new()
        } else {
            if values.is_null() {
                return Err(Failure::Null("values"));
            }
            std::slice::from_raw_parts(values, len).to_vec()
        };
        let inner = Sample::new(data)?;
        *slot = Box::into_raw(Box::new(GlstatSample { inner }));
        Ok(())
    })
}

/// # Safety
/// `sample` must come from [`glstat_sample_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn glstat_sample_free(sample: *mut GlstatSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of observations; 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glstat_sample_len(sample: *const GlstatSample) -> usize {
    sample.as_ref().map_or(0, |s| s.inner.len())
}

/// GL representation of a catalog estimator (`gini`, `gini_os`, `q`, `c`,
/// `lms`) at sample size `n`. `m = 0` and `alpha = NaN` select defaults.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_spec` writable.
#[no_mangle]
pub unsafe extern "C" fn glstat_spec_from_estimator(
    name: *const c_char,
    n: usize,
    m: usize,
    alpha: f64,
    out_spec: *mut *mut GlstatSpec,
) -> GlstatStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        let inner = estimator(c_str(name, "name")?, m, alpha)?.gl_spec(n)?;
        *slot = Box::into_raw(Box::new(GlstatSpec { inner }));
        Ok(())
    })
}

/// GL spec from the TOML spec-file format used by the command line.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string and `out_spec` writable.
#[no_mangle]
pub unsafe extern "C" fn glstat_spec_from_toml(toml_text: *const c_char, out_spec: *mut *mut GlstatSpec) -> GlstatStatus {
    guard(|| {
        let slot = out(out_spec, "out_spec")?;
        let cfg: GLSpecConfig =
            toml::from_str(c_str(toml_text, "toml_text")?).map_err(|e| GlError::Config(e.to_string()))?;
        *slot = Box::into_raw(Box::new(GlstatSpec { inner: cfg.build()? }));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from a `glstat_spec_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn glstat_spec_free(spec: *mut GlstatSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Point estimate of a catalog estimator; Q with m = 3 uses the exact
/// counting search.
///
/// # Safety
/// Pointers must be valid; `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn glstat_estimate(
    sample: *const GlstatSample,
    name: *const c_char,
    m: usize,
    alpha: f64,
    out_value: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let slot = out(out_value, "out_value")?;
        *slot = estimator(c_str(name, "name")?, m, alpha)?.evaluate(&s.inner)?;
        Ok(())
    })
}

/// `T(H_n)` for a spec handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn glstat_gl_statistic(
    sample: *const GlstatSample,
    spec: *const GlstatSpec,
    out_value: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let g = deref(spec, "spec")?;
        *out(out_value, "out_value")? = glstat::glstat::gl_statistic(&s.inner, &g.inner)?;
        Ok(())
    })
}

/// U-statistic of a built-in kernel; `m = 0` for kernels of fixed degree.
///
/// # Safety
/// Pointers must be valid; `kernel_name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn glstat_u_statistic(
    sample: *const GlstatSample,
    kernel_name: *const c_char,
    m: usize,
    out_value: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let k = kernel(c_str(kernel_name, "kernel_name")?, m)?;
        *out(out_value, "out_value")? = u_statistic(&s.inner, &k)?;
        Ok(())
    })
}

/// Bartlett long-run variance of a U-statistic; `bandwidth <= 0` selects
/// `floor(n^{1/3})`.
///
/// # Safety
/// Pointers must be valid; `kernel_name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn glstat_lrv_ustat(
    sample: *const GlstatSample,
    kernel_name: *const c_char,
    m: usize,
    bandwidth: f64,
    out_value: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let k = kernel(c_str(kernel_name, "kernel_name")?, m)?;
        *out(out_value, "out_value")? = lrv_ustat(&s.inner, &k, &lrv_config(bandwidth))?;
        Ok(())
    })
}

/// Bartlett long-run variance of a GL-statistic.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn glstat_lrv_gl(
    sample: *const GlstatSample,
    spec: *const GlstatSpec,
    bandwidth: f64,
    out_report: *mut GlstatVarianceReport,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let g = deref(spec, "spec")?;
        let slot = out(out_report, "out_report")?;
        let r = lrv_gl(&s.inner, &g.inner, &lrv_config(bandwidth))?;
        *slot = GlstatVarianceReport {
            sigma2_gl: r.sigma2_gl,
            sigma2_raw: r.sigma2_raw,
            sigma2_scaled: r.sigma2_scaled,
            bandwidth: r.bandwidth_used,
            statistic: r.statistic,
            clamped: r.clamped as i32,
        };
        Ok(())
    })
}

/// Asymptotic interval `T ± z m σ̂ / √n` at `level` in (0, 1).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn glstat_confidence_interval(
    sample: *const GlstatSample,
    spec: *const GlstatSpec,
    level: f64,
    bandwidth: f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let g = deref(spec, "spec")?;
        let lo = out(out_lo, "out_lo")?;
        let hi = out(out_hi, "out_hi")?;
        let ci = gl_confidence_interval(&s.inner, &g.inner, &lrv_config(bandwidth), level)?;
        *lo = ci.lo;
        *hi = ci.hi;
        Ok(())
    })
}

/// Writes `n` values of an EGARCH(1,1) path with AR(1) innovations
/// (`rho = 0.8`) for `scenario` 1 or 2 into `out_values`.
///
/// # Safety
/// `out_values` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn glstat_simulate_egarch(
    scenario: u32,
    n: usize,
    burn_in: usize,
    seed: u64,
    out_values: *mut f64,
) -> GlstatStatus {
    guard(|| {
        let model = match scenario {
            1 => ProcessModel::egarch_scenario1(),
            2 => ProcessModel::egarch_scenario2(),
            other => {
                return Err(GlError::Argument(format!("scenario must be 1 or 2, got {other}")).into());
            }
        };
        if n > 0 && out_values.is_null() {
            return Err(Failure::Null("out_values"));
        }
        let path = SimConfig {
            n,
            burn_in,
            seed,
            model,
        }
        .simulate()?;
        if n > 0 {
            std::slice::from_raw_parts_mut(out_values, n).copy_from_slice(path.values());
        }
        Ok(())
    })
}
