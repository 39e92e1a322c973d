//! C ABI over `glc-core`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `_free` function. Every entry point returns a `GlcStatus`; on
//! failure the message is kept per thread and read back with
//! `glc_last_error_message`. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use glc_core::cli::{run_spectrum, run_steady, SteadyRun};
use glc_core::config::RunConfig;
use glc_core::stability::Verdict;
use glc_core::GlcError;

/// Parsed and validated run configuration.
pub struct GlcConfig {
    inner: RunConfig,
}

/// Converged steady state together with its grid and current profile.
pub struct GlcSteady {
    inner: SteadyRun,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlcStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    NullOrInvalid = 1,
    /// The configuration was rejected; the message names the key.
    Config = 2,
    /// Physical outcome: supercritical current, no contraction, corrector divergence or delta guard.
    Physical = 3,
    /// Linear or eigen solver failure and other numerical faults.
    Numerical = 4,
    /// The destination buffer is too small.
    BufferTooSmall = 5,
    /// A bug inside the library; the message holds the panic payload.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlcFieldKind {
    Density = 0,
    Phase = 1,
    Potential = 2,
    LeadingOrderDensity = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GlcSteadySummary {
    pub nx: usize,
    pub ny: usize,
    pub delta: f64,
    pub picard_iterations: usize,
    /// Largest contraction ratio; zero when the first iterate already converged.
    pub max_ratio: f64,
    pub h_norm_final: f64,
    pub residual_max: f64,
    pub gauge_relative: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlcVerdict {
    Stable = 0,
    Unstable = 1,
    Marginal = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcStabilitySummary {
    pub min_re_nongauge: f64,
    pub gauge_re: f64,
    pub gauge_im: f64,
    pub max_residual: f64,
    pub verdict: GlcVerdict,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &GlcError) -> GlcStatus {
    match err {
        GlcError::Config { .. } => GlcStatus::Config,
        e if e.is_physical() => GlcStatus::Physical,
        _ => GlcStatus::Numerical,
    }
}

fn fail(err: GlcError) -> GlcStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Runs `f`, converting panics into `GlcStatus::Panic`.
fn guarded(f: impl FnOnce() -> GlcStatus) -> GlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == GlcStatus::Ok {
                set_error("");
            }
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GlcStatus::Panic
        }
    }
}

/// Parses a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glc_config_from_toml(
    text: *const c_char,
    out: *mut *mut GlcConfig,
) -> GlcStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GlcStatus::NullOrInvalid;
        }
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            set_error("configuration is not valid UTF-8");
            return GlcStatus::NullOrInvalid;
        };
        match RunConfig::from_toml(s) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(GlcConfig { inner: cfg }));
                GlcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `cfg` must come from `glc_config_from_toml` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn glc_config_free(cfg: *mut GlcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Leading-order state plus Picard correction.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glc_steady_solve(
    cfg: *const GlcConfig,
    out: *mut *mut GlcSteady,
) -> GlcStatus {
    guarded(|| {
        if cfg.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GlcStatus::NullOrInvalid;
        }
        match run_steady(&(*cfg).inner) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(GlcSteady { inner: run }));
                GlcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must come from `glc_steady_solve` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn glc_steady_free(s: *mut GlcSteady) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live steady handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glc_steady_summary(
    s: *const GlcSteady,
    out: *mut GlcSteadySummary,
) -> GlcStatus {
    guarded(|| {
        if s.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GlcStatus::NullOrInvalid;
        }
        let run = &(*s).inner;
        let sum = &run.summary;
        *out = GlcSteadySummary {
            nx: run.grid.mesh.nx,
            ny: run.grid.mesh.ny,
            delta: sum.delta,
            picard_iterations: sum.picard_iterations,
            max_ratio: sum.contraction_ratios.iter().copied().fold(0.0, f64::max),
            h_norm_final: sum.h_norm_final,
            residual_max: sum.residuals.max(),
            gauge_relative: sum.residuals.gauge_relative,
        };
        GlcStatus::Ok
    })
}

/// Copies one cell field, row-major with x fastest, into `buf`.
///
/// # Safety
/// `s` must be a live steady handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn glc_steady_copy_field(
    s: *const GlcSteady,
    kind: GlcFieldKind,
    buf: *mut f64,
    len: usize,
) -> GlcStatus {
    guarded(|| {
        if s.is_null() || buf.is_null() {
            set_error("null pointer argument");
            return GlcStatus::NullOrInvalid;
        }
        let sol = &(*s).inner.solution;
        let field = match kind {
            GlcFieldKind::Density => &sol.rho_s,
            GlcFieldKind::Phase => &sol.chi_s,
            GlcFieldKind::Potential => &sol.phi_s,
            GlcFieldKind::LeadingOrderDensity => &sol.background.rho0,
        };
        let n = field.values.len();
        if len < n {
            set_error(format!("buffer holds {len} values, field has {n}"));
            return GlcStatus::BufferTooSmall;
        }
        std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&field.values);
        GlcStatus::Ok
    })
}

/// Spectrum of the linearization at `s` with the settings of `cfg`.
///
/// # Safety
/// Both handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn glc_stability(
    cfg: *const GlcConfig,
    s: *const GlcSteady,
    out: *mut GlcStabilitySummary,
) -> GlcStatus {
    guarded(|| {
        if cfg.is_null() || s.is_null() || out.is_null() {
            set_error("null pointer argument");
            return GlcStatus::NullOrInvalid;
        }
        match run_spectrum(&(*cfg).inner, &(*s).inner) {
            Ok(sp) => {
                *out = GlcStabilitySummary {
                    min_re_nongauge: sp.min_re_nongauge,
                    gauge_re: sp.gauge_eigenvalue[0],
                    gauge_im: sp.gauge_eigenvalue[1],
                    max_residual: sp.max_residual,
                    verdict: match sp.verdict {
                        Verdict::Stable => GlcVerdict::Stable,
                        Verdict::Unstable => GlcVerdict::Unstable,
                        Verdict::Marginal => GlcVerdict::Marginal,
                    },
                };
                GlcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length without the NUL.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn glc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
