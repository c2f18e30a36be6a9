//! C ABI over the `starris` solver.
//!
//! Configurations and reports are opaque heap handles owned by the caller
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`StarrisStatus`]; on failure a message is kept per thread and
//! can be read with [`starris_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use starris::bcd::{run_scheme, Scheme, SolveError, SolveReport};
use starris::config::{parse_config, ConfigError, Preset};
use starris::scenario::{draw_trial, SystemConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarrisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigParse = 3,
    ConfigInvalid = 4,
    SolveFailed = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarrisPreset {
    Paper = 0,
    Desk = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarrisScheme {
    Proposed = 0,
    Rabm = 1,
    Rsv = 2,
    RabmRsv = 3,
    Fstar = 4,
}

/// Opaque system configuration.
pub struct StarrisConfig {
    inner: SystemConfig,
}

/// Opaque solve result.
pub struct StarrisReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(StarrisStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StarrisStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StarrisStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            StarrisStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(StarrisStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn preset(p: StarrisPreset) -> Preset {
    match p {
        StarrisPreset::Paper => Preset::Paper,
        StarrisPreset::Desk => Preset::Desk,
    }
}

fn scheme(s: StarrisScheme) -> Scheme {
    match s {
        StarrisScheme::Proposed => Scheme::Proposed,
        StarrisScheme::Rabm => Scheme::Rabm,
        StarrisScheme::Rsv => Scheme::Rsv,
        StarrisScheme::RabmRsv => Scheme::RabmRsv,
        StarrisScheme::Fstar => Scheme::Fstar,
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn starris_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn starris_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration holding the preset's defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn starris_config_new(base: StarrisPreset, out: *mut *mut StarrisConfig) -> StarrisStatus {
    guard(|| unsafe {
        write_out(
            out,
            StarrisConfig {
                inner: preset(base).base(),
            },
        )
    })
}

/// Parses TOML text on top of a preset.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn starris_config_from_toml(
    text: *const c_char,
    base: StarrisPreset,
    out: *mut *mut StarrisConfig,
) -> StarrisStatus {
    guard(|| unsafe {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure(StarrisStatus::InvalidUtf8, e.to_string()))?;
        let cfg = parse_config(text, preset(base)).map_err(|e| match e {
            ConfigError::Validation(_) => Failure(StarrisStatus::ConfigInvalid, e.to_string()),
            _ => Failure(StarrisStatus::ConfigParse, e.to_string()),
        })?;
        write_out(out, StarrisConfig { inner: cfg })
    })
}

/// Releases a configuration. NULL is ignored.
///
/// # Safety
/// `cfg` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn starris_config_free(cfg: *mut StarrisConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets the key of the random generator.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn starris_config_set_seed(cfg: *mut StarrisConfig, seed: u64) -> StarrisStatus {
    guard(|| unsafe {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.inner.seed = seed;
        Ok(())
    })
}

/// Writes `[M, N, U, Q]` into `dims`.
///
/// # Safety
/// `cfg` must be a live handle and `dims` valid for four writes.
#[no_mangle]
pub unsafe extern "C" fn starris_config_dims(cfg: *const StarrisConfig, dims: *mut usize) -> StarrisStatus {
    guard(|| unsafe {
        let c = &deref(cfg, "cfg")?.inner;
        if dims.is_null() {
            return Err(null("dims"));
        }
        for (i, v) in [c.antennas, c.elements, c.users(), c.levels].into_iter().enumerate() {
            *dims.add(i) = v;
        }
        Ok(())
    })
}

/// Draws the channels of `trial` and solves them with `which`.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn starris_solve(
    cfg: *const StarrisConfig,
    which: StarrisScheme,
    trial: u64,
    out: *mut *mut StarrisReport,
) -> StarrisStatus {
    guard(|| unsafe {
        let cfg = &deref(cfg, "cfg")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = draw_trial(cfg, trial);
        let rep = run_scheme(scheme(which), cfg, &ch, trial).map_err(|e| match e {
            SolveError::Config(_) => Failure(StarrisStatus::ConfigInvalid, e.to_string()),
            _ => Failure(StarrisStatus::SolveFailed, e.to_string()),
        })?;
        write_out(out, StarrisReport { inner: rep })
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn starris_report_free(report: *mut StarrisReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Final sum rate in bits/s/Hz.
///
/// # Safety
/// `report` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn starris_report_sum_rate(report: *const StarrisReport, out: *mut f64) -> StarrisStatus {
    guard(|| unsafe {
        let r = &deref(report, "report")?.inner;
        *out.as_mut().ok_or_else(|| null("out"))? = r.sum_rate();
        Ok(())
    })
}

/// Number of outer iterations run.
///
/// # Safety
/// `report` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn starris_report_iterations(report: *const StarrisReport, out: *mut usize) -> StarrisStatus {
    guard(|| unsafe {
        let r = &deref(report, "report")?.inner;
        *out.as_mut().ok_or_else(|| null("out"))? = r.iterations;
        Ok(())
    })
}

unsafe fn copy_series(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    *len.as_mut().ok_or_else(|| null("len"))? = src.len();
    if cap == 0 {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    if cap < src.len() {
        return Err(Failure(
            StarrisStatus::InvalidArgument,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the per-iteration sum rates into `buf`.
///
/// `len` always receives the series length; pass `cap = 0` to query it.
///
/// # Safety
/// `report` must be a live handle, `len` valid for one write and `buf`
/// valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn starris_report_trace(
    report: *const StarrisReport,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> StarrisStatus {
    guard(|| unsafe { copy_series(&deref(report, "report")?.inner.trace, buf, cap, len) })
}

/// Copies the final per-user powers (watts) into `buf`; same protocol as
/// [`starris_report_trace`].
///
/// # Safety
/// As for [`starris_report_trace`].
#[no_mangle]
pub unsafe extern "C" fn starris_report_power(
    report: *const StarrisReport,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> StarrisStatus {
    guard(|| unsafe { copy_series(&deref(report, "report")?.inner.final_state.power.p, buf, cap, len) })
}
