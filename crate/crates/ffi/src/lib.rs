//! C ABI over `ihbt`.
//!
//! Every fallible call returns an [`IhbtStatus`]; on failure the message is
//! kept per thread and can be read with [`ihbt_last_error`]. Objects are
//! opaque handles released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ihbt::contrast::{compose_prediction, g2_visibility, ContrastModel};
use ihbt::correlator::CorrelationHistogram;
use ihbt::engine::g2_zero_analytic;
use ihbt::{Error, ExperimentConfig};

/// Status codes; the non-zero values match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IhbtStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Config = 3,
    DataFormat = 4,
    Numerical = 5,
    Panic = 6,
}

/// Opaque experiment configuration.
pub struct IhbtConfig {
    inner: ExperimentConfig,
}

/// Opaque contrast model built from a configuration.
pub struct IhbtModel {
    inner: ContrastModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> IhbtStatus {
    let status = match e.exit_code() {
        2 => IhbtStatus::Usage,
        3 => IhbtStatus::Config,
        4 => IhbtStatus::DataFormat,
        _ => IhbtStatus::Numerical,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> IhbtStatus {
    set_error(format!("null pointer: {what}"));
    IhbtStatus::NullPointer
}

fn guard(f: impl FnOnce() -> IhbtStatus) -> IhbtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            IhbtStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ihbt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in reference configuration.
#[no_mangle]
pub extern "C" fn ihbt_config_reference() -> *mut IhbtConfig {
    Box::into_raw(Box::new(IhbtConfig {
        inner: ExperimentConfig::reference(),
    }))
}

/// Load a TOML configuration.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_config_load(path: *const c_char, out: *mut *mut IhbtConfig) -> IhbtStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return null("path or out");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            set_error("path is not UTF-8".into());
            return IhbtStatus::Usage;
        };
        match ExperimentConfig::load(Path::new(p)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IhbtConfig { inner }));
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write the lowercase hex SHA-256 of the configuration (65 bytes with NUL)
/// into `buf`.
///
/// # Safety
/// `config` must come from this library; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ihbt_config_hash(config: *const IhbtConfig, buf: *mut c_char, len: usize) -> IhbtStatus {
    guard(|| {
        if config.is_null() || buf.is_null() {
            return null("config or buf");
        }
        let hash = (*config).inner.hash();
        if len < hash.len() + 1 {
            set_error(format!("buffer of {len} bytes is too small"));
            return IhbtStatus::Usage;
        }
        ptr::copy_nonoverlapping(hash.as_ptr() as *const c_char, buf, hash.len());
        *buf.add(hash.len()) = 0;
        IhbtStatus::Ok
    })
}

/// # Safety
/// `config` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ihbt_config_free(config: *mut IhbtConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Ideal two-ion g²(0) at saturation `s` and phase `delta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_g2_zero_analytic(s: f64, delta: f64, out: *mut f64) -> IhbtStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match g2_zero_analytic(s, delta) {
            Ok(g) => {
                *out = g;
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// g²(0) with a motional fringe visibility `v`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_g2_visibility(s: f64, delta: f64, v: f64, out: *mut f64) -> IhbtStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match g2_visibility(s, delta, v) {
            Ok(g) => {
                *out = g;
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Build the contrast model of a configuration.
///
/// # Safety
/// `config` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_model_new(config: *const IhbtConfig, out: *mut *mut IhbtModel) -> IhbtStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return null("config or out");
        }
        match ContrastModel::from_config(&(*config).inner) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IhbtModel { inner }));
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Predicted measured g²(0) at phase `delta`.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_model_g2_zero(model: *const IhbtModel, delta: f64, out: *mut f64) -> IhbtStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return null("model or out");
        }
        match (*model).inner.g2_zero(delta) {
            Ok(g) => {
                *out = g;
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn ihbt_model_free(model: *mut IhbtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicted g²(0) and its band at `n` slit positions (m).
///
/// # Safety
/// `positions` must hold `n` values; `g2`, `low` and `high` must each hold
/// `n` values (`low` and `high` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn ihbt_predict(
    config: *const IhbtConfig,
    positions: *const f64,
    n: usize,
    g2: *mut f64,
    low: *mut f64,
    high: *mut f64,
) -> IhbtStatus {
    guard(|| {
        if config.is_null() || positions.is_null() || g2.is_null() {
            return null("config, positions or g2");
        }
        let xs = std::slice::from_raw_parts(positions, n);
        match compose_prediction(&(*config).inner, xs) {
            Ok(curve) => {
                for (i, p) in curve.points.iter().enumerate() {
                    *g2.add(i) = p.g2;
                    if !low.is_null() {
                        *low.add(i) = p.band_low;
                    }
                    if !high.is_null() {
                        *high.add(i) = p.band_high;
                    }
                }
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of histogram bins for a bin width and window (s).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ihbt_histogram_len(bin: f64, window: f64, out: *mut usize) -> IhbtStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match CorrelationHistogram::empty(bin, window) {
            Ok(h) => {
                *out = h.len();
                IhbtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Multi-start multi-stop coincidences of τ = t_b − t_a (picosecond tags)
/// into `counts`, which must hold `ihbt_histogram_len(bin, window)` values.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `counts` must hold `ncounts`.
#[no_mangle]
pub unsafe extern "C" fn ihbt_correlate(
    a: *const u64,
    na: usize,
    b: *const u64,
    nb: usize,
    bin: f64,
    window: f64,
    counts: *mut u64,
    ncounts: usize,
) -> IhbtStatus {
    guard(|| {
        if (a.is_null() && na > 0) || (b.is_null() && nb > 0) || counts.is_null() {
            return null("a, b or counts");
        }
        let slice = |p: *const u64, n: usize| if n == 0 { &[][..] } else { std::slice::from_raw_parts(p, n) };
        let mut h = match CorrelationHistogram::empty(bin, window) {
            Ok(h) => h,
            Err(e) => return fail(e),
        };
        if ncounts != h.len() {
            set_error(format!("counts holds {ncounts} bins, {} needed", h.len()));
            return IhbtStatus::Usage;
        }
        if let Err(e) = ihbt::correlator::correlate_tags(&mut h, slice(a, na), slice(b, nb)) {
            return fail(e);
        }
        ptr::copy_nonoverlapping(h.counts.as_ptr(), counts, ncounts);
        IhbtStatus::Ok
    })
}
