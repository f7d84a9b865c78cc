//! C ABI for the pclsim emulation.
//!
//! Conventions:
//! - Every fallible function returns a [`PclsimStatus`]; `PCLSIM_OK` is 0.
//! - On failure, a thread-local message is set; read it with
//!   [`pclsim_last_error_message`]. The pointer stays valid until the next
//!   failing call on the same thread.
//! - Objects cross the boundary as opaque handles; free them with their
//!   matching `_free` function. Strings returned through `char**` outputs
//!   are owned by the caller and released with [`pclsim_string_free`].
//! - All functions are panic-safe: a Rust panic is caught and surfaced as
//!   `PCLSIM_ERR_PANIC` instead of unwinding across the FFI boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use pclsim::forecast::ForecastModel;
use pclsim::nodesim::{compute_service_metrics, RunMode};
use pclsim::scenario::{cmd_compare, cmd_generate, cmd_run, cmd_train, parse_config, ScenarioConfig};
use pclsim::Error;

/// Result codes returned by every fallible `pclsim_*` function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PclsimStatus {
    /// Success.
    PclsimOk = 0,
    /// A required pointer argument was null.
    PclsimErrNullArg = 1,
    /// A string argument was not valid UTF-8.
    PclsimErrUtf8 = 2,
    /// The configuration was rejected (parse or validation failure).
    PclsimErrConfig = 3,
    /// The operation failed at runtime (I/O, training, simulation, …).
    PclsimErrRuntime = 4,
    /// An internal invariant failed (a panic was caught).
    PclsimErrPanic = 5,
}

/// Opaque scenario configuration handle.
pub struct PclsimConfig {
    inner: ScenarioConfig,
}

/// Opaque trained-forecaster handle.
pub struct PclsimModel {
    inner: ForecastModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: Vec<u8> = message.bytes().filter(|b| *b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &Error) -> PclsimStatus {
    set_error(&err.to_string());
    if err.is_config() {
        PclsimStatus::PclsimErrConfig
    } else {
        PclsimStatus::PclsimErrRuntime
    }
}

/// Runs `f` with panics converted to `PCLSIM_ERR_PANIC`.
fn guarded<F: FnOnce() -> PclsimStatus>(f: F) -> PclsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic of unknown type".into());
            set_error(&format!("internal panic: {message}"));
            PclsimStatus::PclsimErrPanic
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for reads.
unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, PclsimStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(PclsimStatus::PclsimErrNullArg);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PclsimStatus::PclsimErrUtf8
    })
}

fn string_out(out: *mut *mut c_char, value: String) -> PclsimStatus {
    let sanitized: Vec<u8> = value.into_bytes().into_iter().filter(|b| *b != 0).collect();
    let c = match CString::new(sanitized) {
        Ok(c) => c,
        Err(_) => {
            set_error("output string could not be encoded");
            return PclsimStatus::PclsimErrRuntime;
        }
    };
    unsafe { *out = c.into_raw() };
    PclsimStatus::PclsimOk
}

// ---------------------------------------------------------------------------
// Library info and error reporting
// ---------------------------------------------------------------------------

/// Library version as a static NUL-terminated string; never free it.
#[no_mangle]
pub extern "C" fn pclsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error raised on this thread ("" when none). Valid
/// until the next failing `pclsim_*` call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn pclsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `char**` output parameter. Null is a
/// no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn pclsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

/// Parses and validates a scenario configuration JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the handle; free with
/// [`pclsim_config_free`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_config_parse(
    json: *const c_char,
    out: *mut *mut PclsimConfig,
) -> PclsimStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let text = match utf8_arg(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_config(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(PclsimConfig { inner: config }));
                PclsimStatus::PclsimOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Frees a configuration handle. Null is a no-op.
///
/// # Safety
/// `config` must have come from [`pclsim_config_parse`] and not been freed.
#[no_mangle]
pub unsafe extern "C" fn pclsim_config_free(config: *mut PclsimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overrides the scenario seed (and everything derived from it).
///
/// # Safety
/// `config` must be a live handle from [`pclsim_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_config_set_seed(
    config: *mut PclsimConfig,
    seed: u64,
) -> PclsimStatus {
    guarded(|| {
        let Some(config) = config.as_mut() else {
            set_error("null config handle");
            return PclsimStatus::PclsimErrNullArg;
        };
        config.inner = config.inner.clone().with_seed(seed);
        PclsimStatus::PclsimOk
    })
}

/// Overrides the output directory.
///
/// # Safety
/// `config` must be a live handle; `out_dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pclsim_config_set_out_dir(
    config: *mut PclsimConfig,
    out_dir: *const c_char,
) -> PclsimStatus {
    guarded(|| {
        let Some(config) = config.as_mut() else {
            set_error("null config handle");
            return PclsimStatus::PclsimErrNullArg;
        };
        let dir = match utf8_arg(out_dir) {
            Ok(d) => d,
            Err(status) => return status,
        };
        config.inner = config.inner.clone().with_out_dir(PathBuf::from(dir));
        PclsimStatus::PclsimOk
    })
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

unsafe fn config_ref<'a>(config: *const PclsimConfig) -> Result<&'a ScenarioConfig, PclsimStatus> {
    match config.as_ref() {
        Some(c) => Ok(&c.inner),
        None => {
            set_error("null config handle");
            Err(PclsimStatus::PclsimErrNullArg)
        }
    }
}

/// `generate`: writes the dataset CSV; returns a JSON summary
/// `{"dataset_path":…,"hours":…,"cells":…,"samples":…}`.
///
/// # Safety
/// `config` must be a live handle; `summary_json_out` a valid pointer. Free
/// `*summary_json_out` with [`pclsim_string_free`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_generate(
    config: *const PclsimConfig,
    summary_json_out: *mut *mut c_char,
) -> PclsimStatus {
    guarded(|| {
        if summary_json_out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let config = match config_ref(config) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match cmd_generate(config) {
            Ok(outcome) => string_out(
                summary_json_out,
                serde_json::json!({
                    "dataset_path": outcome.dataset_path,
                    "hours": outcome.hours,
                    "cells": outcome.cells,
                    "samples": outcome.samples,
                })
                .to_string(),
            ),
            Err(e) => fail(&e),
        }
    })
}

/// `train`: trains and persists all models; returns the accuracy table as a
/// JSON array of rows.
///
/// # Safety
/// As for [`pclsim_generate`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_train(
    config: *const PclsimConfig,
    accuracy_json_out: *mut *mut c_char,
) -> PclsimStatus {
    guarded(|| {
        if accuracy_json_out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let config = match config_ref(config) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match cmd_train(config) {
            Ok(outcome) => match serde_json::to_string(&outcome.table) {
                Ok(json) => string_out(accuracy_json_out, json),
                Err(e) => fail(&Error::Json(e)),
            },
            Err(e) => fail(&e),
        }
    })
}

/// `run`: replays the test period in one mode (`dynamic_mode` = 0 for
/// static, nonzero for dynamic); returns the totals JSON.
///
/// # Safety
/// As for [`pclsim_generate`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_run(
    config: *const PclsimConfig,
    dynamic_mode: i32,
    totals_json_out: *mut *mut c_char,
) -> PclsimStatus {
    guarded(|| {
        if totals_json_out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let config = match config_ref(config) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let mode = if dynamic_mode == 0 { RunMode::Static } else { RunMode::Dynamic };
        match cmd_run(config, mode).and_then(|o| o.report.totals_json()) {
            Ok(totals) => string_out(totals_json_out, totals),
            Err(e) => fail(&e),
        }
    })
}

/// `compare`: full static vs dynamic comparison; returns the side-by-side
/// totals JSON (the content of `compare.json`).
///
/// # Safety
/// As for [`pclsim_generate`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_compare(
    config: *const PclsimConfig,
    compare_json_out: *mut *mut c_char,
) -> PclsimStatus {
    guarded(|| {
        if compare_json_out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let config = match config_ref(config) {
            Ok(c) => c,
            Err(status) => return status,
        };
        match cmd_compare(config).and_then(|outcome| {
            std::fs::read_to_string(&outcome.compare_json).map_err(Error::Io)
        }) {
            Ok(json) => string_out(compare_json_out, json),
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Forecast models
// ---------------------------------------------------------------------------

/// Loads a persisted forecast model from a JSON file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer. On
/// success `*out` owns the handle; free with [`pclsim_model_free`].
#[no_mangle]
pub unsafe extern "C" fn pclsim_model_load(
    path: *const c_char,
    out: *mut *mut PclsimModel,
) -> PclsimStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let path = match utf8_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ForecastModel::load_from(Path::new(path)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(PclsimModel { inner: model }));
                PclsimStatus::PclsimOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Frees a model handle. Null is a no-op.
///
/// # Safety
/// `model` must have come from [`pclsim_model_load`] and not been freed.
#[no_mangle]
pub unsafe extern "C" fn pclsim_model_free(model: *mut PclsimModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// History length [`pclsim_model_predict`] expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pclsim_model_required_window(model: *const PclsimModel) -> usize {
    match model.as_ref() {
        Some(m) => m.inner.required_window(),
        None => 0,
    }
}

/// One-step forecast from the most recent `len` observations (at least the
/// required window).
///
/// # Safety
/// `model` must be a live handle; `window` valid for `len` reads;
/// `prediction_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pclsim_model_predict(
    model: *const PclsimModel,
    window: *const f64,
    len: usize,
    prediction_out: *mut f64,
) -> PclsimStatus {
    guarded(|| {
        if prediction_out.is_null() || (window.is_null() && len > 0) {
            set_error("null argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        let Some(model) = model.as_ref() else {
            set_error("null model handle");
            return PclsimStatus::PclsimErrNullArg;
        };
        let values = std::slice::from_raw_parts(window, len);
        match model.inner.predict_next(values) {
            Ok(preds) => {
                *prediction_out = preds[0];
                PclsimStatus::PclsimOk
            }
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Service metrics
// ---------------------------------------------------------------------------

/// Under/over/non-optimally served counts for one (hour, slice, cell).
///
/// # Safety
/// The three output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pclsim_service_metrics(
    actual_ues: i64,
    limit_ues: i64,
    under_out: *mut u32,
    over_out: *mut u32,
    non_optimal_out: *mut u32,
) -> PclsimStatus {
    guarded(|| {
        if under_out.is_null() || over_out.is_null() || non_optimal_out.is_null() {
            set_error("null output argument");
            return PclsimStatus::PclsimErrNullArg;
        }
        match compute_service_metrics(actual_ues, limit_ues) {
            Ok((under, over, non_optimal)) => {
                *under_out = under;
                *over_out = over;
                *non_optimal_out = non_optimal;
                PclsimStatus::PclsimOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn last_error() -> String {
        CStr::from_ptr(pclsim_last_error_message()).to_string_lossy().into_owned()
    }

    #[test]
    fn version_is_static_and_nul_terminated() {
        unsafe {
            let v = CStr::from_ptr(pclsim_version());
            assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
        }
    }

    #[test]
    fn config_parse_round_trip_and_errors() {
        unsafe {
            let mut handle: *mut PclsimConfig = ptr::null_mut();
            let good = c(r#"{"dataset": {"generator": {"n_enb": 1, "cells_per_enb": 1, "days": 3}}}"#);
            assert_eq!(pclsim_config_parse(good.as_ptr(), &mut handle), PclsimStatus::PclsimOk);
            assert!(!handle.is_null());
            assert_eq!(pclsim_config_set_seed(handle, 9), PclsimStatus::PclsimOk);
            assert_eq!((*handle).inner.seed, 9);
            pclsim_config_free(handle);

            let mut handle: *mut PclsimConfig = ptr::null_mut();
            let bad = c(r#"{"dataset": {}}"#);
            assert_eq!(
                pclsim_config_parse(bad.as_ptr(), &mut handle),
                PclsimStatus::PclsimErrConfig
            );
            assert!(handle.is_null());
            assert!(last_error().contains("exactly one"));

            assert_eq!(
                pclsim_config_parse(ptr::null(), &mut handle),
                PclsimStatus::PclsimErrNullArg
            );
        }
    }

    #[test]
    fn generate_run_and_metrics_through_the_abi() {
        let dir = tempfile::tempdir().unwrap();
        let json = format!(
            r#"{{"dataset": {{"generator": {{"n_enb": 1, "cells_per_enb": 1, "days": 4}}}},
                "lstm": {{"layers": 1, "units_per_layer": 4, "epochs": 2, "activation": "tanh"}},
                "arima_orders": [{{"p": 1, "d": 0, "q": 0, "P": 0, "D": 1, "Q": 0, "s": 24}}],
                "out_dir": {}}}"#,
            serde_json::to_string(dir.path()).unwrap()
        );
        unsafe {
            let mut config: *mut PclsimConfig = ptr::null_mut();
            let doc = c(&json);
            assert_eq!(pclsim_config_parse(doc.as_ptr(), &mut config), PclsimStatus::PclsimOk);

            let mut summary: *mut c_char = ptr::null_mut();
            assert_eq!(pclsim_generate(config, &mut summary), PclsimStatus::PclsimOk);
            let text = CStr::from_ptr(summary).to_str().unwrap();
            assert!(text.contains("\"hours\":96"), "summary: {text}");
            pclsim_string_free(summary);

            // Dynamic run without models: runtime-side config error.
            let mut totals: *mut c_char = ptr::null_mut();
            assert_eq!(pclsim_run(config, 1, &mut totals), PclsimStatus::PclsimErrConfig);
            assert!(last_error().contains("pclsim train"));

            let mut table: *mut c_char = ptr::null_mut();
            assert_eq!(pclsim_train(config, &mut table), PclsimStatus::PclsimOk);
            let parsed: serde_json::Value =
                serde_json::from_str(CStr::from_ptr(table).to_str().unwrap()).unwrap();
            assert!(parsed["rows"].as_array().unwrap().len() == 2);
            pclsim_string_free(table);

            let mut totals: *mut c_char = ptr::null_mut();
            assert_eq!(pclsim_run(config, 1, &mut totals), PclsimStatus::PclsimOk);
            assert!(CStr::from_ptr(totals).to_str().unwrap().contains("\"mode\": \"dynamic\""));
            pclsim_string_free(totals);

            // Load one persisted model and predict through the ABI.
            let model_path = dir.path().join("models").join("A_enb0-cell0.active_ues.naive.json");
            let path_c = c(model_path.to_str().unwrap());
            let mut model: *mut PclsimModel = ptr::null_mut();
            assert_eq!(pclsim_model_load(path_c.as_ptr(), &mut model), PclsimStatus::PclsimOk);
            let window = pclsim_model_required_window(model);
            assert_eq!(window, 24);
            let history: Vec<f64> = (0..window).map(|i| 10.0 + i as f64).collect();
            let mut prediction = f64::NAN;
            assert_eq!(
                pclsim_model_predict(model, history.as_ptr(), history.len(), &mut prediction),
                PclsimStatus::PclsimOk
            );
            assert!((prediction - history[0]).abs() < 1e-9, "seasonal lookup");
            pclsim_model_free(model);

            pclsim_config_free(config);
        }

        unsafe {
            let (mut u, mut o, mut n) = (0u32, 0u32, 0u32);
            assert_eq!(
                pclsim_service_metrics(15, 10, &mut u, &mut o, &mut n),
                PclsimStatus::PclsimOk
            );
            assert_eq!((u, o, n), (5, 0, 5));
            assert_eq!(
                pclsim_service_metrics(-1, 10, &mut u, &mut o, &mut n),
                PclsimStatus::PclsimErrRuntime
            );
        }
    }
}
