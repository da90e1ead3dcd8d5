//! C ABI for ocdiag.
//!
//! Models are opaque handles created by `ocdiag_model_load` or
//! `ocdiag_model_parse` and released with `ocdiag_model_free`. Every call
//! returns an `OcdiagStatus`; on failure the message is kept per thread and
//! can be read with `ocdiag_last_error_message`. Fault labels cross the
//! boundary as a byte whose six low bits are d1..d6 with d1 the most
//! significant (S1 open = 0b100000).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ocdiag::diagnosis::{run_diagnosis, DiagnosisConfig};
use ocdiag::forest::{parse_model, RandomForestModel};
use ocdiag::sim::{PhaseSample, TriPhaseSeries};
use ocdiag::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcdiagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Version = 5,
    InvalidArgument = 6,
    WidthMismatch = 7,
    Panic = 8,
}

/// Opaque trained forest.
pub struct OcdiagModel {
    inner: RandomForestModel,
}

/// Diagnosis settings; obtain defaults from `ocdiag_diagnosis_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcdiagDiagnosisConfig {
    pub source_rate: f64,
    pub target_rate: f64,
    pub fundamental_hz: f64,
    pub window_samples: usize,
    pub debounce_min_run: usize,
    pub confirm_windows: usize,
    pub fusion_min_support: usize,
    /// When false the phase is estimated from the first period.
    pub has_phase: bool,
    pub phase_deg: f64,
}

/// Outcome of `ocdiag_diagnose`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcdiagReport {
    pub fault_bits: u8,
    pub protection_signal: bool,
    /// Valid only when `protection_signal` is true.
    pub first_detect_time: f64,
    pub windows: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> OcdiagStatus {
    match e {
        Error::Io(_) => OcdiagStatus::Io,
        Error::Parse { .. } => OcdiagStatus::Parse,
        Error::Version { .. } => OcdiagStatus::Version,
        Error::WidthMismatch { .. } => OcdiagStatus::WidthMismatch,
        _ => OcdiagStatus::InvalidArgument,
    }
}

struct Failure(OcdiagStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OcdiagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OcdiagStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            OcdiagStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(OcdiagStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(OcdiagStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(model: *const OcdiagModel) -> Result<&'a RandomForestModel, Failure> {
    model.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn store_model(out: *mut *mut OcdiagModel, inner: RandomForestModel) {
    *out = Box::into_raw(Box::new(OcdiagModel { inner }));
}

/// Load a model file. On success `*out` owns a handle for `ocdiag_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_model_load(path: *const c_char, out: *mut *mut OcdiagModel) -> OcdiagStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(Error::from)?;
        store_model(out, parse_model(&text)?);
        Ok(())
    })
}

/// Parse a model from the text of a model file.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_model_parse(text: *const c_char, out: *mut *mut OcdiagModel) -> OcdiagStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        store_model(out, parse_model(c_str(text, "text")?)?);
        Ok(())
    })
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_model_free(model: *mut OcdiagModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features the model expects.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_model_width(model: *const OcdiagModel, out: *mut usize) -> OcdiagStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.width();
        Ok(())
    })
}

/// Classify one feature vector of `len` values.
///
/// # Safety
/// `features` must point to `len` doubles; `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_model_predict(
    model: *const OcdiagModel,
    features: *const f64,
    len: usize,
    out_label: *mut u8,
) -> OcdiagStatus {
    guard(|| {
        let m = model_ref(model)?;
        if features.is_null() {
            return Err(null("features"));
        }
        let out = out_label.as_mut().ok_or_else(|| null("out_label"))?;
        let x = std::slice::from_raw_parts(features, len);
        *out = m.predict_label(x)?.bits();
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ocdiag_diagnosis_config_default() -> OcdiagDiagnosisConfig {
    let d = DiagnosisConfig::default();
    OcdiagDiagnosisConfig {
        source_rate: d.source_rate,
        target_rate: d.target_rate,
        fundamental_hz: d.fundamental_hz,
        window_samples: d.window_samples,
        debounce_min_run: d.debounce_min_run,
        confirm_windows: d.confirm_windows,
        fusion_min_support: d.fusion_min_support,
        has_phase: d.phase_deg.is_some(),
        phase_deg: d.phase_deg.unwrap_or(0.0),
    }
}

impl From<&OcdiagDiagnosisConfig> for DiagnosisConfig {
    fn from(c: &OcdiagDiagnosisConfig) -> Self {
        DiagnosisConfig {
            source_rate: c.source_rate,
            target_rate: c.target_rate,
            fundamental_hz: c.fundamental_hz,
            window_samples: c.window_samples,
            debounce_min_run: c.debounce_min_run,
            confirm_windows: c.confirm_windows,
            fusion_min_support: c.fusion_min_support,
            phase_deg: c.has_phase.then_some(c.phase_deg),
        }
    }
}

/// Diagnose `n` uniformly spaced samples starting at `t0` seconds.
/// `config` may be null for the defaults.
///
/// # Safety
/// `i_a`, `i_b` and `i_c` must each point to `n` doubles; `config` must be
/// null or valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_diagnose(
    model: *const OcdiagModel,
    i_a: *const f64,
    i_b: *const f64,
    i_c: *const f64,
    n: usize,
    sample_rate: f64,
    t0: f64,
    config: *const OcdiagDiagnosisConfig,
    out: *mut OcdiagReport,
) -> OcdiagStatus {
    guard(|| {
        let m = model_ref(model)?;
        if i_a.is_null() || i_b.is_null() || i_c.is_null() {
            return Err(null("current buffer"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let config = match config.as_ref() {
            Some(c) => DiagnosisConfig::from(c),
            None => DiagnosisConfig::default(),
        };
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Failure(OcdiagStatus::InvalidArgument, format!("invalid sample rate {sample_rate}")));
        }
        let (a, b, c) = (
            std::slice::from_raw_parts(i_a, n),
            std::slice::from_raw_parts(i_b, n),
            std::slice::from_raw_parts(i_c, n),
        );
        let samples =
            (0..n).map(|k| PhaseSample { t: t0 + k as f64 / sample_rate, currents: [a[k], b[k], c[k]] }).collect();
        let series = TriPhaseSeries {
            sample_rate,
            frequency: config.fundamental_hz,
            phase_deg: 0.0,
            samples,
            fault_timeline: Vec::new(),
        };
        series.validate()?;
        let report = run_diagnosis(m, &series, &config)?;
        *out = OcdiagReport {
            fault_bits: report.fault_label().bits(),
            protection_signal: report.protection_signal,
            first_detect_time: report.first_detect_time.unwrap_or(f64::NAN),
            windows: report.per_window_history.len(),
        };
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus
/// one, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ocdiag_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ocdiag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
