//! C ABI over the psynorm parsing, alignment, metric, regression and
//! prompt-rendering routines.
//!
//! Conventions: every fallible function returns a [`PsynormStatus`] and
//! writes results through out-pointers. On failure a message is available
//! from [`psynorm_last_error`] on the same thread. Handles are opaque and
//! must be released with their `_free` function; strings returned as
//! `char *` are released with [`psynorm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use psynorm::align::{align_sequences, Alignment, EditOp};
use psynorm::baselines::{fit_with, FitOptions, RegressionFit};
use psynorm::metrics::{pearson, r2_of_predictions, PairedSeries, R2Mode};
use psynorm::parse::{parse_duration_map, parse_scalar_rating, MapStatus, ScalarStatus};
use psynorm::prompting::{PromptKind, PromptTemplate};
use psynorm::NumericError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// Undefined numeric result, e.g. correlation of a constant series.
    Undefined = 4,
    IndexOutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormScalarStatus {
    Ok = 0,
    Clamped = 1,
    NoNumber = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormMapStatus {
    Ok = 0,
    Recovered = 1,
    Unparseable = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormEditOp {
    Match = 0,
    Substitute = 1,
    Delete = 2,
    Insert = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormR2Mode {
    SquaredPearson = 0,
    Agreement = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsynormPromptKind {
    WordMem = 0,
    SentMem = 1,
    Rt = 2,
}

/// One alignment step; indices are -1 where the step has no such side.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsynormAlignStep {
    pub op: PsynormEditOp,
    pub ref_index: i64,
    pub hyp_index: i64,
}

pub struct PsynormDurationMap {
    words: Vec<CString>,
    values: Vec<f64>,
    status: PsynormMapStatus,
}

pub struct PsynormAlignment {
    inner: Alignment,
}

pub struct PsynormFit {
    inner: RegressionFit,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: PsynormStatus, msg: impl Into<String>) -> PsynormStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PsynormStatus) -> PsynormStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PsynormStatus::Panic, "internal panic"),
    }
}

fn numeric(e: NumericError) -> PsynormStatus {
    let status = match e {
        NumericError::ZeroVariance(_) | NumericError::ConstantTarget | NumericError::TooFewPairs(_) => {
            PsynormStatus::Undefined
        }
        _ => PsynormStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, PsynormStatus> {
    if p.is_null() {
        return Err(fail(PsynormStatus::NullPointer, "string argument is NULL"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(PsynormStatus::InvalidUtf8, e.to_string()))
}

unsafe fn read_f64s<'a>(p: *const f64, n: usize) -> Result<&'a [f64], PsynormStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PsynormStatus::NullPointer, "array argument is NULL"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn read_strs<'a>(p: *const *const c_char, n: usize) -> Result<Vec<&'a str>, PsynormStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(PsynormStatus::NullPointer, "string array is NULL"));
    }
    std::slice::from_raw_parts(p, n).iter().map(|s| read_str(*s)).collect()
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(PsynormStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        }
    };
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psynorm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn psynorm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psynorm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a rating in [0,1] from model text. `out_value` is NaN when the
/// text holds no number.
///
/// # Safety
/// `text` must be a NUL-terminated string; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_parse_scalar(
    text: *const c_char,
    out_value: *mut f64,
    out_status: *mut PsynormScalarStatus,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out_value);
        out_ptr!(out_status);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let p = parse_scalar_rating(text);
        *out_value = p.value.unwrap_or(f64::NAN);
        *out_status = match p.status {
            ScalarStatus::Ok => PsynormScalarStatus::Ok,
            ScalarStatus::Clamped => PsynormScalarStatus::Clamped,
            ScalarStatus::NoNumber => PsynormScalarStatus::NoNumber,
        };
        PsynormStatus::Ok
    })
}

/// Parses a word/duration map from model text. An unparseable text still
/// yields a handle, with status `Unparseable` and no pairs.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_duration_map_parse(
    text: *const c_char,
    out: *mut *mut PsynormDurationMap,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let m = parse_duration_map(text);
        let handle = PsynormDurationMap {
            words: m
                .pairs
                .iter()
                .map(|(w, _)| CString::new(w.replace('\0', "")).unwrap_or_default())
                .collect(),
            values: m.pairs.iter().map(|(_, v)| *v).collect(),
            status: match m.status {
                MapStatus::Ok => PsynormMapStatus::Ok,
                MapStatus::Recovered => PsynormMapStatus::Recovered,
                MapStatus::Unparseable => PsynormMapStatus::Unparseable,
            },
        };
        *out = Box::into_raw(Box::new(handle));
        PsynormStatus::Ok
    })
}

/// # Safety
/// `map` must be a live handle from [`psynorm_duration_map_parse`].
#[no_mangle]
pub unsafe extern "C" fn psynorm_duration_map_len(map: *const PsynormDurationMap) -> usize {
    map.as_ref().map_or(0, |m| m.values.len())
}

/// # Safety
/// `map` must be a live handle from [`psynorm_duration_map_parse`].
#[no_mangle]
pub unsafe extern "C" fn psynorm_duration_map_status(map: *const PsynormDurationMap) -> PsynormMapStatus {
    map.as_ref().map_or(PsynormMapStatus::Unparseable, |m| m.status)
}

/// Pair `index` of the map. `out_word` points into the handle and lives as
/// long as it does.
///
/// # Safety
/// `map` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_duration_map_get(
    map: *const PsynormDurationMap,
    index: usize,
    out_word: *mut *const c_char,
    out_ms: *mut f64,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out_word);
        out_ptr!(out_ms);
        let Some(m) = map.as_ref() else {
            return fail(PsynormStatus::NullPointer, "map is NULL");
        };
        if index >= m.values.len() {
            return fail(
                PsynormStatus::IndexOutOfRange,
                format!("index {index} out of range for {} pairs", m.values.len()),
            );
        }
        *out_word = m.words[index].as_ptr();
        *out_ms = m.values[index];
        PsynormStatus::Ok
    })
}

/// # Safety
/// `map` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psynorm_duration_map_free(map: *mut PsynormDurationMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Minimum-edit alignment of two word sequences after normalization.
///
/// # Safety
/// `reference` and `hypothesis` must hold `n_ref` / `n_hyp` NUL-terminated
/// strings (either may be NULL when its length is 0); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_align(
    reference: *const *const c_char,
    n_ref: usize,
    hypothesis: *const *const c_char,
    n_hyp: usize,
    out: *mut *mut PsynormAlignment,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let (r, h) = match (read_strs(reference, n_ref), read_strs(hypothesis, n_hyp)) {
            (Ok(r), Ok(h)) => (r, h),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        *out = Box::into_raw(Box::new(PsynormAlignment {
            inner: align_sequences(&r, &h),
        }));
        PsynormStatus::Ok
    })
}

/// # Safety
/// `a` must be a live alignment handle.
#[no_mangle]
pub unsafe extern "C" fn psynorm_alignment_cost(a: *const PsynormAlignment) -> usize {
    a.as_ref().map_or(0, |a| a.inner.cost)
}

/// # Safety
/// `a` must be a live alignment handle.
#[no_mangle]
pub unsafe extern "C" fn psynorm_alignment_len(a: *const PsynormAlignment) -> usize {
    a.as_ref().map_or(0, |a| a.inner.ops.len())
}

/// # Safety
/// `a` must be a live alignment handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_alignment_step(
    a: *const PsynormAlignment,
    index: usize,
    out: *mut PsynormAlignStep,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let Some(a) = a.as_ref() else {
            return fail(PsynormStatus::NullPointer, "alignment is NULL");
        };
        let Some(step) = a.inner.ops.get(index) else {
            return fail(
                PsynormStatus::IndexOutOfRange,
                format!("index {index} out of range for {} steps", a.inner.ops.len()),
            );
        };
        *out = PsynormAlignStep {
            op: match step.op {
                EditOp::Match => PsynormEditOp::Match,
                EditOp::Substitute => PsynormEditOp::Substitute,
                EditOp::Delete => PsynormEditOp::Delete,
                EditOp::Insert => PsynormEditOp::Insert,
            },
            ref_index: step.ref_index.map_or(-1, |i| i as i64),
            hyp_index: step.hyp_index.map_or(-1, |i| i as i64),
        };
        PsynormStatus::Ok
    })
}

/// # Safety
/// `a` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psynorm_alignment_free(a: *mut PsynormAlignment) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

unsafe fn series(predicted: *const f64, truth: *const f64, n: usize) -> Result<PairedSeries, PsynormStatus> {
    let p = read_f64s(predicted, n)?;
    let t = read_f64s(truth, n)?;
    PairedSeries::new((0..n).map(|i| i.to_string()).collect(), p.to_vec(), t.to_vec()).map_err(numeric)
}

/// Sample Pearson correlation; `Undefined` for constant input.
///
/// # Safety
/// `x` and `y` must each hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let s = match series(x, y, n) {
            Ok(s) => s,
            Err(e) => return e,
        };
        match pearson(&s) {
            Ok(r) => {
                *out = r;
                PsynormStatus::Ok
            }
            Err(e) => numeric(e),
        }
    })
}

/// # Safety
/// `predicted` and `truth` must each hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_r2(
    predicted: *const f64,
    truth: *const f64,
    n: usize,
    mode: PsynormR2Mode,
    out: *mut f64,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let s = match series(predicted, truth, n) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let mode = match mode {
            PsynormR2Mode::SquaredPearson => R2Mode::SquaredPearson,
            PsynormR2Mode::Agreement => R2Mode::Agreement,
        };
        match r2_of_predictions(&s, mode) {
            Ok(r) => {
                *out = r;
                PsynormStatus::Ok
            }
            Err(e) => numeric(e),
        }
    })
}

/// Least squares with intercept on a row-major `n` x `p` matrix. A
/// positive `ridge` adds that fixed penalty; zero or negative disables it.
///
/// # Safety
/// `x` must hold `n * p` doubles, `y` `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_ols(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    ridge: f64,
    out: *mut *mut PsynormFit,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let Some(len) = n.checked_mul(p) else {
            return fail(PsynormStatus::InvalidArgument, "matrix size overflows");
        };
        let (xs, ys) = match (read_f64s(x, len), read_f64s(y, n)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let xm = DMatrix::from_row_slice(n, p, xs);
        let yv = DVector::from_column_slice(ys);
        let opts = FitOptions {
            ridge: (ridge > 0.0).then_some(ridge),
        };
        match fit_with(&xm, &yv, opts) {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(PsynormFit { inner: fit }));
                PsynormStatus::Ok
            }
            Err(e) => numeric(e),
        }
    })
}

/// # Safety
/// `fit` must be a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_intercept(fit: *const PsynormFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.intercept)
}

/// # Safety
/// `fit` must be a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_rank(fit: *const PsynormFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.rank)
}

/// Copies the coefficients into `out`, which must hold exactly as many
/// values as the fitted matrix had columns.
///
/// # Safety
/// `fit` must be a live handle and `out` hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_coefficients(fit: *const PsynormFit, out: *mut f64, len: usize) -> PsynormStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(PsynormStatus::NullPointer, "fit is NULL");
        };
        let c = &f.inner.coefficients;
        if len != c.len() {
            return fail(
                PsynormStatus::InvalidArgument,
                format!("fit has {} coefficients, buffer holds {len}", c.len()),
            );
        }
        if len > 0 {
            out_ptr!(out);
            ptr::copy_nonoverlapping(c.as_ptr(), out, len);
        }
        PsynormStatus::Ok
    })
}

/// Predictions for a row-major `n` x `p` matrix into `out` (`n` values).
///
/// # Safety
/// `fit` must be a live handle, `x` hold `n * p` doubles, `out` `n`.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_predict(
    fit: *const PsynormFit,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> PsynormStatus {
    guard(|| {
        let Some(f) = fit.as_ref() else {
            return fail(PsynormStatus::NullPointer, "fit is NULL");
        };
        let Some(len) = n.checked_mul(p) else {
            return fail(PsynormStatus::InvalidArgument, "matrix size overflows");
        };
        let xs = match read_f64s(x, len) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match f.inner.predict(&DMatrix::from_row_slice(n, p, xs)) {
            Ok(pred) => {
                if n > 0 {
                    out_ptr!(out);
                    ptr::copy_nonoverlapping(pred.as_slice().as_ptr(), out, n);
                }
                PsynormStatus::Ok
            }
            Err(e) => numeric(e),
        }
    })
}

/// # Safety
/// `fit` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn psynorm_fit_free(fit: *mut PsynormFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// The zero-shot prompt for `text`; free the result with
/// [`psynorm_string_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psynorm_render_zero_shot(
    kind: PsynormPromptKind,
    text: *const c_char,
    out: *mut *mut c_char,
) -> PsynormStatus {
    guard(|| {
        out_ptr!(out);
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if text.trim().is_empty() {
            return fail(PsynormStatus::InvalidArgument, "prompt text is empty");
        }
        let kind = match kind {
            PsynormPromptKind::WordMem => PromptKind::WordMem,
            PsynormPromptKind::SentMem => PromptKind::SentMem,
            PsynormPromptKind::Rt => PromptKind::Rt,
        };
        let rendered = PromptTemplate::for_kind(kind).render(text);
        match CString::new(rendered) {
            Ok(c) => {
                *out = c.into_raw();
                PsynormStatus::Ok
            }
            Err(_) => fail(PsynormStatus::InvalidArgument, "rendered prompt contains NUL"),
        }
    })
}
