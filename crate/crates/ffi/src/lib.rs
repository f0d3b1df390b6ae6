//! C ABI over the alignment engine.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free`. Fallible calls return an [`SaStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`sa_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stalign::checker::{align, check_bool, AlignConfig, Mode};
use stalign::fact_db::FactDatabase;
use stalign::oracle::{exact_align, OracleError};
use stalign::spec_lang::{parse_spec, Specification};

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Eval = 4,
    OracleCap = 5,
    InvalidArgument = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Temporal semantics selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaMode {
    Suffix = 0,
    Interval = 1,
}

fn mode_arg(m: i32) -> Result<Mode, SaStatus> {
    match m {
        x if x == SaMode::Suffix as i32 => Ok(Mode::Suffix),
        x if x == SaMode::Interval as i32 => Ok(Mode::Interval),
        _ => Err(fail(SaStatus::InvalidArgument, format!("unknown mode {m}"))),
    }
}

pub struct SaDb(FactDatabase);

pub struct SaSpec(Specification);

pub struct SaAlignment {
    score: f64,
    grad: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SaStatus, msg: impl Into<String>) -> SaStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SaStatus) -> SaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SaStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SaStatus> {
    if p.is_null() {
        return Err(fail(SaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(SaStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, SaStatus> {
    p.as_ref().ok_or_else(|| fail(SaStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), SaStatus> {
    if p.is_null() {
        Err(fail(SaStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a fact database from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sa_db_from_json(json: *const c_char, out: *mut *mut SaDb) -> SaStatus {
    guard(|| {
        tri!(out_arg(out, "out"));
        let text = tri!(str_arg(json, "json"));
        match FactDatabase::from_json(text) {
            Ok(db) => {
                *out = Box::into_raw(Box::new(SaDb(db)));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `db` must come from [`sa_db_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sa_db_free(db: *mut SaDb) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Number of facts, or 0 for a null handle.
///
/// # Safety
/// `db` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sa_db_num_facts(db: *const SaDb) -> usize {
    db.as_ref().map_or(0, |d| d.0.len())
}

/// Parses a specification against the schema of `db`.
///
/// # Safety
/// `text` must be NUL-terminated, `db` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_spec_parse(
    text: *const c_char,
    db: *const SaDb,
    out: *mut *mut SaSpec,
) -> SaStatus {
    guard(|| {
        tri!(out_arg(out, "out"));
        let text = tri!(str_arg(text, "text"));
        let db = tri!(ref_arg(db, "db"));
        match parse_spec(text, db.0.schema()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(SaSpec(s)));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `spec` must come from [`sa_spec_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sa_spec_free(spec: *mut SaSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Alignment score and gradient. `k = 0` keeps every proof; `mode` is an
/// [`SaMode`] value.
///
/// # Safety
/// `db` and `spec` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_align(
    db: *const SaDb,
    spec: *const SaSpec,
    k: usize,
    mode: i32,
    out: *mut *mut SaAlignment,
) -> SaStatus {
    guard(|| {
        tri!(out_arg(out, "out"));
        let db = tri!(ref_arg(db, "db"));
        let spec = tri!(ref_arg(spec, "spec"));
        let mode = tri!(mode_arg(mode));
        let cfg = AlignConfig::default().with_k(if k == 0 { None } else { Some(k) }).with_mode(mode);
        match align(&db.0, &spec.0, &AlignConfig { witness_scores: false, ..cfg }) {
            Ok(r) => {
                let mut grad = vec![0.0; db.0.len()];
                for (f, g) in r.grad {
                    grad[f] = g;
                }
                *out = Box::into_raw(Box::new(SaAlignment { score: r.score, grad }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::Eval, e.to_string()),
        }
    })
}

/// Score of an alignment, or NaN for a null handle.
///
/// # Safety
/// `a` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sa_alignment_score(a: *const SaAlignment) -> f64 {
    a.as_ref().map_or(f64::NAN, |a| a.score)
}

/// Copies `d score / d p_f` for every fact id into `buf`, which must hold
/// at least [`sa_db_num_facts`] values.
///
/// # Safety
/// `a` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn sa_alignment_grad(a: *const SaAlignment, buf: *mut f64, len: usize) -> SaStatus {
    guard(|| {
        let a = tri!(ref_arg(a, "alignment"));
        tri!(out_arg(buf, "buf"));
        if len < a.grad.len() {
            return fail(
                SaStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", a.grad.len()),
            );
        }
        ptr::copy_nonoverlapping(a.grad.as_ptr(), buf, a.grad.len());
        SaStatus::Ok
    })
}

/// # Safety
/// `a` must come from [`sa_align`] or be null.
#[no_mangle]
pub unsafe extern "C" fn sa_alignment_free(a: *mut SaAlignment) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Exact score by enumerating possible worlds (small databases only).
///
/// # Safety
/// `db` and `spec` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_oracle_exact(
    db: *const SaDb,
    spec: *const SaSpec,
    mode: i32,
    out: *mut f64,
) -> SaStatus {
    guard(|| {
        tri!(out_arg(out, "out"));
        let db = tri!(ref_arg(db, "db"));
        let spec = tri!(ref_arg(spec, "spec"));
        let mode = tri!(mode_arg(mode));
        match exact_align(&db.0, &spec.0, mode) {
            Ok(s) => {
                *out = s;
                SaStatus::Ok
            }
            Err(e @ OracleError::TooManyFacts { .. }) => fail(SaStatus::OracleCap, e.to_string()),
            Err(e) => fail(SaStatus::Eval, e.to_string()),
        }
    })
}

/// Boolean satisfaction of a deterministic database (every probability
/// 0 or 1).
///
/// # Safety
/// `db` and `spec` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sa_check_bool(
    db: *const SaDb,
    spec: *const SaSpec,
    mode: i32,
    out: *mut bool,
) -> SaStatus {
    guard(|| {
        tri!(out_arg(out, "out"));
        let db = tri!(ref_arg(db, "db"));
        let spec = tri!(ref_arg(spec, "spec"));
        let mode = tri!(mode_arg(mode));
        match check_bool(&db.0, &spec.0, mode) {
            Ok(b) => {
                *out = b;
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::Eval, e.to_string()),
        }
    })
}
