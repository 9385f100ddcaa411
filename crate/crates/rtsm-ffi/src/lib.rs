//! C interface to the rtsm engine.
//!
//! Cases and solve results are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns
//! an [`RtsmStatus`]; the message of the last failure on the calling thread
//! is available from [`rtsm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rtsm::case::{builtin_case, load_case_file, Case};
use rtsm::milp::MilpStatus;
use rtsm::report::{run_solve, Policy, RunRecord, SolveOptions};

/// Opaque case handle.
pub struct RtsmCase {
    case: Case,
}

/// Opaque solve result handle.
pub struct RtsmRun {
    record: RunRecord,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Solve = 4,
    NotOptimal = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtsmPolicy {
    N1Benchmark = 0,
    Severity = 1,
}

/// Expected cost components of a solved strategy (EUR).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RtsmCosts {
    pub preventive: f64,
    pub expected_corrective: f64,
    pub expected_severity: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn guard(f: impl FnOnce() -> RtsmStatus) -> RtsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            RtsmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, RtsmStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(RtsmStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        RtsmStatus::InvalidArgument
    })
}

/// Message of the last failure on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn rtsm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn finish_case(r: Result<Case, rtsm::case::CaseError>, out: *mut *mut RtsmCase) -> RtsmStatus {
    match r {
        Ok(case) => {
            unsafe { *out = Box::into_raw(Box::new(RtsmCase { case })) };
            RtsmStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            RtsmStatus::Parse
        }
    }
}

/// Loads a builtin fixture (`irep-3bus`, `irep-6bus`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rtsm_case_builtin(name: *const c_char, out: *mut *mut RtsmCase) -> RtsmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RtsmStatus::NullPointer;
        }
        let name = match str_arg(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        finish_case(builtin_case(name), out)
    })
}

/// Loads a case file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rtsm_case_load(path: *const c_char, out: *mut *mut RtsmCase) -> RtsmStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RtsmStatus::NullPointer;
        }
        let path = match str_arg(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        finish_case(load_case_file(Path::new(path)), out)
    })
}

/// # Safety
/// `case` must come from `rtsm_case_builtin`/`rtsm_case_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn rtsm_case_free(case: *mut RtsmCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of generators, 0 for a null handle.
///
/// # Safety
/// `case` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rtsm_case_num_generators(case: *const RtsmCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.generators.len())
}

/// Optimizes the case. A NaN `s_max` leaves the severity threshold inactive.
/// Returns `NotOptimal` (with the handle still written) when the search ends
/// without a proven optimum.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rtsm_solve(
    case: *const RtsmCase,
    policy: RtsmPolicy,
    s_max: f64,
    epsilon: f64,
    p_fail: f64,
    out: *mut *mut RtsmRun,
) -> RtsmStatus {
    guard(|| {
        let Some(c) = case.as_ref() else {
            set_error("null case handle");
            return RtsmStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return RtsmStatus::NullPointer;
        }
        if !(0.0..=1.0).contains(&epsilon) || !(0.0..=1.0).contains(&p_fail) || s_max < 0.0 {
            set_error("epsilon and p_fail must lie in [0, 1], s_max must be nonnegative");
            return RtsmStatus::InvalidArgument;
        }
        let opts = SolveOptions {
            policy: match policy {
                RtsmPolicy::N1Benchmark => Policy::N1Benchmark,
                RtsmPolicy::Severity => Policy::Severity,
            },
            s_max: if s_max.is_nan() { None } else { Some(s_max) },
            epsilon,
            p_fail,
            ..SolveOptions::default()
        };
        match run_solve(&c.case, &opts) {
            Ok(record) => {
                let optimal = record.status == MilpStatus::Optimal;
                *out = Box::into_raw(Box::new(RtsmRun { record }));
                if optimal {
                    RtsmStatus::Ok
                } else {
                    set_error("search ended without a proven optimum");
                    RtsmStatus::NotOptimal
                }
            }
            Err(e) => {
                set_error(e.to_string());
                RtsmStatus::Solve
            }
        }
    })
}

/// # Safety
/// `run` must come from `rtsm_solve` or be null.
#[no_mangle]
pub unsafe extern "C" fn rtsm_run_free(run: *mut RtsmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Objective value of the solved model.
///
/// # Safety
/// `run` must be a live handle or null (NaN is returned).
#[no_mangle]
pub unsafe extern "C" fn rtsm_run_objective(run: *const RtsmRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.record.objective)
}

/// Copies the preventive dispatch (MW) into `buf`, which must hold at least
/// one value per generator.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rtsm_run_preventive(run: *const RtsmRun, buf: *mut f64, len: usize) -> RtsmStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            set_error("null run handle");
            return RtsmStatus::NullPointer;
        };
        let Some(s) = &r.record.strategy else {
            set_error("run has no strategy");
            return RtsmStatus::NotOptimal;
        };
        if buf.is_null() {
            set_error("null buffer");
            return RtsmStatus::NullPointer;
        }
        if len < s.preventive.len() {
            set_error(format!("buffer holds {len} values, {} needed", s.preventive.len()));
            return RtsmStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(s.preventive.as_ptr(), buf, s.preventive.len());
        RtsmStatus::Ok
    })
}

/// Cost components of the solved strategy as evaluated by the oracle.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rtsm_run_costs(run: *const RtsmRun, out: *mut RtsmCosts) -> RtsmStatus {
    guard(|| {
        let Some(r) = run.as_ref() else {
            set_error("null run handle");
            return RtsmStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return RtsmStatus::NullPointer;
        }
        let Some(ev) = &r.record.evaluation else {
            set_error("run has no evaluation");
            return RtsmStatus::NotOptimal;
        };
        *out = RtsmCosts {
            preventive: ev.preventive_cost,
            expected_corrective: ev.expected_corrective_cost,
            expected_severity: ev.expected_severity,
        };
        RtsmStatus::Ok
    })
}

/// Severity table as CSV; release with `rtsm_string_free`. Null on failure.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rtsm_run_severity_csv(run: *const RtsmRun) -> *mut c_char {
    let Some(r) = run.as_ref() else {
        set_error("null run handle");
        return ptr::null_mut();
    };
    match &r.record.evaluation {
        Some(ev) => CString::new(ev.to_csv()).map_or(ptr::null_mut(), CString::into_raw),
        None => {
            set_error("run has no evaluation");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rtsm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
