//! C ABI over the `leftrs` crate.
//!
//! Systems and analysis results are opaque handles owned by the caller and
//! released with their `_free` function. Strings returned through `char**`
//! out-parameters are owned by the caller and released with
//! `leftrs_string_free`. Every fallible call returns a `LeftrsStatus`; on
//! failure `leftrs_last_error` describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use leftrs::analysis::{analyze, AnalysisResult, OverheadModel, Protocol};
use leftrs::model::SystemSpec;
use leftrs::sim::{simulate_with, FaultSchedule, ReleasePattern, SimOptions};
use leftrs::taskgen::{generate, GenConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeftrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeftrsProtocol {
    LeftRs = 0,
    MsrpFt = 1,
    MsrpFtOf = 2,
    Checkpointing = 3,
}

impl From<LeftrsProtocol> for Protocol {
    fn from(p: LeftrsProtocol) -> Self {
        match p {
            LeftrsProtocol::LeftRs => Protocol::LeftRs,
            LeftrsProtocol::MsrpFt => Protocol::MsrpFt,
            LeftrsProtocol::MsrpFtOf => Protocol::MsrpFtOf,
            LeftrsProtocol::Checkpointing => Protocol::Checkpointing,
        }
    }
}

/// Opaque task system.
pub struct LeftrsSystem(SystemSpec);

/// Opaque analysis result.
pub struct LeftrsAnalysis(AnalysisResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(LeftrsStatus, String);

fn fail<T>(status: LeftrsStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

fn invalid(e: impl std::fmt::Display) -> Fail {
    Fail(LeftrsStatus::InvalidInput, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LeftrsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LeftrsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LeftrsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return fail(LeftrsStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(LeftrsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(LeftrsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return fail(LeftrsStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(invalid)?;
    put(out, c.into_raw())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn leftrs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn leftrs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a system from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_system_from_json(
    json: *const c_char,
    out: *mut *mut LeftrsSystem,
) -> LeftrsStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let sys = SystemSpec::from_json(text).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(LeftrsSystem(sys))))
    })
}

/// Generates a system. `config_json` may be null for the defaults; `seed`
/// overrides the configuration's seed.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_system_generate(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut LeftrsSystem,
) -> LeftrsStatus {
    guard(|| {
        let mut cfg = if config_json.is_null() {
            GenConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(invalid)?
        };
        cfg.seed = seed;
        let sys = generate(&cfg).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(LeftrsSystem(sys))))
    })
}

/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_system_to_json(
    system: *const LeftrsSystem,
    out: *mut *mut c_char,
) -> LeftrsStatus {
    guard(|| {
        let sys = ref_arg(system, "system")?;
        put_string(out, sys.0.to_json())
    })
}

/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_system_task_count(
    system: *const LeftrsSystem,
    out: *mut usize,
) -> LeftrsStatus {
    guard(|| put(out, ref_arg(system, "system")?.0.tasks.len()))
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn leftrs_system_free(system: *mut LeftrsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Analysis with the measured overheads (1, 6 and 1 microseconds).
///
/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analyze(
    system: *const LeftrsSystem,
    protocol: LeftrsProtocol,
    out: *mut *mut LeftrsAnalysis,
) -> LeftrsStatus {
    let m = OverheadModel::MEASURED;
    leftrs_analyze_with_overheads(system, protocol, m.o_wrap, m.o_replica, m.o_self_wrap, out)
}

/// # Safety
/// `system` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analyze_with_overheads(
    system: *const LeftrsSystem,
    protocol: LeftrsProtocol,
    o_wrap: u64,
    o_replica: u64,
    o_self_wrap: u64,
    out: *mut *mut LeftrsAnalysis,
) -> LeftrsStatus {
    guard(|| {
        let sys = ref_arg(system, "system")?;
        let model = OverheadModel {
            o_wrap,
            o_replica,
            o_self_wrap,
        };
        let res = analyze(&sys.0, protocol.into(), &model).map_err(invalid)?;
        put(out, Box::into_raw(Box::new(LeftrsAnalysis(res))))
    })
}

/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analysis_schedulable(
    analysis: *const LeftrsAnalysis,
    out: *mut bool,
) -> LeftrsStatus {
    guard(|| put(out, ref_arg(analysis, "analysis")?.0.schedulable))
}

/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analysis_task_count(
    analysis: *const LeftrsAnalysis,
    out: *mut usize,
) -> LeftrsStatus {
    guard(|| put(out, ref_arg(analysis, "analysis")?.0.tasks.len()))
}

/// Response-time bound of the task at position `index` (system order).
///
/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analysis_response_time(
    analysis: *const LeftrsAnalysis,
    index: usize,
    out: *mut u64,
) -> LeftrsStatus {
    guard(|| {
        let a = ref_arg(analysis, "analysis")?;
        match a.0.tasks.get(index) {
            Some(t) => put(out, t.r),
            None => fail(
                LeftrsStatus::OutOfRange,
                format!("task index {index} out of range ({} tasks)", a.0.tasks.len()),
            ),
        }
    })
}

/// # Safety
/// `analysis` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analysis_to_json(
    analysis: *const LeftrsAnalysis,
    out: *mut *mut c_char,
) -> LeftrsStatus {
    guard(|| {
        let a = ref_arg(analysis, "analysis")?;
        put_string(out, serde_json::to_string(&a.0).map_err(invalid)?)
    })
}

/// # Safety
/// `analysis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn leftrs_analysis_free(analysis: *mut LeftrsAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Simulates and returns the run summary as JSON. `pattern` is
/// `periodic` or `sporadic:<seed>`; `faults` is null or `none` for a
/// fault-free run, `seed:<n>` for randomized faults, or the text of a
/// fault file. A `horizon_us` of 0 means the largest deadline.
///
/// # Safety
/// `system` must be a live handle, string arguments NUL-terminated or null
/// where allowed, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn leftrs_simulate_summary(
    system: *const LeftrsSystem,
    protocol: LeftrsProtocol,
    pattern: *const c_char,
    faults: *const c_char,
    horizon_us: u64,
    out: *mut *mut c_char,
) -> LeftrsStatus {
    guard(|| {
        let sys = &ref_arg(system, "system")?.0;
        let pattern: ReleasePattern = str_arg(pattern, "pattern")?.parse().map_err(invalid)?;
        let faults = if faults.is_null() {
            FaultSchedule::None
        } else {
            let text = str_arg(faults, "faults")?.trim();
            match (text, text.strip_prefix("seed:")) {
                ("none", _) | ("", _) => FaultSchedule::None,
                (_, Some(n)) => FaultSchedule::Randomized {
                    seed: n.parse().map_err(|e| invalid(format!("fault seed `{n}`: {e}")))?,
                },
                (t, None) => FaultSchedule::parse_scripted(t).map_err(invalid)?,
            }
        };
        let horizon = if horizon_us == 0 {
            sys.tasks.iter().map(|t| t.d).max().unwrap_or(1)
        } else {
            horizon_us
        };
        let mut opts = SimOptions::new(protocol.into(), pattern, faults, horizon);
        opts.record_events = false;
        let trace = simulate_with(sys, &opts).map_err(invalid)?;
        put_string(out, serde_json::to_string(&trace.summary()).map_err(invalid)?)
    })
}
