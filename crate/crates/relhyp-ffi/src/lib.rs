//! C ABI over the verification suites: run a suite by name, read back the
//! report JSON and residual CSV, free the handle.
//!
//! Every function is null-safe and returns a status code; handles are
//! opaque. After any non-`Ok` status, [`relhyp_last_error`] carries a
//! message valid until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relhyp::suites::{parse_any_spec, run_suite, suite_report, SuiteConfig};
use relhyp::RelhypError;

/// Result of a call, mirroring the command-line driver's exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelhypStatus {
    Ok = 0,
    /// Unknown suite, malformed spec text, or bad argument.
    ParseError = 1,
    /// The requested build would exceed the vertex cap.
    CapExceeded = 2,
    /// The suite ran but an assertion failed; the report carries the witness.
    AssertionFailed = 3,
    /// Any other failure (I/O, precondition, internal panic).
    RuntimeError = 4,
    NullArgument = 5,
}

/// A finished suite run. Owned by the caller; free with
/// [`relhyp_report_free`].
pub struct RelhypReport {
    json: CString,
    csv: Option<CString>,
    failure: Option<CString>,
    pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &RelhypError) -> RelhypStatus {
    match e {
        RelhypError::Parse(_) | RelhypError::InvalidSpec(_) | RelhypError::InvalidGraph(_) => {
            RelhypStatus::ParseError
        }
        RelhypError::CapExceeded { .. } => RelhypStatus::CapExceeded,
        _ => RelhypStatus::RuntimeError,
    }
}

fn c_string(s: String) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

/// Runs a verification suite.
///
/// `suite` names one of: horoball, axioms, distform, quasitree, embed,
/// covers, hnn. `spec_text` optionally carries a spec file's contents
/// (group or base-graph dialect); pass NULL for the suite's builtin
/// examples. Negative numeric knobs select the suite defaults.
///
/// On `Ok` and on `AssertionFailed`, `*out` receives a report handle.
///
/// # Safety
/// `suite` and non-NULL `spec_text` must point to NUL-terminated strings;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn relhyp_verify(
    suite: *const c_char,
    spec_text: *const c_char,
    radius: i32,
    depth: i32,
    cutoff_l: f64,
    threshold_k: f64,
    seed: i64,
    out: *mut *mut RelhypReport,
) -> RelhypStatus {
    clear_error();
    if suite.is_null() || out.is_null() {
        set_error("suite and out must be non-NULL");
        return RelhypStatus::NullArgument;
    }
    *out = ptr::null_mut();
    let suite = match CStr::from_ptr(suite).to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => {
            set_error("suite name is not valid UTF-8");
            return RelhypStatus::ParseError;
        }
    };
    let text = if spec_text.is_null() {
        None
    } else {
        match CStr::from_ptr(spec_text).to_str() {
            Ok(s) => Some(s.to_owned()),
            Err(_) => {
                set_error("spec text is not valid UTF-8");
                return RelhypStatus::ParseError;
            }
        }
    };

    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let mut cfg = SuiteConfig {
            radius: (radius >= 0).then_some(radius as u32),
            depth: (depth >= 0).then_some(depth as u32),
            cutoff_l: (cutoff_l.is_finite() && cutoff_l > 0.0).then_some(cutoff_l),
            threshold_k: (threshold_k.is_finite() && threshold_k > 0.0).then_some(threshold_k),
            seed: (seed >= 0).then_some(seed as u64),
            ..SuiteConfig::default()
        };
        if let Some(text) = text {
            cfg.input = Some(parse_any_spec(&text)?);
            cfg.input_text = Some(text);
        }
        run_suite(&suite, &cfg)
    }));
    let run = match outcome {
        Ok(Ok(run)) => run,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            return status_of(&e);
        }
        Err(_) => {
            set_error("internal panic during suite run");
            return RelhypStatus::RuntimeError;
        }
    };

    let failure = run.failure.clone();
    let pass = run.pass;
    let (report, table) = suite_report(run);
    let handle = Box::new(RelhypReport {
        json: c_string(report.to_json()),
        csv: table.map(|t| c_string(t.to_csv())),
        failure: failure.map(c_string),
        pass,
    });
    *out = Box::into_raw(handle);
    if pass {
        RelhypStatus::Ok
    } else {
        set_error("suite assertion failed; see the report's failure field");
        RelhypStatus::AssertionFailed
    }
}

/// The report as pretty-printed JSON. Borrowed from the handle.
///
/// # Safety
/// `report` must be a live handle from [`relhyp_verify`].
#[no_mangle]
pub unsafe extern "C" fn relhyp_report_json(report: *const RelhypReport) -> *const c_char {
    match report.as_ref() {
        Some(r) => r.json.as_ptr(),
        None => ptr::null(),
    }
}

/// The residual table as CSV, or NULL when the suite writes none.
///
/// # Safety
/// `report` must be a live handle from [`relhyp_verify`].
#[no_mangle]
pub unsafe extern "C" fn relhyp_report_csv(report: *const RelhypReport) -> *const c_char {
    match report.as_ref() {
        Some(r) => r.csv.as_ref().map_or(ptr::null(), |c| c.as_ptr()),
        None => ptr::null(),
    }
}

/// Whether every suite assertion held.
///
/// # Safety
/// `report` must be a live handle from [`relhyp_verify`].
#[no_mangle]
pub unsafe extern "C" fn relhyp_report_pass(report: *const RelhypReport) -> bool {
    report.as_ref().map_or(false, |r| r.pass)
}

/// The first failing assertion with its witness, or NULL when all held.
///
/// # Safety
/// `report` must be a live handle from [`relhyp_verify`].
#[no_mangle]
pub unsafe extern "C" fn relhyp_report_failure(report: *const RelhypReport) -> *const c_char {
    match report.as_ref() {
        Some(r) => r.failure.as_ref().map_or(ptr::null(), |f| f.as_ptr()),
        None => ptr::null(),
    }
}

/// Frees a report handle. NULL is a no-op.
///
/// # Safety
/// `report` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn relhyp_report_free(report: *mut RelhypReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Message for the most recent non-Ok status on this thread, or NULL.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn relhyp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Report format version, matching the `format_version` field.
#[no_mangle]
pub extern "C" fn relhyp_format_version() -> *const c_char {
    static VERSION: &[u8] = b"1.0\0";
    VERSION.as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn verify(suite: &CStr, spec: Option<&CStr>) -> (RelhypStatus, *mut RelhypReport) {
        let mut out: *mut RelhypReport = ptr::null_mut();
        let status = relhyp_verify(
            suite.as_ptr(),
            spec.map_or(ptr::null(), CStr::as_ptr),
            -1,
            -1,
            -1.0,
            -1.0,
            -1,
            &mut out,
        );
        (status, out)
    }

    #[test]
    fn version_matches_report_format() {
        let v = unsafe { CStr::from_ptr(relhyp_format_version()) };
        assert_eq!(v.to_str().unwrap(), FORMAT_VERSION);
    }

    #[test]
    fn passing_suite_round_trips() {
        let suite = cstr("horoball");
        let spec = cstr("graph = path 8\n");
        let (status, report) = unsafe { verify(&suite, Some(&spec)) };
        assert_eq!(status, RelhypStatus::Ok);
        unsafe {
            assert!(relhyp_report_pass(report));
            assert!(relhyp_report_failure(report).is_null());
            let json = CStr::from_ptr(relhyp_report_json(report)).to_str().unwrap();
            assert!(json.contains("\"format_version\": \"1.0\""), "{json}");
            assert!(json.contains("max_error"));
            let csv = CStr::from_ptr(relhyp_report_csv(report)).to_str().unwrap();
            assert!(csv.starts_with("graph,depth,pairs,max_error"));
            relhyp_report_free(report);
        }
    }

    #[test]
    fn failing_suite_reports_witness() {
        let suite = cstr("quasitree");
        let spec = cstr("graph = cycle 24\n");
        let (status, report) = unsafe { verify(&suite, Some(&spec)) };
        assert_eq!(status, RelhypStatus::AssertionFailed);
        unsafe {
            assert!(!relhyp_report_pass(report));
            let failure = CStr::from_ptr(relhyp_report_failure(report)).to_str().unwrap();
            assert!(failure.contains("delta"), "{failure}");
            let json = CStr::from_ptr(relhyp_report_json(report)).to_str().unwrap();
            assert!(json.contains("\"witness\""));
            relhyp_report_free(report);
        }
    }

    #[test]
    fn bad_inputs_set_statuses_and_messages() {
        let (status, report) = unsafe { verify(&cstr("nonsense"), None) };
        assert_eq!(status, RelhypStatus::ParseError);
        assert!(report.is_null());
        let msg = unsafe { CStr::from_ptr(relhyp_last_error()).to_str().unwrap() };
        assert!(msg.contains("unknown suite"), "{msg}");

        let bad = cstr("factors = Q3\nperipheral_mode = all\n");
        let (status, _) = unsafe { verify(&cstr("axioms"), Some(&bad)) };
        assert_eq!(status, RelhypStatus::ParseError);

        let status = unsafe {
            relhyp_verify(
                ptr::null(),
                ptr::null(),
                -1,
                -1,
                -1.0,
                -1.0,
                -1,
                ptr::null_mut(),
            )
        };
        assert_eq!(status, RelhypStatus::NullArgument);
    }

    #[test]
    fn cap_maps_to_its_own_status() {
        // quasitree group mode at radius 40 predicts far past the cap
        let suite = cstr("quasitree");
        let spec = cstr("factors = Z2, Z2\nperipheral_mode = all\n");
        let mut out: *mut RelhypReport = ptr::null_mut();
        let status = unsafe {
            relhyp_verify(
                suite.as_ptr(),
                spec.as_ptr(),
                40,
                -1,
                -1.0,
                -1.0,
                -1,
                &mut out,
            )
        };
        assert_eq!(status, RelhypStatus::CapExceeded);
        assert!(out.is_null());
    }
}
