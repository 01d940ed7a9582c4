//! C ABI for the xor-smc solver.
//!
//! Instances and decisions are opaque handles created and destroyed
//! through this interface; every fallible call returns an `XsmcStatus`
//! and the last failure's message is kept per thread for
//! `xsmc_last_error`. All strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use xor_smc::oracle::OracleConfig;
use xor_smc::smc::{Decision, SmcInstance, SolveParams};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XsmcStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was NULL or text was not valid UTF-8.
    BadArgument = 1,
    /// Instance text failed to parse or validate.
    ParseError = 2,
    /// The solver failed (oracle error, bad parameters, ...).
    SolveError = 3,
}

/// Opaque parsed problem instance.
pub struct XsmcInstance {
    instance: SmcInstance,
    params: SolveParams,
}

/// Opaque solver outcome.
pub struct XsmcDecision {
    decision: Decision,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap());
}

/// Message from the most recent failure on this thread. The pointer is
/// owned by the library and valid until the next failing call.
#[no_mangle]
pub extern "C" fn xsmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Parse an instance from JSON text. `base_dir` anchors relative file
/// references inside the JSON and may be NULL for the current directory.
/// On success writes a handle to `out`; free it with `xsmc_instance_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string, `base_dir` NULL or likewise,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsmc_instance_parse(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut XsmcInstance,
) -> XsmcStatus {
    if out.is_null() {
        set_error("out pointer is NULL");
        return XsmcStatus::BadArgument;
    }
    *out = ptr::null_mut();
    let Some(text) = read_str(json) else {
        set_error("json is NULL or not UTF-8");
        return XsmcStatus::BadArgument;
    };
    let base = match read_str(base_dir) {
        Some(dir) => Path::new(dir),
        None if base_dir.is_null() => Path::new("."),
        None => {
            set_error("base_dir is not UTF-8");
            return XsmcStatus::BadArgument;
        }
    };
    match xor_smc::instance::parse_instance(text, base) {
        Ok((instance, params)) => {
            *out = Box::into_raw(Box::new(XsmcInstance { instance, params }));
            XsmcStatus::Ok
        }
        Err(e) => {
            set_error(e);
            XsmcStatus::ParseError
        }
    }
}

/// Number of decision variables (x) in the instance.
///
/// # Safety
/// `inst` must be a live handle from `xsmc_instance_parse`.
#[no_mangle]
pub unsafe extern "C" fn xsmc_instance_num_x(inst: *const XsmcInstance) -> u32 {
    inst.as_ref().map_or(0, |h| h.instance.n)
}

/// Number of counting terms (b) in the instance.
///
/// # Safety
/// `inst` must be a live handle from `xsmc_instance_parse`.
#[no_mangle]
pub unsafe extern "C" fn xsmc_instance_num_terms(inst: *const XsmcInstance) -> u32 {
    inst.as_ref().map_or(0, |h| h.instance.k())
}

/// Override the failure-probability bound and seed from the instance file.
///
/// # Safety
/// `inst` must be a live handle from `xsmc_instance_parse`.
#[no_mangle]
pub unsafe extern "C" fn xsmc_instance_set_params(
    inst: *mut XsmcInstance,
    eta: f64,
    c: u32,
    seed: u64,
) -> XsmcStatus {
    let Some(h) = inst.as_mut() else {
        set_error("instance handle is NULL");
        return XsmcStatus::BadArgument;
    };
    h.params.eta = eta;
    h.params.c = c;
    h.params.seed = seed;
    XsmcStatus::Ok
}

/// Free an instance handle. NULL is ignored.
///
/// # Safety
/// `inst` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn xsmc_instance_free(inst: *mut XsmcInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Solve with the embedded SAT oracle. On success writes a decision
/// handle to `out`; free it with `xsmc_decision_free`.
///
/// # Safety
/// `inst` must be a live instance handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn xsmc_solve(
    inst: *const XsmcInstance,
    out: *mut *mut XsmcDecision,
) -> XsmcStatus {
    if out.is_null() {
        set_error("out pointer is NULL");
        return XsmcStatus::BadArgument;
    }
    *out = ptr::null_mut();
    let Some(h) = inst.as_ref() else {
        set_error("instance handle is NULL");
        return XsmcStatus::BadArgument;
    };
    match xor_smc::smc::xor_smc(&h.instance, &h.params, &OracleConfig::embedded()) {
        Ok(decision) => {
            *out = Box::into_raw(Box::new(XsmcDecision { decision }));
            XsmcStatus::Ok
        }
        Err(e) => {
            set_error(e);
            XsmcStatus::SolveError
        }
    }
}

/// 1 if the instance was decided TRUE, 0 otherwise.
///
/// # Safety
/// `dec` must be a live handle from `xsmc_solve`.
#[no_mangle]
pub unsafe extern "C" fn xsmc_decision_answer(dec: *const XsmcDecision) -> i32 {
    dec.as_ref().map_or(0, |h| h.decision.answer as i32)
}

/// Number of hashed repetitions the solve used.
///
/// # Safety
/// `dec` must be a live handle from `xsmc_solve`.
#[no_mangle]
pub unsafe extern "C" fn xsmc_decision_repetitions(dec: *const XsmcDecision) -> u32 {
    dec.as_ref().map_or(0, |h| h.decision.diagnostics.t_used)
}

/// Copy the witness into caller buffers: `x` gets 0/1 bytes for the
/// decision variables, `b` for the term activations. Either pointer may
/// be NULL to skip it; lengths must match the instance. Fails if the
/// decision was FALSE (no witness).
///
/// # Safety
/// `dec` must be a live handle; `x`/`b`, when non-NULL, must point to
/// buffers of at least `x_len` / `b_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn xsmc_decision_witness(
    dec: *const XsmcDecision,
    x: *mut u8,
    x_len: usize,
    b: *mut u8,
    b_len: usize,
) -> XsmcStatus {
    let Some(h) = dec.as_ref() else {
        set_error("decision handle is NULL");
        return XsmcStatus::BadArgument;
    };
    let Some((wx, wb)) = &h.decision.witness else {
        set_error("decision is FALSE: no witness");
        return XsmcStatus::BadArgument;
    };
    if !x.is_null() {
        if x_len != wx.len() {
            set_error(format!("x buffer holds {x_len} slots, witness has {}", wx.len()));
            return XsmcStatus::BadArgument;
        }
        for (i, &v) in wx.iter().enumerate() {
            *x.add(i) = v as u8;
        }
    }
    if !b.is_null() {
        if b_len != wb.len() {
            set_error(format!("b buffer holds {b_len} slots, witness has {}", wb.len()));
            return XsmcStatus::BadArgument;
        }
        for (i, &v) in wb.iter().enumerate() {
            *b.add(i) = v as u8;
        }
    }
    XsmcStatus::Ok
}

/// Free a decision handle. NULL is ignored.
///
/// # Safety
/// `dec` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn xsmc_decision_free(dec: *mut XsmcDecision) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}
