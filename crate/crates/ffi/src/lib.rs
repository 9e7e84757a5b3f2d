//! C ABI over `toffoli-distill`.
//!
//! Every fallible call returns a [`TdStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`td_last_error_message`]. Schedules are handed out as opaque
//! [`TdSchedule`] pointers and must be released with [`td_schedule_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};

use toffoli_distill::concat::{
    block_failure, progressive_schedule, CodeParams, LogEps, ScheduleOptions,
};
use toffoli_distill::distill::{
    expected_ops_closed, fidelity_after, measurement_majority_repeats, success_probability,
    RhoAlpha,
};
use toffoli_distill::error_models::{alpha3_decoherent, max_block_size, ErrorModel, PauliChannel};
use toffoli_distill::gadgets::{derive_correction_table, test_inputs, verify_gadget};
use toffoli_distill::noisy_meas::{estimate_alpha3, verify_eq5, DEFAULT_RAW_RETRIES};
use toffoli_distill::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    AboveThreshold = 3,
    Unreachable = 4,
    CapExceeded = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> TdStatus {
    match err {
        Error::AboveThreshold { .. } => TdStatus::AboveThreshold,
        Error::Unreachable(_) => TdStatus::Unreachable,
        Error::CapExceeded { .. } => TdStatus::CapExceeded,
        _ => TdStatus::InvalidArgument,
    }
}

/// Runs `f`, mapping errors and panics to a status.
fn guard<F>(f: F) -> TdStatus
where
    F: FnOnce() -> Result<(), Error> + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(Ok(())) => {
            set_error("");
            TdStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside toffoli-distill");
            TdStatus::Internal
        }
    }
}

macro_rules! out {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return TdStatus::NullPointer;
        })+
    };
}

/// Message for the last failing call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn td_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `alpha3 = (1 - P) / (1 + P)` with `P = (1 - 2p)^n`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_alpha3_decoherent(n: usize, p: f64, out: *mut f64) -> TdStatus {
    out!(out);
    guard(move || {
        let ch = PauliChannel::uniform(n, p)?;
        unsafe { *out = alpha3_decoherent(&ch).exact };
        Ok(())
    })
}

/// `3 / (3 + alpha3^(2^levels))`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_fidelity_after(alpha3: f64, levels: u32, out: *mut f64) -> TdStatus {
    out!(out);
    *out = fidelity_after(alpha3, levels);
    TdStatus::Ok
}

/// Combine success probability for two diagonal inputs.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_success_probability(
    alpha3_left: f64,
    alpha3_right: f64,
    out: *mut f64,
) -> TdStatus {
    out!(out);
    *out = success_probability(
        &RhoAlpha::diagonal(alpha3_left),
        &RhoAlpha::diagonal(alpha3_right),
    );
    TdStatus::Ok
}

/// Expected operations `G(levels)` for constant success probability `p`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_expected_ops(
    levels: u32,
    p: f64,
    ratio: f64,
    out: *mut f64,
) -> TdStatus {
    out!(out);
    if !(p > 0.0 && p <= 1.0) {
        set_error("p must be in (0, 1]");
        return TdStatus::InvalidArgument;
    }
    *out = expected_ops_closed(levels, p, ratio);
    TdStatus::Ok
}

/// # Safety
/// `out` must be valid for a write of one `uint64_t`.
#[no_mangle]
pub unsafe extern "C" fn td_majority_repeats(eps: f64, eps_m: f64, out: *mut u64) -> TdStatus {
    out!(out);
    guard(move || {
        let r = measurement_majority_repeats(eps, eps_m)?;
        unsafe { *out = r };
        Ok(())
    })
}

/// `(1/p) ln(1/p)`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_max_block_size(p: f64, out: *mut f64) -> TdStatus {
    out!(out);
    guard(move || {
        let n = max_block_size(p)?;
        unsafe { *out = n };
        Ok(())
    })
}

/// `log10 eps_out` for one level of block size `n`.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_block_failure(
    log10_eps_in: f64,
    n: f64,
    p_c: f64,
    k: f64,
    beta: f64,
    out: *mut f64,
) -> TdStatus {
    out!(out);
    guard(move || {
        let e = block_failure(LogEps::new(log10_eps_in)?, n, &CodeParams { p_c, k, beta })?;
        unsafe { *out = e.value() };
        Ok(())
    })
}

/// Exhaustive eigenstring check of the bitwise measurement circuit.
///
/// # Safety
/// `passed` and `total` must be valid for a write of one `size_t` each.
#[no_mangle]
pub unsafe extern "C" fn td_verify_eq5(
    n: usize,
    passed: *mut usize,
    total: *mut usize,
) -> TdStatus {
    out!(passed, total);
    guard(move || {
        let r = verify_eq5(n)?;
        unsafe {
            *passed = r.passed;
            *total = r.strings;
        }
        Ok(())
    })
}

/// Smallest fidelity with the direct Toffoli over all 8 branches, the 8
/// basis inputs and `random_inputs` seeded random inputs.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn td_gadget_min_fidelity(
    random_inputs: usize,
    seed: u64,
    out: *mut f64,
) -> TdStatus {
    out!(out);
    guard(move || {
        let table = derive_correction_table()?;
        let v = verify_gadget(&table, &test_inputs(random_inputs, seed), 0.0)?;
        unsafe { *out = v.min_fidelity };
        Ok(())
    })
}

/// Monte Carlo `alpha3` from `trials` raw preparations with a uniform
/// bit-flip channel on an `n`-qubit cat.
///
/// # Safety
/// `estimate` and `stderr` must be valid for a write of one `double` each.
#[no_mangle]
pub unsafe extern "C" fn td_estimate_alpha3(
    n: usize,
    p: f64,
    trials: u64,
    seed: u64,
    estimate: *mut f64,
    stderr: *mut f64,
) -> TdStatus {
    out!(estimate, stderr);
    guard(move || {
        let model = ErrorModel::Decoherent(PauliChannel::uniform(n, p)?);
        let (est, _) = estimate_alpha3(&model, trials, seed, DEFAULT_RAW_RETRIES)?;
        unsafe {
            *estimate = est.estimate;
            *stderr = est.stderr;
        }
        Ok(())
    })
}

/// Opaque progressive schedule.
pub struct TdSchedule {
    levels: Vec<TdLevel>,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TdLevel {
    pub log10_n: f64,
    pub log10_eps: f64,
    pub log10_eps_star: f64,
}

/// Builds a progressive schedule. With `pin_reference_sizes` the first two
/// block sizes are fixed at 1000 and 2e7; otherwise every level uses the
/// block-size bound. `p_c`, `k`, `beta` of zero select the defaults.
///
/// # Safety
/// `out` must be valid for a write of one pointer. The returned handle must
/// be released with `td_schedule_free`.
#[no_mangle]
pub unsafe extern "C" fn td_schedule_new(
    log10_target: f64,
    log10_eps0_star: f64,
    p_c: f64,
    k: f64,
    beta: f64,
    pin_reference_sizes: bool,
    out: *mut *mut TdSchedule,
) -> TdStatus {
    out!(out);
    *out = std::ptr::null_mut();
    guard(move || {
        let d = CodeParams::reference();
        let or = |x: f64, y: f64| if x == 0.0 { y } else { x };
        let params = CodeParams {
            p_c: or(p_c, d.p_c),
            k: or(k, d.k),
            beta: or(beta, d.beta),
        };
        let opts = if pin_reference_sizes {
            ScheduleOptions::reference()
        } else {
            ScheduleOptions::default()
        };
        let s = progressive_schedule(
            LogEps::new(log10_target)?,
            &params,
            LogEps::new(log10_eps0_star)?,
            &opts,
        )?;
        let levels = s
            .levels
            .iter()
            .map(|l| TdLevel {
                log10_n: l.log10_n,
                log10_eps: l.eps.value(),
                log10_eps_star: l.eps_star.value(),
            })
            .collect();
        let h = Box::into_raw(Box::new(TdSchedule { levels }));
        unsafe { *out = h };
        Ok(())
    })
}

/// Number of levels, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle from `td_schedule_new`.
#[no_mangle]
pub unsafe extern "C" fn td_schedule_len(h: *const TdSchedule) -> usize {
    h.as_ref().map_or(0, |s| s.levels.len())
}

/// Level `index` (0-based) of the schedule.
///
/// # Safety
/// `h` must be a live handle; `out` must be valid for one `TdLevel` write.
#[no_mangle]
pub unsafe extern "C" fn td_schedule_level(
    h: *const TdSchedule,
    index: usize,
    out: *mut TdLevel,
) -> TdStatus {
    out!(h, out);
    let s = &*h;
    match s.levels.get(index) {
        Some(l) => {
            *out = *l;
            TdStatus::Ok
        }
        None => {
            set_error(&format!("level {index} out of range"));
            TdStatus::InvalidArgument
        }
    }
}

/// # Safety
/// `h` must be null or a handle from `td_schedule_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn td_schedule_free(h: *mut TdSchedule) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
