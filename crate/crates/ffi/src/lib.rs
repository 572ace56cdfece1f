//! C ABI surface over the mechanism simulator.
//!
//! Structures are opaque handles created from the scenario JSON schema
//! (or the built-in XOR constructor) and freed explicitly. Fallible calls
//! return an [`LmmStatus`] code and leave a human-readable message
//! retrievable with `lmm_last_error_message`. Complex results come back
//! as owned JSON strings that must be released with `lmm_string_free`.
//!
//! The generated header lands in `include/lmm.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use lmm_core::error::Error;
use lmm_core::info::{InformationStructure, ReportProfile, ScenarioJson};
use lmm_core::mechanism::{self, EvalMode, PaymentRule};
use lmm_core::oracle::{self, Oracle, OracleSpec};
use lmm_core::verifier::{self, VerifyOptions};
use lmm_core::{rng, scenarios};
use serde::Deserialize;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidStructure = 3,
    ImpossibleProfile = 4,
    BudgetExceeded = 5,
    BackendError = 6,
    ConditionFailed = 7,
    InternalError = 8,
}

/// Opaque information structure handle.
pub struct LmmStructure {
    inner: InformationStructure,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> LmmStatus {
    match err {
        Error::InvalidStructure(_) => LmmStatus::InvalidStructure,
        Error::ImpossibleProfile => LmmStatus::ImpossibleProfile,
        Error::BudgetExceeded { .. } => LmmStatus::BudgetExceeded,
        Error::Backend { .. } | Error::MalformedVerdict(_) => LmmStatus::BackendError,
        Error::Io(_) | Error::Json(_) => LmmStatus::InternalError,
        _ => LmmStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> LmmStatus {
    set_last_error(&err.to_string());
    status_for(err)
}

/// Message for the most recent error on this thread. Valid until the next
/// failing call; never null.
#[no_mangle]
pub extern "C" fn lmm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, LmmStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(LmmStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        LmmStatus::InvalidArgument
    })
}

unsafe fn structure_ref<'a>(handle: *const LmmStructure) -> Result<&'a InformationStructure, LmmStatus> {
    if handle.is_null() {
        set_last_error("null structure handle");
        return Err(LmmStatus::NullPointer);
    }
    Ok(&(*handle).inner)
}

fn boxed(structure: InformationStructure, out: *mut *mut LmmStructure) -> LmmStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return LmmStatus::NullPointer;
    }
    unsafe {
        *out = Box::into_raw(Box::new(LmmStructure { inner: structure }));
    }
    LmmStatus::Ok
}

/// Parse a structure from the scenario JSON schema.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lmm_structure_from_json(
    json: *const c_char,
    out: *mut *mut LmmStructure,
) -> LmmStatus {
    let text = match read_str(json) {
        Ok(text) => text,
        Err(status) => return status,
    };
    let scenario: ScenarioJson = match serde_json::from_str(text) {
        Ok(s) => s,
        Err(e) => {
            set_last_error(&format!("scenario JSON: {e}"));
            return LmmStatus::InvalidArgument;
        }
    };
    match scenario.into_structure() {
        Ok(structure) => boxed(structure, out),
        Err(e) => fail(&e),
    }
}

/// Build the XOR scenario with accuracy `p` and `k` signals per variable.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lmm_structure_xor(
    p: f64,
    k: u32,
    out: *mut *mut LmmStructure,
) -> LmmStatus {
    match scenarios::build_xor(p, k as usize) {
        Ok(structure) => boxed(structure, out),
        Err(e) => fail(&e),
    }
}

/// Release a structure handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lmm_structure_free(handle: *mut LmmStructure) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lmm_structure_world_count(handle: *const LmmStructure) -> u32 {
    structure_ref(handle).map(|s| s.world_count() as u32).unwrap_or(0)
}

#[no_mangle]
pub unsafe extern "C" fn lmm_structure_agent_count(handle: *const LmmStructure) -> u32 {
    structure_ref(handle).map(|s| s.agent_count() as u32).unwrap_or(0)
}

#[no_mangle]
pub unsafe extern "C" fn lmm_structure_outcome_count(handle: *const LmmStructure) -> u32 {
    structure_ref(handle).map(|s| s.outcome_count() as u32).unwrap_or(0)
}

unsafe fn read_profile(
    structure: &InformationStructure,
    profile: *const u32,
    profile_len: usize,
) -> Result<ReportProfile, LmmStatus> {
    if profile.is_null() {
        set_last_error("null profile pointer");
        return Err(LmmStatus::NullPointer);
    }
    if profile_len != structure.agent_count() {
        set_last_error(&format!(
            "profile has {profile_len} symbols, structure has {} agents",
            structure.agent_count()
        ));
        return Err(LmmStatus::InvalidArgument);
    }
    let symbols = std::slice::from_raw_parts(profile, profile_len)
        .iter()
        .map(|&s| s as usize)
        .collect();
    Ok(ReportProfile::new(symbols))
}

/// Posterior over worlds for a report profile. `out_posterior` must hold
/// `lmm_structure_world_count` doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lmm_posterior_over_worlds(
    handle: *const LmmStructure,
    profile: *const u32,
    profile_len: usize,
    out_posterior: *mut f64,
) -> LmmStatus {
    let structure = match structure_ref(handle) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let profile = match read_profile(structure, profile, profile_len) {
        Ok(p) => p,
        Err(status) => return status,
    };
    if out_posterior.is_null() {
        set_last_error("null output buffer");
        return LmmStatus::NullPointer;
    }
    match structure.posterior_over_worlds(&profile) {
        Ok(posterior) => {
            std::slice::from_raw_parts_mut(out_posterior, posterior.len())
                .copy_from_slice(&posterior);
            LmmStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Consistency score of a report profile.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lmm_consistency(
    handle: *const LmmStructure,
    profile: *const u32,
    profile_len: usize,
    out_consistency: *mut f64,
) -> LmmStatus {
    let structure = match structure_ref(handle) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let profile = match read_profile(structure, profile, profile_len) {
        Ok(p) => p,
        Err(status) => return status,
    };
    if out_consistency.is_null() {
        set_last_error("null output pointer");
        return LmmStatus::NullPointer;
    }
    match oracle::consistency(structure, &profile) {
        Ok(c) => {
            *out_consistency = c;
            LmmStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Exact
}

fn default_rule() -> PaymentRule {
    PaymentRule::Observable { alpha: 1.0, k: 2.0 }
}

fn default_budget() -> u128 {
    lmm_core::info::DEFAULT_ENUM_BUDGET
}

#[derive(Deserialize)]
struct RunOptions {
    #[serde(default = "default_oracle")]
    oracle: OracleSpec,
    #[serde(default = "default_rule")]
    rule: PaymentRule,
    profile: Vec<usize>,
    realized_world: usize,
    #[serde(default)]
    seed: u64,
}

fn out_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> LmmStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return LmmStatus::NullPointer;
    }
    match serde_json::to_string(value) {
        Ok(text) => match CString::new(text) {
            Ok(cstring) => {
                unsafe { *out = cstring.into_raw() };
                LmmStatus::Ok
            }
            Err(_) => {
                set_last_error("result contained an interior NUL");
                LmmStatus::InternalError
            }
        },
        Err(e) => {
            set_last_error(&format!("serializing result: {e}"));
            LmmStatus::InternalError
        }
    }
}

/// Run the mechanism once. `options_json` is
/// `{"oracle": {...}, "rule": {...}, "profile": [...], "realized_world": w, "seed": n}`;
/// the result is a JSON string owned by the caller.
///
/// # Safety
/// Pointers must be valid; release the result with `lmm_string_free`.
#[no_mangle]
pub unsafe extern "C" fn lmm_run_json(
    handle: *const LmmStructure,
    options_json: *const c_char,
    out: *mut *mut c_char,
) -> LmmStatus {
    let structure = match structure_ref(handle) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let text = match read_str(options_json) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let options: RunOptions = match serde_json::from_str(text) {
        Ok(o) => o,
        Err(e) => {
            set_last_error(&format!("run options: {e}"));
            return LmmStatus::InvalidArgument;
        }
    };
    let mut oracle = Oracle::new(options.oracle);
    let mut rng = rng::stream(options.seed, "ffi.run");
    let profile = ReportProfile::new(options.profile);
    match mechanism::run(
        structure,
        &mut oracle,
        &options.rule,
        &profile,
        options.realized_world,
        &mut rng,
    ) {
        Ok(result) => out_json(out, &result),
        Err(e) => fail(&e),
    }
}

#[derive(Deserialize)]
struct VerifyFfiOptions {
    #[serde(default = "default_oracle")]
    oracle: OracleSpec,
    #[serde(default = "default_rule")]
    rule: PaymentRule,
    #[serde(default)]
    delta: f64,
    #[serde(default)]
    trials: Option<u64>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_budget")]
    budget: u128,
}

/// Check one condition (`od_obs`, `od_zs`, `im`, `ic`, `delta`) and return
/// the certificate as JSON. Returns `ConditionFailed` when the check ran
/// but the condition does not hold; the certificate is still written.
///
/// # Safety
/// Pointers must be valid; release the result with `lmm_string_free`.
#[no_mangle]
pub unsafe extern "C" fn lmm_verify_json(
    handle: *const LmmStructure,
    condition: *const c_char,
    options_json: *const c_char,
    out: *mut *mut c_char,
) -> LmmStatus {
    let structure = match structure_ref(handle) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let condition = match read_str(condition) {
        Ok(c) => c,
        Err(status) => return status,
    };
    let text = match read_str(options_json) {
        Ok(t) => t,
        Err(status) => return status,
    };
    let options: VerifyFfiOptions = match serde_json::from_str(text) {
        Ok(o) => o,
        Err(e) => {
            set_last_error(&format!("verify options: {e}"));
            return LmmStatus::InvalidArgument;
        }
    };
    let opts = VerifyOptions {
        mode: match options.trials {
            Some(trials) => EvalMode::MonteCarlo { trials },
            None => EvalMode::Exhaustive,
        },
        seed: options.seed,
        budget: options.budget,
    };
    let result = match condition {
        "od_obs" => {
            verifier::check_over_determination_observable(structure, &options.oracle, &opts)
        }
        "od_zs" => verifier::check_over_determination_zero_shot(structure, &options.oracle, &opts),
        "im" => verifier::check_information_monotonicity(structure, &options.oracle, &opts),
        "ic" => verifier::check_incentive_compatibility(
            structure,
            &options.oracle,
            &options.rule,
            &opts,
        ),
        "delta" => {
            verifier::check_delta_sufficiency(structure, &options.oracle, options.delta, &opts)
        }
        other => {
            set_last_error(&format!("unknown condition {other:?}"));
            return LmmStatus::InvalidArgument;
        }
    };
    match result {
        Ok(cert) => {
            let holds = cert.holds();
            let status = out_json(out, &cert);
            if status == LmmStatus::Ok && !holds {
                LmmStatus::ConditionFailed
            } else {
                status
            }
        }
        Err(e) => fail(&e),
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `ptr` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lmm_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}
