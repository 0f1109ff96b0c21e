//! C ABI over `fsn-core`.
//!
//! Games and outcomes are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`FsnStatus`]; on failure the
//! message is available from [`fsn_last_error_message`] on the same thread.
//! Strings handed out by the library are released with [`fsn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fsn_core::duopoly::{build_duopoly_spec, DuopolyParams};
use fsn_core::lcp::{lemke_solve, LcpProblem, LemkeOptions, LemkeOutcome};
use fsn_core::linalg::{Mat, Vector};
use fsn_core::solver::{solve_fsn, verify_equilibrium, SolveOptions, VerifyOptions};
use fsn_core::{FsnError, GameSpec};

/// Result codes. The first four match the exit codes of the `fsn` binary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsnStatus {
    Ok = 0,
    /// Solved, but at least one verification check failed.
    VerificationFailed = 1,
    /// Empty stage constraint set or no solution of the global LCP.
    Infeasible = 2,
    /// Malformed input or a violated structural assumption.
    InvalidInput = 3,
    NullPointer = 4,
    /// Stage index or buffer length out of range.
    OutOfRange = 5,
    /// Internal panic caught at the boundary.
    Internal = 6,
}

pub struct FsnGame {
    spec: GameSpec,
}

pub struct FsnOutcome {
    inner: fsn_core::FsnOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: FsnStatus, msg: impl Into<String>) -> FsnStatus {
    set_error(msg);
    status
}

fn status_of(e: &FsnError) -> FsnStatus {
    match e {
        FsnError::StageInfeasible { .. } | FsnError::NoEquilibrium { .. } | FsnError::Lcp(_) => FsnStatus::Infeasible,
        FsnError::IndexOutOfRange { .. } => FsnStatus::OutOfRange,
        _ => FsnStatus::InvalidInput,
    }
}

/// Runs `f`, turning panics into [`FsnStatus::Internal`].
fn guard(f: impl FnOnce() -> FsnStatus) -> FsnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(FsnStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, FsnStatus> {
    if s.is_null() {
        return Err(fail(FsnStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(FsnStatus::InvalidInput, "string is not valid UTF-8"))
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library and valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fsn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a game from JSON and validates its structure.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsn_game_from_json(json: *const c_char, out: *mut *mut FsnGame) -> FsnStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsnStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let spec = match GameSpec::from_json_str(text) {
            Ok(s) => s,
            Err(e) => return fail(FsnStatus::InvalidInput, e.to_string()),
        };
        match fsn_core::validate(&spec).and_then(|r| r.ensure()) {
            Ok(()) => {
                *out = Box::into_raw(Box::new(FsnGame { spec }));
                FsnStatus::Ok
            }
            Err(e) => fail(FsnStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Builds the duopoly preset with common spillover `lambda`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsn_game_duopoly(lambda: f64, out: *mut *mut FsnGame) -> FsnStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsnStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        match build_duopoly_spec(&DuopolyParams::with_lambda(lambda)) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(FsnGame { spec }));
                FsnStatus::Ok
            }
            Err(e) => fail(FsnStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Writes the state dimension and horizon.
///
/// # Safety
/// All pointers must be valid; `game` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fsn_game_dims(game: *const FsnGame, n: *mut usize, horizon: *mut usize) -> FsnStatus {
    if game.is_null() || n.is_null() || horizon.is_null() {
        return fail(FsnStatus::NullPointer, "null pointer");
    }
    let d = &(*game).spec.dims;
    *n = d.n;
    *horizon = d.horizon;
    FsnStatus::Ok
}

/// # Safety
/// `game` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsn_game_free(game: *mut FsnGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Solves and verifies. On `Ok` or `VerificationFailed` an outcome handle
/// is written to `out`; otherwise `out` is set to null.
///
/// # Safety
/// `game` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fsn_solve(game: *const FsnGame, out: *mut *mut FsnOutcome) -> FsnStatus {
    guard(|| {
        if game.is_null() || out.is_null() {
            return fail(FsnStatus::NullPointer, "null pointer");
        }
        *out = ptr::null_mut();
        match solve_fsn(&(*game).spec, &SolveOptions::default()) {
            Ok(inner) => {
                let status = if inner.report.passed() {
                    FsnStatus::Ok
                } else {
                    let names: Vec<String> = inner.report.failures().map(|c| c.to_string()).collect();
                    fail(FsnStatus::VerificationFailed, names.join("; "))
                };
                *out = Box::into_raw(Box::new(FsnOutcome { inner }));
                status
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Re-verifies an outcome document against a game.
///
/// # Safety
/// `game` must be a live handle, `outcome_json` NUL-terminated, `passed` valid.
#[no_mangle]
pub unsafe extern "C" fn fsn_verify_json(
    game: *const FsnGame,
    outcome_json: *const c_char,
    passed: *mut bool,
) -> FsnStatus {
    guard(|| {
        if game.is_null() || passed.is_null() {
            return fail(FsnStatus::NullPointer, "null pointer");
        }
        let text = match read_str(outcome_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let out = match fsn_core::FsnOutcome::from_json_str(text) {
            Ok(o) => o,
            Err(e) => return fail(FsnStatus::InvalidInput, e.to_string()),
        };
        match verify_equilibrium(&(*game).spec, &out, &VerifyOptions::default()) {
            Ok(rep) => {
                *passed = rep.passed();
                if rep.passed() {
                    FsnStatus::Ok
                } else {
                    let names: Vec<String> = rep.failures().map(|c| c.to_string()).collect();
                    fail(FsnStatus::VerificationFailed, names.join("; "))
                }
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Writes `[J1, J2]` to `costs`.
///
/// # Safety
/// `outcome` must be a live handle and `costs` point to two doubles.
#[no_mangle]
pub unsafe extern "C" fn fsn_outcome_costs(outcome: *const FsnOutcome, costs: *mut f64) -> FsnStatus {
    if outcome.is_null() || costs.is_null() {
        return fail(FsnStatus::NullPointer, "null pointer");
    }
    let c = (*outcome).inner.costs;
    *costs = c[0];
    *costs.add(1) = c[1];
    FsnStatus::Ok
}

/// Whether every verification check passed.
///
/// # Safety
/// `outcome` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fsn_outcome_verified(outcome: *const FsnOutcome) -> bool {
    !outcome.is_null() && (*outcome).inner.report.passed()
}

unsafe fn copy_out(src: &Vector, buf: *mut f64, len: usize) -> FsnStatus {
    if src.len() > len {
        return fail(FsnStatus::OutOfRange, format!("buffer holds {len} values, {} needed", src.len()));
    }
    if src.is_empty() {
        return FsnStatus::Ok;
    }
    if buf.is_null() {
        return fail(FsnStatus::NullPointer, "null buffer");
    }
    ptr::copy_nonoverlapping(src.as_slice().as_ptr(), buf, src.len());
    FsnStatus::Ok
}

/// Which series [`fsn_outcome_series`] reads.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsnSeries {
    /// `x_k`, `k = 0..=K`.
    State = 0,
    /// `u¹_k`, `k < K`.
    LeaderControl = 1,
    /// `u²_k`, `k < K`.
    FollowerControl = 2,
    /// Simultaneous decisions `(v¹_k, v²_k)`, `k = 0..=K`.
    Simultaneous = 3,
    /// Multipliers `(μ¹_k, μ²_k)`, `k = 0..=K`.
    Multipliers = 4,
    /// Constraint values at stage `k`.
    Slack = 5,
}

/// Copies one stage of a series into `buf` (capacity `len`) and writes the
/// number of values to `written`. `series` takes an [`FsnSeries`] value.
///
/// # Safety
/// `outcome` must be a live handle; `buf` must hold `len` doubles and
/// `written` be valid.
#[no_mangle]
pub unsafe extern "C" fn fsn_outcome_series(
    outcome: *const FsnOutcome,
    series: u32,
    k: usize,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> FsnStatus {
    if outcome.is_null() || written.is_null() {
        return fail(FsnStatus::NullPointer, "null pointer");
    }
    let o = &(*outcome).inner;
    let series = match series {
        0 => FsnSeries::State,
        1 => FsnSeries::LeaderControl,
        2 => FsnSeries::FollowerControl,
        3 => FsnSeries::Simultaneous,
        4 => FsnSeries::Multipliers,
        5 => FsnSeries::Slack,
        other => return fail(FsnStatus::OutOfRange, format!("unknown series {other}")),
    };
    let list: Vec<&Vector> = match series {
        FsnSeries::State => o.trajectory.x.iter().collect(),
        FsnSeries::LeaderControl => o.trajectory.u.iter().map(|u| &u[0]).collect(),
        FsnSeries::FollowerControl => o.trajectory.u.iter().map(|u| &u[1]).collect(),
        FsnSeries::Simultaneous => o.params.w.iter().collect(),
        FsnSeries::Multipliers => o.params.theta.iter().collect(),
        FsnSeries::Slack => o.trajectory.slack.iter().collect(),
    };
    let Some(src) = list.get(k) else {
        return fail(FsnStatus::OutOfRange, format!("stage {k} outside 0..{}", list.len()));
    };
    let status = copy_out(src, buf, len);
    if status == FsnStatus::Ok {
        *written = src.len();
    }
    status
}

/// Serializes the outcome as JSON; release with [`fsn_string_free`].
///
/// # Safety
/// `outcome` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fsn_outcome_to_json(outcome: *const FsnOutcome, out: *mut *mut c_char) -> FsnStatus {
    guard(|| {
        if outcome.is_null() || out.is_null() {
            return fail(FsnStatus::NullPointer, "null pointer");
        }
        match CString::new((*outcome).inner.to_json_string()) {
            Ok(c) => {
                *out = c.into_raw();
                FsnStatus::Ok
            }
            Err(_) => fail(FsnStatus::Internal, "interior NUL in JSON"),
        }
    })
}

/// # Safety
/// `outcome` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsn_outcome_free(outcome: *mut FsnOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Solves `0 ≤ Mz + q ⊥ z ≥ 0` by Lemke's method. `m` is row-major `d×d`.
/// Writes `z` and the pivot count; a secondary ray returns `Infeasible`.
///
/// # Safety
/// `m` must hold `d*d` doubles, `q` and `z` hold `d` each, `pivots` valid.
#[no_mangle]
pub unsafe extern "C" fn fsn_lcp_solve(
    d: usize,
    m: *const f64,
    q: *const f64,
    z: *mut f64,
    pivots: *mut usize,
) -> FsnStatus {
    guard(|| {
        if d > 0 && (m.is_null() || q.is_null() || z.is_null()) || pivots.is_null() {
            return fail(FsnStatus::NullPointer, "null pointer");
        }
        let (mm, qq) = if d == 0 {
            (Mat::zeros(0, 0), Vector::zeros(0))
        } else {
            (
                Mat::from_row_slice(d, d, std::slice::from_raw_parts(m, d * d)),
                Vector::from_column_slice(std::slice::from_raw_parts(q, d)),
            )
        };
        let p = match LcpProblem::new(mm, qq) {
            Ok(p) => p,
            Err(e) => return fail(FsnStatus::InvalidInput, e.to_string()),
        };
        match lemke_solve(&p, &LemkeOptions::default()) {
            Ok(LemkeOutcome::Solved(sol)) => {
                *pivots = sol.pivots;
                copy_out(&sol.z, z, d)
            }
            Ok(LemkeOutcome::Infeasible(ray)) => {
                *pivots = ray.pivots;
                fail(FsnStatus::Infeasible, format!("secondary ray after {} pivots", ray.pivots))
            }
            Err(e) => fail(FsnStatus::Infeasible, e.to_string()),
        }
    })
}
