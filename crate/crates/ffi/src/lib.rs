//! C ABI for `defermatch`.
//!
//! Objects cross the boundary as opaque handles created by `dm_*_new` /
//! `dm_solve` and released by the matching `dm_*_free`. Every fallible call
//! returns a [`DmStatus`]; on failure `dm_last_error` gives a message for
//! the calling thread. Matrices are row-major `n x k` arrays of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use defermatch::bandit::ArmState;
use defermatch::matching::{matching_utility, ResourceSet, ScoreMatrix};
use defermatch::scoregen::beta_quantile;
use defermatch::{brute_force_matching, solve_imperfect_matching, Error, MatchInstance, Matching, Scores};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Parse = 4,
    Domain = 5,
    UnknownArm = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmScores {
    Confidence = 0,
    SuccessProb = 1,
}

impl From<DmScores> for Scores {
    fn from(s: DmScores) -> Self {
        match s {
            DmScores::Confidence => Scores::Confidence,
            DmScores::SuccessProb => Scores::SuccessProb,
        }
    }
}

/// A matching instance.
pub struct DmInstance(MatchInstance);

/// A solved matching.
pub struct DmMatching(Matching);

/// UCB1 state over a set of deferral counts.
pub struct DmBandit(ArmState);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (DmStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DmStatus {
    match e {
        Error::Infeasible { .. } | Error::InfeasibleMatching(_) => DmStatus::Infeasible,
        Error::Domain(_) => DmStatus::Domain,
        Error::UnknownArm(_) => DmStatus::UnknownArm,
        Error::Json(_) => DmStatus::Parse,
        Error::SizeLimit { .. } => DmStatus::OutOfRange,
        _ => DmStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> Failure {
    (DmStatus::NullPointer, format!("{what} is null"))
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> DmStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DmStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `dm_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an instance with `n` individuals and `k` resources.
///
/// # Safety
/// `capacities` must point to `k` values, `confidence` to `n * k` values,
/// and `success_prob` to `n * k` values or be null. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_instance_new(
    n: usize,
    k: usize,
    capacities: *const u32,
    confidence: *const f64,
    success_prob: *const f64,
    out: *mut *mut DmInstance,
) -> DmStatus {
    run(|| {
        let out = out_ptr(out)?;
        let cells = n.checked_mul(k).ok_or((DmStatus::InvalidArgument, "n * k overflows".into()))?;
        let caps = slice(capacities, k, "capacities")?.to_vec();
        let f = ScoreMatrix::new(n, k, slice(confidence, cells, "confidence")?.to_vec()).map_err(fail)?;
        let p = if success_prob.is_null() {
            None
        } else {
            Some(ScoreMatrix::new(n, k, slice(success_prob, cells, "success_prob")?.to_vec()).map_err(fail)?)
        };
        let resources = ResourceSet::with_capacities(caps).map_err(fail)?;
        let inst = MatchInstance::new(resources, f, p).map_err(fail)?;
        *out = Box::into_raw(Box::new(DmInstance(inst)));
        Ok(())
    })
}

unsafe fn out_ptr<'a, T>(out: *mut *mut T) -> Result<&'a mut *mut T, Failure> {
    let slot = self::out(out, "out")?;
    *slot = ptr::null_mut();
    Ok(slot)
}

/// Parses an instance from JSON:
/// `{"n":2,"resources":["a"],"capacities":[1],"confidence":[[0.1],[0.2]]}`
/// with optional `"success_prob"`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_instance_from_json(json: *const c_char, out: *mut *mut DmInstance) -> DmStatus {
    run(|| {
        let out = out_ptr(out)?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (DmStatus::Parse, e.to_string()))?;
        let inst = MatchInstance::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(DmInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from `dm_instance_new` / `dm_instance_from_json` and
/// not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dm_instance_free(inst: *mut DmInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live instance; `n` and `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_instance_dims(inst: *const DmInstance, n: *mut usize, k: *mut usize) -> DmStatus {
    run(|| {
        let inst = &get(inst, "inst")?.0;
        *out(n, "n")? = inst.n();
        *out(k, "k")? = inst.k();
        Ok(())
    })
}

/// Maximum-weight matching of exactly `max(n - b, 0)` individuals.
///
/// # Safety
/// `inst` must be a live instance; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_solve(
    inst: *const DmInstance,
    scores: DmScores,
    b: usize,
    out: *mut *mut DmMatching,
) -> DmStatus {
    run(|| {
        let out = out_ptr(out)?;
        let m = solve_imperfect_matching(&get(inst, "inst")?.0, scores.into(), b).map_err(fail)?;
        *out = Box::into_raw(Box::new(DmMatching(m)));
        Ok(())
    })
}

/// Exhaustive search, for `n <= 8` and `k <= 4`.
///
/// # Safety
/// As for [`dm_solve`].
#[no_mangle]
pub unsafe extern "C" fn dm_brute_force(
    inst: *const DmInstance,
    scores: DmScores,
    b: usize,
    out: *mut *mut DmMatching,
) -> DmStatus {
    run(|| {
        let out = out_ptr(out)?;
        let m = brute_force_matching(&get(inst, "inst")?.0, scores.into(), b).map_err(fail)?;
        *out = Box::into_raw(Box::new(DmMatching(m)));
        Ok(())
    })
}

/// Number of pairs; 0 for null.
///
/// # Safety
/// `m` must be a live matching or null.
#[no_mangle]
pub unsafe extern "C" fn dm_matching_len(m: *const DmMatching) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Objective on the scores the matching was solved for; NaN for null.
///
/// # Safety
/// `m` must be a live matching or null.
#[no_mangle]
pub unsafe extern "C" fn dm_matching_objective(m: *const DmMatching) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.0.objective)
}

/// Pair `idx`, in ascending individual order.
///
/// # Safety
/// `m` must be a live matching; `individual` and `resource` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_matching_pair(
    m: *const DmMatching,
    idx: usize,
    individual: *mut usize,
    resource: *mut usize,
) -> DmStatus {
    run(|| {
        let m = &get(m, "matching")?.0;
        let &(i, r) = m
            .pairs
            .get(idx)
            .ok_or((DmStatus::OutOfRange, format!("pair {idx} of {}", m.len())))?;
        *out(individual, "individual")? = i;
        *out(resource, "resource")? = r;
        Ok(())
    })
}

/// Expected utility `sum p_ir` of `m` on `inst`.
///
/// # Safety
/// `m` and `inst` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_matching_utility(
    m: *const DmMatching,
    inst: *const DmInstance,
    out: *mut f64,
) -> DmStatus {
    run(|| {
        let u = matching_utility(&get(m, "matching")?.0, &get(inst, "inst")?.0).map_err(fail)?;
        *self::out(out, "out")? = u;
        Ok(())
    })
}

/// # Safety
/// `m` must come from `dm_solve` / `dm_brute_force` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dm_matching_free(m: *mut DmMatching) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `d`-quantile of Beta(`a`, `b`).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_beta_quantile(a: f64, b: f64, d: f64, out: *mut f64) -> DmStatus {
    run(|| {
        let q = beta_quantile(a, b, d).map_err(fail)?;
        *self::out(out, "out")? = q;
        Ok(())
    })
}

/// UCB1 over `arms` for a horizon of `horizon` rounds.
///
/// # Safety
/// `arms` must point to `n_arms` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dm_bandit_new(
    arms: *const usize,
    n_arms: usize,
    horizon: u64,
    bonus_scale: f64,
    out: *mut *mut DmBandit,
) -> DmStatus {
    run(|| {
        let out = out_ptr(out)?;
        let arms = slice(arms, n_arms, "arms")?;
        let state = ArmState::with_bonus_scale(arms, horizon, bonus_scale).map_err(fail)?;
        *out = Box::into_raw(Box::new(DmBandit(state)));
        Ok(())
    })
}

/// The arm UCB1 plays next.
///
/// # Safety
/// `bandit` must be live; `arm` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_bandit_select(bandit: *const DmBandit, arm: *mut usize) -> DmStatus {
    run(|| {
        let b = get(bandit, "bandit")?.0.select_arm();
        *out(arm, "arm")? = b;
        Ok(())
    })
}

/// Records `reward` for `arm`.
///
/// # Safety
/// `bandit` must be live and not shared across threads without locking.
#[no_mangle]
pub unsafe extern "C" fn dm_bandit_update(bandit: *mut DmBandit, arm: usize, reward: f64) -> DmStatus {
    run(|| {
        let state = &mut out(bandit, "bandit")?.0;
        state.update(arm, reward).map_err(fail)
    })
}

/// Empirical mean reward of `arm`; `*pulls` receives its pull count and
/// `*mean` is NaN before the first pull.
///
/// # Safety
/// `bandit` must be live; `pulls` and `mean` writable.
#[no_mangle]
pub unsafe extern "C" fn dm_bandit_arm_stats(
    bandit: *const DmBandit,
    arm: usize,
    pulls: *mut u64,
    mean: *mut f64,
) -> DmStatus {
    run(|| {
        let state = &get(bandit, "bandit")?.0;
        let n = state.pulls(arm).map_err(fail)?;
        let m = state.mean(arm).map_err(fail)?;
        *out(pulls, "pulls")? = n;
        *out(mean, "mean")? = m.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `bandit` must come from `dm_bandit_new` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dm_bandit_free(bandit: *mut DmBandit) {
    if !bandit.is_null() {
        drop(Box::from_raw(bandit));
    }
}
