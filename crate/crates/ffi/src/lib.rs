//! C interface to the highway simulator, the rule-based expert and trained
//! linear policies.
//!
//! Every fallible function returns an [`AilrsStatus`]. On failure the
//! message is available from [`ailrs_last_error`] on the same thread until
//! the next failing call. Handles are opaque and must be released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ailrs_core::checkpoint::Checkpoint;
use ailrs_core::config::RunConfig;
use ailrs_core::expert::{expert_decide, ExpertRule};
use ailrs_core::highway::{HighwayEnv, StepInfo, Terminal, WorldState};
use ailrs_core::{Decision, Error};

pub const AILRS_DECISION_LEFT: u32 = 0;
pub const AILRS_DECISION_KEEP: u32 = 1;
pub const AILRS_DECISION_RIGHT: u32 = 2;

pub const AILRS_TERMINAL_NONE: u32 = 0;
pub const AILRS_TERMINAL_COLLISION: u32 = 1;
pub const AILRS_TERMINAL_HORIZON: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AilrsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Malformed = 5,
    Dimension = 6,
    Usage = 7,
    Data = 8,
    Internal = 9,
}

/// Outcome flags of one simulator step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AilrsStepInfo {
    /// One of the `AILRS_TERMINAL_*` values.
    pub terminal: u32,
    pub clamped: bool,
    pub boundary_crossed: bool,
    pub midpoint_passed: bool,
    pub maneuver_completed: bool,
}

impl From<StepInfo> for AilrsStepInfo {
    fn from(info: StepInfo) -> Self {
        AilrsStepInfo {
            terminal: match info.terminal {
                Terminal::None => AILRS_TERMINAL_NONE,
                Terminal::Collision => AILRS_TERMINAL_COLLISION,
                Terminal::HorizonReached => AILRS_TERMINAL_HORIZON,
            },
            clamped: info.clamped,
            boundary_crossed: info.boundary_crossed,
            midpoint_passed: info.midpoint_passed_event,
            maneuver_completed: info.maneuver_completed_event,
        }
    }
}

/// Simulator instance with its expert rule and current episode.
pub struct AilrsEnv {
    env: HighwayEnv,
    rule: ExpertRule,
    world: Option<WorldState>,
}

/// Linear policy with its normalization statistics.
pub struct AilrsPolicy {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AilrsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => AilrsStatus::Config,
            Error::Io { .. } => AilrsStatus::Io,
            Error::Malformed { .. } => AilrsStatus::Malformed,
            Error::Dimension { .. } => AilrsStatus::Dimension,
            Error::Usage(_) => AilrsStatus::Usage,
            Error::Data(_) | Error::Conditioning(_) | Error::Normalization(_) => AilrsStatus::Data,
            Error::ExpertCollision { .. } => AilrsStatus::Internal,
        };
        let mut msg = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            source = s.source();
        }
        Failure(status, msg)
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AilrsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AilrsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            AilrsStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AilrsStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            AilrsStatus::InvalidArgument,
            format!("`{what}` is not UTF-8"),
        )
    })
}

unsafe fn out_slice<'a>(
    p: *mut f64,
    len: usize,
    want: usize,
    what: &str,
) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Error::Dimension {
            what: what.to_string(),
            expected: want,
            actual: len,
        }
        .into());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn decision_arg(d: u32) -> Result<Decision, Failure> {
    Decision::from_index(d as usize).ok_or_else(|| {
        Failure(
            AilrsStatus::InvalidArgument,
            format!("unknown decision {d}"),
        )
    })
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ailrs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Create a simulator from a run configuration in JSON (only `env` and
/// `expert` are used). A NULL `config_json` selects the defaults.
///
/// # Safety
/// `config_json` is NULL or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_new(
    config_json: *const c_char,
    out: *mut *mut AilrsEnv,
) -> AilrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_json(str_arg(config_json, "config_json")?)?
        };
        let env = HighwayEnv::new(cfg.env)?;
        *out = Box::into_raw(Box::new(AilrsEnv {
            env,
            rule: cfg.expert,
            world: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `env` is NULL or a handle from [`ailrs_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_free(env: *mut AilrsEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation length, or 0 for a NULL handle.
///
/// # Safety
/// `env` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_obs_dim(env: *const AilrsEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.config().obs_dim())
}

/// Start an episode and write the initial observation.
///
/// # Safety
/// `env` is a live handle; `obs_out` points to `obs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_reset(
    env: *mut AilrsEnv,
    seed: u64,
    obs_out: *mut f64,
    obs_len: usize,
) -> AilrsStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let out = out_slice(obs_out, obs_len, env.env.config().obs_dim(), "obs_out")?;
        let (world, obs) = env.env.reset(seed);
        out.copy_from_slice(&obs.to_vec());
        env.world = Some(world);
        Ok(())
    })
}

/// Advance one step under `decision` (an `AILRS_DECISION_*` value).
///
/// # Safety
/// `env` is a live handle; `obs_out` points to `obs_len` writable doubles;
/// `info_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_step(
    env: *mut AilrsEnv,
    decision: u32,
    obs_out: *mut f64,
    obs_len: usize,
    info_out: *mut AilrsStepInfo,
) -> AilrsStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let info_out = info_out.as_mut().ok_or_else(|| null("info_out"))?;
        let out = out_slice(obs_out, obs_len, env.env.config().obs_dim(), "obs_out")?;
        let decision = decision_arg(decision)?;
        let world = env
            .world
            .as_mut()
            .ok_or_else(|| Failure(AilrsStatus::Usage, "step called before reset".into()))?;
        let (obs, info) = env.env.step(world, decision)?;
        out.copy_from_slice(&obs.to_vec());
        *info_out = info.into();
        Ok(())
    })
}

/// Decision of the rule-based expert in the current state.
///
/// # Safety
/// `env` is a live handle; `decision_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ailrs_env_expert_decide(
    env: *const AilrsEnv,
    decision_out: *mut u32,
) -> AilrsStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = decision_out.as_mut().ok_or_else(|| null("decision_out"))?;
        let world = env
            .world
            .as_ref()
            .ok_or_else(|| Failure(AilrsStatus::Usage, "expert queried before reset".into()))?;
        *out = expert_decide(world, env.env.config(), &env.rule).index() as u32;
        Ok(())
    })
}

/// Load a policy from a checkpoint file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ailrs_policy_load(
    path: *const c_char,
    out: *mut *mut AilrsPolicy,
) -> AilrsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let checkpoint = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(AilrsPolicy { checkpoint }));
        Ok(())
    })
}

/// State dimension the policy expects, or 0 for a NULL handle.
///
/// # Safety
/// `policy` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ailrs_policy_obs_dim(policy: *const AilrsPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.checkpoint.state_dim())
}

/// Greedy decision of the policy for one observation.
///
/// # Safety
/// `policy` is a live handle; `obs` points to `obs_len` readable doubles;
/// `decision_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ailrs_policy_act(
    policy: *const AilrsPolicy,
    obs: *const f64,
    obs_len: usize,
    decision_out: *mut u32,
) -> AilrsStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        let out = decision_out.as_mut().ok_or_else(|| null("decision_out"))?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        policy.checkpoint.check_compatible(obs_len)?;
        let obs = std::slice::from_raw_parts(obs, obs_len);
        let ck = &policy.checkpoint;
        *out = ck.policy.act(&ck.stats, obs)?.1.index() as u32;
        Ok(())
    })
}

/// # Safety
/// `policy` is NULL or a handle from [`ailrs_policy_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ailrs_policy_free(policy: *mut AilrsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}
