//! C ABI over the gridmix simulator and trained learners.
//!
//! Every fallible call returns a [`GmStatus`]; on failure a message is
//! available from [`gm_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. No call unwinds across
//! the boundary: a Rust panic is reported as `GM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gridmix::checkpoint::{load_bundle, CheckpointError};
use gridmix::grid_world::{generate, Action, EnvConfig, EnvError, EnvState, MapRecord};
use gridmix::harness::render::draw;
use gridmix::harness::{HarnessError, LearnedPolicy, Policy};
use gridmix::observation::observe_into;
use gridmix::qmix::MixerBundle;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    GenerationFailed = 4,
    EpisodeOver = 5,
    InactiveAgent = 6,
    BufferSize = 7,
    Io = 8,
    Checkpoint = 9,
    TopologyMismatch = 10,
    Panic = 11,
}

/// Environment parameters. `goal_dist == 0` means "any reachable goal".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GmEnvConfig {
    pub size: u32,
    pub density: f64,
    pub n_agents: u32,
    pub obs_radius: u32,
    pub horizon: u32,
    pub goal_dist: u32,
    pub seed: u64,
}

impl From<GmEnvConfig> for EnvConfig {
    fn from(c: GmEnvConfig) -> Self {
        EnvConfig {
            size: c.size as usize,
            density: c.density,
            n_agents: c.n_agents as usize,
            obs_radius: c.obs_radius as usize,
            horizon: c.horizon as usize,
            goal_dist: (c.goal_dist > 0).then_some(c.goal_dist as usize),
            seed: c.seed,
        }
    }
}

/// Opaque episode handle.
pub struct GmEnv {
    state: EnvState,
}

/// Opaque trained learner.
pub struct GmLearner {
    bundle: MixerBundle,
}

struct Failure {
    status: GmStatus,
    message: String,
}

impl Failure {
    fn new(status: GmStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }
}

impl From<EnvError> for Failure {
    fn from(e: EnvError) -> Self {
        let status = match e {
            EnvError::InvalidConfig(_) | EnvError::InvalidRecord(_) => GmStatus::InvalidConfig,
            EnvError::GenerationFailed { .. } => GmStatus::GenerationFailed,
            EnvError::InvalidActionCount { .. } => GmStatus::InvalidArgument,
            EnvError::EpisodeOver(_) => GmStatus::EpisodeOver,
            EnvError::InactiveAgent(_) => GmStatus::InactiveAgent,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        let status = match e {
            CheckpointError::Io(_) => GmStatus::Io,
            _ => GmStatus::Checkpoint,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Env(e) => e.into(),
            HarnessError::Checkpoint(e) => e.into(),
            HarnessError::TopologyMismatch(m) => Failure::new(GmStatus::TopologyMismatch, m),
            other => Failure::new(GmStatus::InvalidArgument, other.to_string()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GmStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            GmStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(GmStatus::NullPointer, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as in `non_null`, and the caller does not alias the handle.
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(GmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure::new(GmStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(GmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(GmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got < want {
        return Err(Failure::new(GmStatus::BufferSize, format!("{what} holds {got} entries, need {want}")));
    }
    Ok(())
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a random episode.
///
/// # Safety
/// `config` must point to a valid `GmEnvConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_env_generate(config: *const GmEnvConfig, out: *mut *mut GmEnv) -> GmStatus {
    guard(|| {
        let cfg: EnvConfig = (*non_null(config, "config")?).into();
        let out = non_null_mut(out, "out")?;
        let state = generate(&cfg)?;
        *out = Box::into_raw(Box::new(GmEnv { state }));
        Ok(())
    })
}

/// Loads an episode from a map JSON record. `config` supplies the horizon
/// and observation radius; its size and agent count must match the map.
///
/// # Safety
/// `map_json` must be a NUL-terminated string; `config` and `out` as in
/// [`gm_env_generate`].
#[no_mangle]
pub unsafe extern "C" fn gm_env_from_json(map_json: *const c_char, config: *const GmEnvConfig, out: *mut *mut GmEnv) -> GmStatus {
    guard(|| {
        let text = str_arg(map_json, "map_json")?;
        let cfg: EnvConfig = (*non_null(config, "config")?).into();
        let out = non_null_mut(out, "out")?;
        let record: MapRecord =
            serde_json::from_str(text).map_err(|e| Failure::new(GmStatus::InvalidArgument, format!("map JSON: {e}")))?;
        let state = EnvState::from_record(&record, &cfg)?;
        *out = Box::into_raw(Box::new(GmEnv { state }));
        Ok(())
    })
}

/// Copies an episode, including its current position in time.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_env_clone(env: *const GmEnv, out: *mut *mut GmEnv) -> GmStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        let out = non_null_mut(out, "out")?;
        *out = Box::into_raw(Box::new(GmEnv { state: env.state.clone() }));
        Ok(())
    })
}

/// Releases an episode. Null is ignored.
///
/// # Safety
/// `env` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gm_env_free(env: *mut GmEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_n_agents(env: *const GmEnv) -> usize {
    env.as_ref().map_or(0, |e| e.state.n_agents())
}

/// Length of one agent observation, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_obs_len(env: *const GmEnv) -> usize {
    env.as_ref().map_or(0, |e| e.state.config.obs_len())
}

/// Length of the global state tensor, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_state_len(env: *const GmEnv) -> usize {
    env.as_ref().map_or(0, |e| e.state.config.state_len())
}

/// Steps taken so far, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_time(env: *const GmEnv) -> usize {
    env.as_ref().map_or(0, |e| e.state.t)
}

/// True once every agent is inactive or the horizon is reached.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_is_over(env: *const GmEnv) -> bool {
    env.as_ref().is_none_or(|e| e.state.is_over())
}

/// Writes 1 for active agents and 0 otherwise into `active[0..n]`.
///
/// # Safety
/// `env` must be a live handle and `active` must hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn gm_env_active(env: *const GmEnv, active: *mut u8, n: usize) -> GmStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        check_len(n, env.state.n_agents(), "active")?;
        let out = slice_mut(active, n, "active")?;
        for (o, a) in out.iter_mut().zip(&env.state.agents) {
            *o = a.active as u8;
        }
        Ok(())
    })
}

/// Applies one joint action (codes 0..=4: stay, up, down, left, right).
/// `rewards` and `done` receive one entry per agent; `episode_over` may be
/// null.
///
/// # Safety
/// `actions`, `rewards` and `done` must each hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn gm_env_step(
    env: *mut GmEnv,
    actions: *const u8,
    n: usize,
    rewards: *mut f64,
    done: *mut u8,
    episode_over: *mut bool,
) -> GmStatus {
    guard(|| {
        let env = non_null_mut(env, "env")?;
        if actions.is_null() {
            return Err(Failure::new(GmStatus::NullPointer, "actions is null"));
        }
        let codes = std::slice::from_raw_parts(actions, n);
        let joint = codes
            .iter()
            .map(|&c| Action::from_code(c).ok_or_else(|| Failure::new(GmStatus::InvalidArgument, format!("invalid action code {c}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let rewards = slice_mut(rewards, n, "rewards")?;
        let done = slice_mut(done, n, "done")?;
        let outcome = env.state.step(&joint)?;
        rewards.copy_from_slice(&outcome.rewards);
        for (d, &o) in done.iter_mut().zip(&outcome.done) {
            *d = o as u8;
        }
        if let Some(flag) = episode_over.as_mut() {
            *flag = outcome.episode_over;
        }
        Ok(())
    })
}

/// Writes agent `agent`'s observation into `out[0..len]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_env_observe(env: *const GmEnv, agent: usize, out: *mut f64, len: usize) -> GmStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        let want = env.state.config.obs_len();
        check_len(len, want, "observation buffer")?;
        if agent >= env.state.n_agents() {
            return Err(Failure::new(GmStatus::InvalidArgument, format!("agent {agent} out of range")));
        }
        let out = slice_mut(out, len, "out")?;
        observe_into(&env.state, agent, env.state.config.obs_radius, &mut out[..want])?;
        Ok(())
    })
}

/// Writes the global state tensor into `out[0..len]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_env_global_state(env: *const GmEnv, out: *mut f64, len: usize) -> GmStatus {
    guard(|| {
        let env = non_null(env, "env")?;
        let want = env.state.config.state_len();
        check_len(len, want, "state buffer")?;
        let out = slice_mut(out, len, "out")?;
        env.state.write_global_state(&mut out[..want]);
        Ok(())
    })
}

/// ASCII picture of the board; release with [`gm_string_free`]. Returns
/// null on failure.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_render(env: *const GmEnv) -> *mut c_char {
    let mut result = ptr::null_mut();
    guard(|| {
        let env = non_null(env, "env")?;
        result = CString::new(draw(&env.state)).map_err(|e| Failure::new(GmStatus::InvalidArgument, e.to_string()))?.into_raw();
        Ok(())
    });
    result
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a learner checkpoint written by `gridmix train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gm_learner_load(path: *const c_char, out: *mut *mut GmLearner) -> GmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = non_null_mut(out, "out")?;
        let bundle = load_bundle(Path::new(path))?;
        *out = Box::into_raw(Box::new(GmLearner { bundle }));
        Ok(())
    })
}

/// Releases a learner. Null is ignored.
///
/// # Safety
/// `learner` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gm_learner_free(learner: *mut GmLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Greedy joint action for the current state of `env`; inactive agents get
/// 0 (stay).
///
/// # Safety
/// Both handles must be live; `actions` must hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn gm_learner_act(learner: *const GmLearner, env: *const GmEnv, actions: *mut u8, n: usize) -> GmStatus {
    guard(|| {
        let learner = non_null(learner, "learner")?;
        let env = non_null(env, "env")?;
        let cfg = learner.bundle.config();
        if cfg.n_agents != env.state.n_agents() || cfg.obs_radius != env.state.config.obs_radius {
            return Err(Failure::new(
                GmStatus::TopologyMismatch,
                format!(
                    "learner expects {} agents with radius {}, episode has {} with radius {}",
                    cfg.n_agents,
                    cfg.obs_radius,
                    env.state.n_agents(),
                    env.state.config.obs_radius
                ),
            ));
        }
        check_len(n, env.state.n_agents(), "actions")?;
        let out = slice_mut(actions, n, "actions")?;
        // epsilon is 0, so the RNG is never drawn from
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let joint = LearnedPolicy::new(&learner.bundle, 0.0).act(&env.state, &mut rng).map_err(Failure::from)?;
        for (o, a) in out.iter_mut().zip(joint) {
            *o = a.code();
        }
        Ok(())
    })
}
