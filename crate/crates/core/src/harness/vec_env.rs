//! A batch of independent environments stepped together for training.
//!
//! Each slot owns its RNG, keyed by `(run seed, slot index)`, which drives
//! both exploration and episode resets. Slots are stepped in parallel and
//! their transitions returned in slot order, so results do not depend on
//! thread scheduling.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::eval::success_fraction;
use super::{derive_seed, thread_pool, HarnessError};
use crate::grid_world::{generate, Action, EnvConfig, EnvState, MapRecord};
use crate::observation::{obs_len, observe_into, CompactObs};
use crate::qmix::MixerBundle;
use crate::replay_buffer::{JointTransition, PackedState};

/// Where fresh training episodes come from.
#[derive(Debug, Clone)]
pub enum EpisodeSource {
    /// A newly generated random map per episode.
    Random(EnvConfig),
    /// A uniformly drawn map from a fixed pool.
    Pool { config: EnvConfig, maps: Arc<Vec<MapRecord>> },
}

impl EpisodeSource {
    pub fn config(&self) -> &EnvConfig {
        match self {
            EpisodeSource::Random(c) => c,
            EpisodeSource::Pool { config, .. } => config,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, exclude: &HashSet<u64>) -> Result<EnvState, HarnessError> {
        // Bounded so a pool made only of excluded maps cannot spin forever.
        for _ in 0..10_000 {
            let env = match self {
                EpisodeSource::Random(c) => {
                    let mut cfg = c.clone();
                    cfg.seed = rng.gen();
                    generate(&cfg)?
                }
                EpisodeSource::Pool { config, maps } => EnvState::from_record(&maps[rng.gen_range(0..maps.len())], config)?,
            };
            if exclude.is_empty() || !exclude.contains(&env.to_record().layout_hash()) {
                return Ok(env);
            }
        }
        Err(HarnessError::ConfigInvalid("every training episode collides with the evaluation set".into()))
    }
}

struct Slot {
    env: EnvState,
    rng: ChaCha8Rng,
    /// Dense observations of the current state (zeros for inactive agents).
    dense: Vec<Vec<f64>>,
    compact: Vec<CompactObs>,
    state: PackedState,
    state_buf: Vec<f64>,
}

impl Slot {
    fn refresh(&mut self, radius: usize) -> Result<(), HarnessError> {
        for i in 0..self.env.n_agents() {
            if self.env.agents[i].active {
                observe_into(&self.env, i, radius, &mut self.dense[i])?;
                self.compact[i] = CompactObs::pack(&self.dense[i], radius);
            } else {
                self.dense[i].fill(0.0);
                self.compact[i] = CompactObs::zeros(radius);
            }
        }
        self.env.write_global_state(&mut self.state_buf);
        self.state = PackedState::pack(&self.state_buf);
        Ok(())
    }
}

/// Everything one call to [`VecEnv::step`] produced.
#[derive(Debug, Default)]
pub struct VecStep {
    /// One joint transition per slot, in slot order.
    pub transitions: Vec<JointTransition>,
    /// Success fractions of episodes that ended during this step.
    pub finished: Vec<f64>,
}

pub struct VecEnv {
    slots: Vec<Slot>,
    source: EpisodeSource,
    exclude: Arc<HashSet<u64>>,
    radius: usize,
    pool: rayon::ThreadPool,
}

impl VecEnv {
    /// `exclude` holds layout hashes training must never see.
    pub fn new(source: EpisodeSource, n_envs: usize, seed: u64, exclude: Arc<HashSet<u64>>) -> Result<Self, HarnessError> {
        if n_envs == 0 {
            return Err(HarnessError::ConfigInvalid("n_envs must be >= 1".into()));
        }
        if let EpisodeSource::Pool { maps, .. } = &source {
            if maps.is_empty() {
                return Err(HarnessError::ConfigInvalid("empty training pool".into()));
            }
        }
        let cfg = source.config().clone();
        let radius = cfg.obs_radius;
        let mut slots = Vec::with_capacity(n_envs);
        for k in 0..n_envs {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let env = source.draw(&mut rng, &exclude)?;
            let mut slot = Slot {
                env,
                rng,
                dense: vec![vec![0.0; obs_len(radius)]; cfg.n_agents],
                compact: vec![CompactObs::zeros(radius); cfg.n_agents],
                state: PackedState::pack(&[]),
                state_buf: vec![0.0; cfg.state_len()],
            };
            slot.refresh(radius)?;
            slots.push(slot);
        }
        Ok(VecEnv { slots, source, exclude, radius, pool: thread_pool() })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.source.config().n_agents
    }

    /// Current environment of slot `k`.
    pub fn env(&self, k: usize) -> &EnvState {
        &self.slots[k].env
    }

    /// Advances every slot by one joint action: epsilon-greedy under
    /// `bundle`, or uniformly random when `bundle` is `None`. Finished
    /// episodes are replaced by fresh ones.
    pub fn step(&mut self, bundle: Option<&MixerBundle>, epsilon: f64) -> Result<VecStep, HarnessError> {
        let radius = self.radius;
        let source = &self.source;
        let exclude = &self.exclude;
        let slots = &mut self.slots;
        let results: Vec<Result<(JointTransition, Option<f64>), HarnessError>> = self.pool.install(|| {
            slots.par_iter_mut().map(|slot| step_slot(slot, bundle, epsilon, radius, source, exclude)).collect()
        });
        let mut out = VecStep { transitions: Vec::with_capacity(results.len()), finished: Vec::new() };
        for r in results {
            let (t, fin) = r?;
            out.transitions.push(t);
            out.finished.extend(fin);
        }
        Ok(out)
    }
}

fn step_slot(
    slot: &mut Slot,
    bundle: Option<&MixerBundle>,
    epsilon: f64,
    radius: usize,
    source: &EpisodeSource,
    exclude: &HashSet<u64>,
) -> Result<(JointTransition, Option<f64>), HarnessError> {
    let n = slot.env.n_agents();
    let active: Vec<bool> = slot.env.agents.iter().map(|a| a.active).collect();
    let actions: Vec<Action> = match bundle {
        Some(b) => {
            let obs: Vec<Option<&[f64]>> =
                slot.dense.iter().zip(&active).map(|(d, &a)| if a { Some(d.as_slice()) } else { None }).collect();
            b.select_actions(&obs, epsilon, &mut slot.rng)?
        }
        None => active
            .iter()
            .map(|&a| if a { Action::ALL[slot.rng.gen_range(0..Action::COUNT)] } else { Action::Stay })
            .collect(),
    };
    let outcome = slot.env.step(&actions)?;
    let obs = std::mem::replace(&mut slot.compact, vec![CompactObs::zeros(radius); n]);
    let state = std::mem::replace(&mut slot.state, PackedState::pack(&[]));
    slot.refresh(radius)?;
    let transition = JointTransition {
        obs,
        actions: actions.iter().map(|a| a.code()).collect(),
        rewards: outcome.rewards,
        next_obs: slot.compact.clone(),
        state,
        next_state: slot.state.clone(),
        done: outcome.done,
        active,
        terminal: outcome.episode_over,
    };
    let finished = if outcome.episode_over {
        let s = success_fraction(&slot.env);
        slot.env = source.draw(&mut slot.rng, exclude)?;
        slot.refresh(radius)?;
        Some(s)
    } else {
        None
    };
    Ok((transition, finished))
}
