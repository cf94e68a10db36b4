//! Greedy evaluation on a fixed map set.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::{LearnedPolicy, Policy};
use super::mapset::MapSet;
use super::{derive_seed, HarnessError};
use crate::grid_world::EnvState;
use crate::qmix::MixerBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Success fraction per map, averaged over repeats.
    pub per_map: Vec<f64>,
    /// Mean success over all maps and repeats.
    pub mean: f64,
    /// Mean success of each repeat.
    pub runs: Vec<f64>,
    /// Environment steps trained so far (0 outside training).
    pub steps: u64,
    pub wall_s: f64,
}

/// Fraction of agents standing on their goal.
pub fn success_fraction(env: &EnvState) -> f64 {
    let n = env.n_agents();
    env.agents.iter().filter(|a| a.pos == a.goal).count() as f64 / n as f64
}

/// Plays one episode to completion. When `log` is given, each joint action
/// is appended as a row of action codes.
pub fn rollout(
    mut env: EnvState,
    policy: &mut dyn Policy,
    rng: &mut ChaCha8Rng,
    mut log: Option<&mut Vec<Vec<u8>>>,
) -> Result<f64, HarnessError> {
    while !env.is_over() {
        let actions = policy.act(&env, rng)?;
        if let Some(log) = log.as_deref_mut() {
            log.push(actions.iter().map(|a| a.code()).collect());
        }
        env.step(&actions)?;
    }
    Ok(success_fraction(&env))
}

/// Rolls `policy` out `repeats` times on every map. Repeat `r` of map `m`
/// draws from its own RNG stream keyed by `(seed, m, r)`.
pub fn evaluate(policy: &mut dyn Policy, maps: &MapSet, repeats: usize, seed: u64) -> Result<EvalReport, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::ConfigInvalid("repeats must be >= 1".into()));
    }
    if maps.is_empty() {
        return Err(HarnessError::ConfigInvalid("empty map set".into()));
    }
    let start = Instant::now();
    let mut grid = vec![vec![0.0; maps.len()]; repeats];
    for (m, rec_seed) in (0..maps.len()).zip(0u64..) {
        for (r, row) in grid.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, rec_seed), r as u64));
            row[m] = rollout(maps.episode(m)?, policy, &mut rng, None)?;
        }
    }
    let per_map: Vec<f64> = (0..maps.len()).map(|m| grid.iter().map(|row| row[m]).sum::<f64>() / repeats as f64).collect();
    let runs: Vec<f64> = grid.iter().map(|row| row.iter().sum::<f64>() / maps.len() as f64).collect();
    let mean = runs.iter().sum::<f64>() / repeats as f64;
    Ok(EvalReport { per_map, mean, runs, steps: 0, wall_s: start.elapsed().as_secs_f64() })
}

/// Rejects a learner whose agent network cannot run on `maps`. Greedy
/// acting needs only the agent network, so the grid size may differ from
/// the training grid.
pub fn check_compatible(bundle: &MixerBundle, maps: &MapSet) -> Result<(), HarnessError> {
    let c = bundle.config();
    let e = &maps.config;
    if c.n_agents != e.n_agents {
        return Err(HarnessError::TopologyMismatch(format!("learner has {} agents, maps have {}", c.n_agents, e.n_agents)));
    }
    if c.obs_radius != e.obs_radius {
        return Err(HarnessError::TopologyMismatch(format!("learner radius {}, maps radius {}", c.obs_radius, e.obs_radius)));
    }
    Ok(())
}

/// Greedy (epsilon = 0) evaluation of a learner.
pub fn evaluate_bundle(bundle: &MixerBundle, maps: &MapSet, repeats: usize, seed: u64) -> Result<EvalReport, HarnessError> {
    check_compatible(bundle, maps)?;
    evaluate(&mut LearnedPolicy::new(bundle, 0.0), maps, repeats, seed)
}
