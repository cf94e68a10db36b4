//! Policies that can be rolled out by the evaluator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::grid_world::{Action, EnvState, UNREACHABLE};
use crate::observation::{obs_len, observe_into};
use crate::qmix::MixerBundle;

pub trait Policy {
    /// One action per agent; inactive agents should get `Stay`.
    fn act(&mut self, env: &EnvState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, HarnessError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Random,
    GreedyBfs,
}

impl std::str::FromStr for BaselineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(BaselineKind::Random),
            "greedy_bfs" | "greedy-bfs" => Ok(BaselineKind::GreedyBfs),
            other => Err(format!("unknown baseline `{other}`")),
        }
    }
}

pub fn baseline_policy(kind: BaselineKind) -> Box<dyn Policy + Send> {
    match kind {
        BaselineKind::Random => Box::new(RandomPolicy),
        BaselineKind::GreedyBfs => Box::new(GreedyBfsPolicy),
    }
}

/// Uniform over all five actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&mut self, env: &EnvState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, HarnessError> {
        Ok(env
            .agents
            .iter()
            .map(|a| if a.active { Action::ALL[rng.gen_range(0..Action::COUNT)] } else { Action::Stay })
            .collect())
    }
}

/// Each agent steps to the neighbor with the smallest static distance to its
/// own goal, ignoring other agents. Ties go to the lowest action code.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyBfsPolicy;

impl GreedyBfsPolicy {
    pub fn action_for(env: &EnvState, agent: usize) -> Action {
        let a = &env.agents[agent];
        if !a.active {
            return Action::Stay;
        }
        let mut best = (Action::Stay, a.dist_field.get(a.pos));
        for action in &Action::ALL[1..] {
            if let Some(cell) = env.grid.neighbor(a.pos, *action) {
                let d = a.dist_field.get(cell);
                if d != UNREACHABLE && d < best.1 {
                    best = (*action, d);
                }
            }
        }
        best.0
    }
}

impl Policy for GreedyBfsPolicy {
    fn act(&mut self, env: &EnvState, _rng: &mut ChaCha8Rng) -> Result<Vec<Action>, HarnessError> {
        Ok((0..env.n_agents()).map(|i| Self::action_for(env, i)).collect())
    }
}

/// Epsilon-greedy policy of a trained learner (greedy when `epsilon == 0`).
pub struct LearnedPolicy<'a> {
    bundle: &'a MixerBundle,
    epsilon: f64,
    buffers: Vec<Vec<f64>>,
}

impl<'a> LearnedPolicy<'a> {
    pub fn new(bundle: &'a MixerBundle, epsilon: f64) -> Self {
        let len = obs_len(bundle.config().obs_radius);
        LearnedPolicy { bundle, epsilon, buffers: vec![vec![0.0; len]; bundle.config().n_agents] }
    }
}

impl Policy for LearnedPolicy<'_> {
    fn act(&mut self, env: &EnvState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, HarnessError> {
        let radius = self.bundle.config().obs_radius;
        for (i, buf) in self.buffers.iter_mut().enumerate() {
            if env.agents[i].active {
                observe_into(env, i, radius, buf)?;
            }
        }
        let obs: Vec<Option<&[f64]>> = self
            .buffers
            .iter()
            .zip(&env.agents)
            .map(|(b, a)| if a.active { Some(b.as_slice()) } else { None })
            .collect();
        Ok(self.bundle.select_actions(&obs, self.epsilon, rng)?)
    }
}
