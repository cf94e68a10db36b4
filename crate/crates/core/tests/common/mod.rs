//! Shared oracles and generators for the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use gridmix::dense_net::Differentiable;
use gridmix::grid_world::{Action, EnvState};
use gridmix::observation::{obs_len, CompactObs};
use gridmix::qmix::{LearnerConfig, MixerBundle, MixerMode};
use gridmix::replay_buffer::{JointTransition, PackedState};

/// A deliberately naive re-implementation of the dynamics: plain 2-D
/// vectors, no occupancy index, and a fresh BFS for every distance query.
#[derive(Debug, Clone)]
pub struct BruteSim {
    pub size: usize,
    pub blocked: Vec<Vec<bool>>,
    pub pos: Vec<(usize, usize)>,
    pub goal: Vec<(usize, usize)>,
    pub active: Vec<bool>,
    pub t: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteOutcome {
    pub rewards: Vec<f64>,
    pub done: Vec<bool>,
    pub over: bool,
    /// `(agent, distance before, distance after)` for every executed move.
    pub moves: Vec<(usize, u32, u32)>,
}

impl BruteSim {
    pub fn from_env(env: &EnvState) -> Self {
        let size = env.grid.size();
        BruteSim {
            size,
            blocked: (0..size).map(|r| (0..size).map(|c| env.grid.is_blocked((r, c))).collect()).collect(),
            pos: env.agents.iter().map(|a| a.pos).collect(),
            goal: env.agents.iter().map(|a| a.goal).collect(),
            active: env.agents.iter().map(|a| a.active).collect(),
            t: env.t,
            horizon: env.config.horizon,
        }
    }

    pub fn distance(&self, from: (usize, usize), to: (usize, usize)) -> Option<u32> {
        let mut dist = vec![vec![None; self.size]; self.size];
        dist[to.0][to.1] = Some(0u32);
        let mut q = VecDeque::from([to]);
        while let Some((r, c)) = q.pop_front() {
            let d = dist[r][c].unwrap();
            let mut nbrs = Vec::new();
            if r > 0 {
                nbrs.push((r - 1, c));
            }
            if r + 1 < self.size {
                nbrs.push((r + 1, c));
            }
            if c > 0 {
                nbrs.push((r, c - 1));
            }
            if c + 1 < self.size {
                nbrs.push((r, c + 1));
            }
            for (nr, nc) in nbrs {
                if !self.blocked[nr][nc] && dist[nr][nc].is_none() {
                    dist[nr][nc] = Some(d + 1);
                    q.push_back((nr, nc));
                }
            }
        }
        dist[from.0][from.1]
    }

    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, actions: &[u8]) -> BruteOutcome {
        let n = self.pos.len();
        let mut out = BruteOutcome { rewards: vec![0.0; n], done: vec![false; n], over: false, moves: Vec::new() };
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let (r, c) = (self.pos[i].0 as i64, self.pos[i].1 as i64);
            let (tr, tc) = match actions[i] {
                0 => (r, c),
                1 => (r - 1, c),
                2 => (r + 1, c),
                3 => (r, c - 1),
                4 => (r, c + 1),
                other => panic!("bad action {other}"),
            };
            let inside = tr >= 0 && tc >= 0 && tr < self.size as i64 && tc < self.size as i64;
            let target = (tr as usize, tc as usize);
            let ok = (tr, tc) != (r, c)
                && inside
                && !self.blocked[target.0][target.1]
                && !(0..n).any(|j| j != i && self.active[j] && self.pos[j] == target);
            if ok {
                let before = self.distance(self.pos[i], self.goal[i]).unwrap();
                let after = self.distance(target, self.goal[i]).unwrap();
                out.moves.push((i, before, after));
                out.rewards[i] = if after < before { 0.5 } else { -1.0 };
                self.pos[i] = target;
            } else {
                out.rewards[i] = -0.5;
            }
            if self.pos[i] == self.goal[i] {
                out.done[i] = true;
                self.active[i] = false;
            }
        }
        self.t += 1;
        if self.t >= self.horizon {
            self.active.iter_mut().for_each(|a| *a = false);
        }
        out.over = self.t >= self.horizon || self.active.iter().all(|a| !a);
        out
    }
}

pub fn random_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen_range(0..5u8)).collect()
}

pub fn to_actions(codes: &[u8]) -> Vec<Action> {
    codes.iter().map(|&c| Action::from_code(c).unwrap()).collect()
}

/// Random binary observation with a plausible `1/d` center.
pub fn random_obs(rng: &mut ChaCha8Rng, radius: usize) -> Vec<f64> {
    let w = 2 * radius + 1;
    let mut d: Vec<f64> = (0..obs_len(radius)).map(|_| if rng.gen_bool(0.25) { 1.0 } else { 0.0 }).collect();
    d[w * w + radius * w + radius] = 1.0 / rng.gen_range(1..10) as f64;
    d
}

pub fn random_state(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect()
}

/// Small learner with random weights, scaled so activations spread across
/// kinks and curvature.
pub fn random_bundle(rng: &mut ChaCha8Rng, mode: MixerMode, n_agents: usize, radius: usize, state_len: usize) -> MixerBundle {
    let mut cfg = LearnerConfig::new(mode, n_agents, radius, state_len);
    cfg.hidden = vec![rng.gen_range(4..17), rng.gen_range(4..17)];
    cfg.embed_dim = rng.gen_range(2..9);
    cfg.gamma = rng.gen_range(0.5..0.999);
    let mut b = MixerBundle::new(cfg, rng.gen()).unwrap();
    let scale = rng.gen_range(0.5..3.0);
    let p: Vec<f64> = b.online_params().iter().map(|v| v * scale + rng.gen_range(-0.05..0.05)).collect();
    b.set_online_params(&p).unwrap();
    // decouple the target network from the online one
    let t: Vec<f64> = p.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
    let saved = b.online_params().to_vec();
    b.set_online_params(&t).unwrap();
    b.sync_targets();
    b.set_online_params(&saved).unwrap();
    b
}

pub fn random_transition(rng: &mut ChaCha8Rng, n: usize, radius: usize, state_len: usize) -> JointTransition {
    let active: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.85)).collect();
    let done: Vec<bool> = active.iter().map(|&a| a && rng.gen_bool(0.2)).collect();
    let obs = |rng: &mut ChaCha8Rng, on: bool| {
        if on {
            CompactObs::pack(&random_obs(rng, radius), radius)
        } else {
            CompactObs::zeros(radius)
        }
    };
    JointTransition {
        obs: active.iter().map(|&a| obs(rng, a)).collect(),
        actions: active.iter().map(|&a| if a { rng.gen_range(0..5) } else { 0 }).collect(),
        rewards: active.iter().map(|&a| if a { [0.5, -0.5, -1.0][rng.gen_range(0..3)] } else { 0.0 }).collect(),
        next_obs: active.iter().zip(&done).map(|(&a, &d)| obs(rng, a && !d)).collect(),
        state: PackedState::pack(&random_state(rng, state_len)),
        next_state: PackedState::pack(&random_state(rng, state_len)),
        done,
        active,
        terminal: rng.gen_bool(0.15),
    }
}

/// The full training loss as a function of the online parameters, with the
/// regression targets held fixed.
pub struct LossFn<'a> {
    pub bundle: &'a mut MixerBundle,
    pub batch: &'a [&'a JointTransition],
    pub targets: Vec<f64>,
}

impl<'a> LossFn<'a> {
    pub fn new(bundle: &'a mut MixerBundle, batch: &'a [&'a JointTransition]) -> Self {
        let targets = bundle.td_targets(batch).unwrap();
        LossFn { bundle, batch, targets }
    }
}

impl Differentiable for LossFn<'_> {
    fn loss(&mut self, params: &[f64]) -> f64 {
        self.bundle.probe_loss(params, self.batch, &self.targets).unwrap().0
    }

    fn gradient(&mut self, params: &[f64]) -> Vec<f64> {
        self.bundle.probe_gradient(params, self.batch, &self.targets).unwrap()
    }

    fn region(&mut self, params: &[f64]) -> u64 {
        self.bundle.probe_loss(params, self.batch, &self.targets).unwrap().1
    }
}

/// Pearson chi-square p-value of `counts` against the uniform distribution.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}
