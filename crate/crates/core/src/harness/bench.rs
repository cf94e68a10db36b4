//! Throughput benchmark for environment stepping and the training loop.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::vec_env::{EpisodeSource, VecEnv};
use super::{derive_seed, thread_count, HarnessError};
use crate::qmix::MixerBundle;
use crate::replay_buffer::ReplayBuffer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub threads: usize,
    pub n_envs: usize,
    pub n_agents: usize,
    /// Vectorized stepping with random actions, observation encoding and
    /// transition packing included.
    pub env_agent_steps_per_s: f64,
    /// Epsilon-greedy acting, replay pushes and learner updates.
    pub train_env_steps_per_s: f64,
    pub train_updates: u64,
}

/// Runs each phase for roughly `budget`.
pub fn bench(config: &RunConfig, budget: Duration) -> Result<BenchReport, HarnessError> {
    config.validate()?;
    let seed = config.env.seed;

    let mut venv = VecEnv::new(EpisodeSource::Random(config.env.clone()), config.n_envs, derive_seed(seed, 1), Arc::default())?;
    let mut agent_steps = 0u64;
    let start = Instant::now();
    while start.elapsed() < budget {
        for _ in 0..64 {
            let active: usize = (0..venv.len()).map(|k| venv.env(k).active_count()).sum();
            venv.step(None, 1.0)?;
            agent_steps += active as u64;
        }
    }
    let env_rate = agent_steps as f64 / start.elapsed().as_secs_f64();

    let mut bundle = MixerBundle::new(config.learner_config(), derive_seed(seed, 2))?;
    let mut replay = ReplayBuffer::new(config.buffer_capacity, derive_seed(seed, 3));
    let learn_start = config.learn_start.max(config.batch_size);
    while replay.len() < learn_start {
        for t in venv.step(None, 1.0)?.transitions {
            replay.push(t);
        }
    }
    let mut env_steps = 0u64;
    let mut since_train = 0usize;
    let mut updates = 0u64;
    let start = Instant::now();
    while start.elapsed() < budget {
        for _ in 0..16 {
            for t in venv.step(Some(&bundle), 0.1)?.transitions {
                replay.push(t);
            }
            env_steps += config.n_envs as u64;
            since_train += config.n_envs;
            while since_train >= config.train_every {
                since_train -= config.train_every;
                let batch = replay.sample(config.batch_size).expect("prefilled");
                bundle.train_step(&batch)?;
                updates += 1;
                if bundle.train_steps() % config.target_sync == 0 {
                    bundle.sync_targets();
                }
            }
        }
    }
    let train_rate = env_steps as f64 / start.elapsed().as_secs_f64();

    Ok(BenchReport {
        threads: thread_count(),
        n_envs: config.n_envs,
        n_agents: config.env.n_agents,
        env_agent_steps_per_s: env_rate,
        train_env_steps_per_s: train_rate,
        train_updates: updates,
    })
}
