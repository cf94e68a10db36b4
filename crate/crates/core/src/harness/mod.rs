//! Orchestration: run configs, map sets, training, evaluation, rendering,
//! baselines, and benchmarks.

pub mod baseline;
pub mod bench;
pub mod config;
pub mod eval;
pub mod mapset;
pub mod render;
pub mod train;
pub mod vec_env;

use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::grid_world::EnvError;
use crate::qmix::QmixError;

pub use baseline::{BaselineKind, GreedyBfsPolicy, LearnedPolicy, Policy, RandomPolicy};
pub use config::RunConfig;
pub use eval::{evaluate, EvalReport};
pub use mapset::{gen_mapset, MapKind, MapSet};
pub use train::{train, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] QmixError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint/mapset mismatch: {0}")]
    TopologyMismatch(String),
    #[error("malformed episode log: {0}")]
    MalformedLog(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Worker-thread bound from `GRIDMIX_THREADS`, defaulting to the number of
/// available cores.
pub fn thread_count() -> usize {
    std::env::var("GRIDMIX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .expect("failed to build worker pool")
}

/// Deterministic 64-bit stream key for `(seed, index)`.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over the pair
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
