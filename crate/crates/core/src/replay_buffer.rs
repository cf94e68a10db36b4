//! Fixed-capacity ring buffer of joint transitions with uniform sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::observation::CompactObs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("buffer holds {size} transitions, batch of {batch} requested")]
    Underfilled { size: usize, batch: usize },
}

/// One environment step for all agents.
///
/// Observations and global states are stored bit-packed; see [`CompactObs`].
/// Slots of agents inactive at step start hold zeroed observations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransition {
    pub obs: Vec<CompactObs>,
    pub actions: Vec<u8>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<CompactObs>,
    pub state: PackedState,
    pub next_state: PackedState,
    /// Agent reached its goal during this step.
    pub done: Vec<bool>,
    /// Agent was active when the step began.
    pub active: Vec<bool>,
    /// The episode ended with this step (all finished or truncated).
    pub terminal: bool,
}

impl JointTransition {
    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    /// Whether agent `i` is still active at the start of the next step.
    pub fn next_active(&self, i: usize) -> bool {
        self.active[i] && !self.done[i] && !self.terminal
    }

    /// Sum of rewards over agents active at step start.
    pub fn team_reward(&self) -> f64 {
        self.rewards.iter().zip(&self.active).filter(|(_, &a)| a).map(|(r, _)| r).sum()
    }
}

/// Global state tensor packed as bits (every entry is 0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PackedState {
    len: usize,
    bits: Vec<u64>,
}

impl PackedState {
    pub fn pack(dense: &[f64]) -> Self {
        let mut bits = vec![0u64; dense.len().div_ceil(64)];
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        PackedState { len: dense.len(), bits }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn unpack_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.len);
        for (i, o) in out.iter_mut().enumerate() {
            *o = ((self.bits[i / 64] >> (i % 64)) & 1) as f64;
        }
    }

    pub fn unpack(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.unpack_into(&mut out);
        out
    }
}

pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<JointTransition>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity >= 1, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Next write position.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn get(&self, index: usize) -> Option<&JointTransition> {
        self.items.get(index)
    }

    pub fn push(&mut self, transition: JointTransition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices(&mut self, batch: usize) -> Result<Vec<usize>, ReplayError> {
        if self.items.len() < batch || self.items.is_empty() {
            return Err(ReplayError::Underfilled { size: self.items.len(), batch });
        }
        let n = self.items.len();
        Ok((0..batch).map(|_| self.rng.gen_range(0..n)).collect())
    }

    pub fn sample(&mut self, batch: usize) -> Result<Vec<&JointTransition>, ReplayError> {
        let idx = self.sample_indices(batch)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }
}
