//! Multi-agent grid pathfinding under partial observability, with a
//! value-factorized Q-learner (QMIX) and VDN / independent-DQN ablations.
//!
//! Module map:
//! - [`grid_world`]: map generation, dynamics, rewards, map records.
//! - [`observation`]: egocentric 4-channel observations.
//! - [`dense_net`]: dense networks, backprop, optimizer, gradient check.
//! - [`replay_buffer`]: joint-transition replay.
//! - [`qmix`]: the learner (shared agent net, hypernetwork mixer, targets).
//! - [`checkpoint`]: on-disk network and learner formats.
//! - [`harness`]: training loop, evaluation, map sets, rendering, baselines.

pub mod checkpoint;
pub mod dense_net;
pub mod grid_world;
pub mod harness;
pub mod observation;
pub mod qmix;
pub mod replay_buffer;

pub use grid_world::{generate, Action, EnvConfig, EnvError, EnvState, MapRecord};
pub use qmix::{LearnerConfig, MixerBundle, MixerMode};
