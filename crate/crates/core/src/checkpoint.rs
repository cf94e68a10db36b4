//! JSON checkpoint formats.
//!
//! A network checkpoint is `{"format_version", "topology", "params"}`. A
//! learner checkpoint carries the learner metadata (mode, gamma, embed_dim,
//! step, ...) plus one network checkpoint for the shared agent net and one
//! per hypernetwork. Floats are written in shortest round-trip form and read
//! back bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense_net::{NetParams, Topology};
use crate::qmix::{LearnerConfig, MixerBundle, MixerMode, QmixError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("checkpoint topology mismatch: {0}")]
    Topology(String),
    #[error(transparent)]
    Learner(#[from] QmixError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub format_version: u32,
    pub topology: Topology,
    pub params: Vec<f64>,
}

impl NetCheckpoint {
    pub fn new(topology: &Topology, params: &[f64]) -> Self {
        NetCheckpoint { format_version: FORMAT_VERSION, topology: topology.clone(), params: params.to_vec() }
    }

    pub fn from_net(net: &NetParams) -> Self {
        Self::new(&net.topology, &net.values)
    }

    pub fn into_net(self) -> Result<NetParams, CheckpointError> {
        self.check()?;
        Ok(NetParams { topology: self.topology, values: self.params })
    }

    fn check(&self) -> Result<(), CheckpointError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(self.format_version));
        }
        if self.params.len() != self.topology.param_count() {
            return Err(CheckpointError::Topology(format!(
                "{} params for a topology of {}",
                self.params.len(),
                self.topology.param_count()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperCheckpoint {
    pub hw1: NetCheckpoint,
    pub hb1: NetCheckpoint,
    pub hw2: NetCheckpoint,
    pub hb2: NetCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerCheckpoint {
    pub format_version: u32,
    #[serde(flatten)]
    pub config: LearnerConfig,
    /// Completed train steps.
    pub step: u64,
    pub agent_net: NetCheckpoint,
    pub hypernets: Option<HyperCheckpoint>,
}

impl LearnerCheckpoint {
    pub fn from_bundle(bundle: &MixerBundle) -> Self {
        let p = bundle.online_params();
        let lay = bundle.layout();
        let hypernets = bundle.hyper_topologies().map(|h| HyperCheckpoint {
            hw1: NetCheckpoint::new(&h.hw1, &p[lay.hw1.clone()]),
            hb1: NetCheckpoint::new(&h.hb1, &p[lay.hb1.clone()]),
            hw2: NetCheckpoint::new(&h.hw2, &p[lay.hw2.clone()]),
            hb2: NetCheckpoint::new(&h.hb2, &p[lay.hb2.clone()]),
        });
        LearnerCheckpoint {
            format_version: FORMAT_VERSION,
            config: bundle.config().clone(),
            step: bundle.train_steps(),
            agent_net: NetCheckpoint::new(bundle.agent_topology(), &p[lay.agent.clone()]),
            hypernets,
        }
    }

    pub fn into_bundle(self) -> Result<MixerBundle, CheckpointError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(self.format_version));
        }
        self.agent_net.check()?;
        if self.agent_net.topology != self.config.agent_topology().map_err(QmixError::from)? {
            return Err(CheckpointError::Topology("agent net does not match learner config".into()));
        }
        let mut params = self.agent_net.params;
        match (self.config.mode, self.hypernets) {
            (MixerMode::Qmix, Some(h)) => {
                for net in [h.hw1, h.hb1, h.hw2, h.hb2] {
                    net.check()?;
                    params.extend(net.params);
                }
            }
            (MixerMode::Qmix, None) => return Err(CheckpointError::Topology("qmix checkpoint without hypernets".into())),
            (_, Some(_)) => return Err(CheckpointError::Topology("hypernets present for a mixer-free mode".into())),
            (_, None) => {}
        }
        Ok(MixerBundle::from_parts(self.config, params, self.step)?)
    }
}

pub fn save_bundle(bundle: &MixerBundle, path: &Path) -> Result<(), CheckpointError> {
    let json = serde_json::to_string(&LearnerCheckpoint::from_bundle(bundle))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<MixerBundle, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let ckpt: LearnerCheckpoint = serde_json::from_str(&text)?;
    ckpt.into_bundle()
}
