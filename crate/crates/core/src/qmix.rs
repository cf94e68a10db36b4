//! Value-factorized multi-agent Q-learning.
//!
//! A [`MixerBundle`] holds one agent Q-network shared by all agents, the four
//! hypernetworks that generate the mixing network's weights from the global
//! state, target copies of both, and the optimizer state. All trainable
//! parameters sit in a single flat vector; the target copy has the same
//! layout.
//!
//! Mixing, per sample with agent values `q` (length `n`) and state `s`:
//!
//! ```text
//! W1 = |hw1(s)| reshaped n x E     b1 = hb1(s)
//! W2 = |hw2(s)|                    b2 = hb2(s)   (two layers, ReLU hidden)
//! Q_tot = ELU(q W1 + b1) . W2 + b2
//! ```
//!
//! `W1` and `W2` are elementwise non-negative and ELU is increasing, so
//! `Q_tot` is non-decreasing in every `q_i`. Per-agent greedy actions
//! therefore maximize `Q_tot` jointly.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense_net::{self, backward_into, forward_into, Activation, AdamState, NetError, Tape, Topology};
use crate::grid_world::Action;
use crate::observation::obs_len;
use crate::replay_buffer::JointTransition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmixError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("operation requires {required:?} mode, bundle is {actual:?}")]
    WrongMode { required: MixerMode, actual: MixerMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixerMode {
    Qmix,
    Vdn,
    Iql,
}

impl std::str::FromStr for MixerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qmix" => Ok(MixerMode::Qmix),
            "vdn" => Ok(MixerMode::Vdn),
            "iql" => Ok(MixerMode::Iql),
            other => Err(format!("unknown mixer mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub mode: MixerMode,
    pub n_agents: usize,
    pub obs_radius: usize,
    /// Flattened global state length (`3 size^2`).
    pub state_len: usize,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    pub gamma: f64,
    pub lr: f64,
    pub grad_clip: f64,
    pub mixer_activation: Activation,
}

impl LearnerConfig {
    pub fn new(mode: MixerMode, n_agents: usize, obs_radius: usize, state_len: usize) -> Self {
        LearnerConfig {
            mode,
            n_agents,
            obs_radius,
            state_len,
            hidden: vec![64, 64],
            embed_dim: 32,
            gamma: 0.99,
            lr: 5e-4,
            grad_clip: 10.0,
            mixer_activation: Activation::Elu,
        }
    }

    pub fn obs_len(&self) -> usize {
        obs_len(self.obs_radius)
    }

    pub fn agent_topology(&self) -> Result<Topology, NetError> {
        let mut sizes = vec![self.obs_len()];
        sizes.extend(&self.hidden);
        sizes.push(Action::COUNT);
        Topology::mlp(&sizes, Activation::Relu, Activation::Identity)
    }
}

/// Topologies of the four hypernetworks.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperTopologies {
    pub hw1: Topology,
    pub hb1: Topology,
    pub hw2: Topology,
    pub hb2: Topology,
}

impl HyperTopologies {
    pub fn new(state_len: usize, n_agents: usize, embed: usize) -> Result<Self, NetError> {
        Ok(HyperTopologies {
            hw1: Topology::new(vec![state_len, n_agents * embed], vec![Activation::Abs])?,
            hb1: Topology::new(vec![state_len, embed], vec![Activation::Identity])?,
            hw2: Topology::new(vec![state_len, embed], vec![Activation::Abs])?,
            hb2: Topology::new(vec![state_len, embed, 1], vec![Activation::Relu, Activation::Identity])?,
        })
    }
}

/// Where each network's parameters live inside the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub agent: Range<usize>,
    pub hw1: Range<usize>,
    pub hb1: Range<usize>,
    pub hw2: Range<usize>,
    pub hb2: Range<usize>,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.hb2.end
    }
}

/// Mixing-network weights generated for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeights {
    pub n_agents: usize,
    pub embed: usize,
    /// `n_agents x embed`, agent-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MixingWeights {
    /// Evaluates the mixer; returns `(q_tot, hidden pre-activations)`.
    pub fn q_tot(&self, qs: &[f64], act: Activation) -> (f64, Vec<f64>) {
        let e = self.embed;
        let mut pre = self.b1.clone();
        for (i, &q) in qs.iter().enumerate() {
            for (p, &w) in pre.iter_mut().zip(&self.w1[i * e..(i + 1) * e]) {
                *p += q * w;
            }
        }
        let q_tot = pre.iter().zip(&self.w2).map(|(&p, &w)| act.apply(p) * w).sum::<f64>() + self.b2;
        (q_tot, pre)
    }
}

/// Which parameter copy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Online,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    /// Per-sample TD errors `Q - y` (QMIX/VDN), or per sample-agent pair in
    /// sample-major order for IQL (0 for masked agents).
    pub td_errors: Vec<f64>,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub q_tot_mean: f64,
}

struct Scratch {
    agent_tapes: Vec<Tape>,
    hw1: Tape,
    hb1: Tape,
    hw2: Tape,
    hb2: Tape,
    obs: Vec<f64>,
    state: Vec<f64>,
}

pub struct MixerBundle {
    config: LearnerConfig,
    agent_topo: Topology,
    hyper: Option<HyperTopologies>,
    layout: ParamLayout,
    online: Vec<f64>,
    target: Vec<f64>,
    adam: AdamState,
    train_steps: u64,
    scratch: Scratch,
}

impl MixerBundle {
    /// Builds a freshly initialized learner. Target parameters start as an
    /// exact copy of the online ones.
    pub fn new(config: LearnerConfig, seed: u64) -> Result<Self, QmixError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (agent_topo, hyper, layout) = Self::layout_for(&config)?;
        let mut online = Vec::with_capacity(layout.total());
        dense_net::init_into(&agent_topo, &mut rng, &mut online);
        if let Some(h) = &hyper {
            for topo in [&h.hw1, &h.hb1, &h.hw2, &h.hb2] {
                dense_net::init_into(topo, &mut rng, &mut online);
            }
        }
        Self::from_parts(config, online, 0)
    }

    /// Rebuilds a learner around given online parameters (checkpoint load).
    pub fn from_parts(config: LearnerConfig, online: Vec<f64>, train_steps: u64) -> Result<Self, QmixError> {
        let (agent_topo, hyper, layout) = Self::layout_for(&config)?;
        if online.len() != layout.total() {
            return Err(QmixError::ShapeMismatch(format!(
                "{} parameters, layout needs {}",
                online.len(),
                layout.total()
            )));
        }
        let scratch = Scratch {
            agent_tapes: (0..config.n_agents).map(|_| Tape::new(&agent_topo)).collect(),
            hw1: Tape::new(hyper.as_ref().map_or(&agent_topo, |h| &h.hw1)),
            hb1: Tape::new(hyper.as_ref().map_or(&agent_topo, |h| &h.hb1)),
            hw2: Tape::new(hyper.as_ref().map_or(&agent_topo, |h| &h.hw2)),
            hb2: Tape::new(hyper.as_ref().map_or(&agent_topo, |h| &h.hb2)),
            obs: vec![0.0; config.obs_len()],
            state: vec![0.0; config.state_len],
        };
        let adam = AdamState::new(online.len(), config.lr);
        let mut bundle = MixerBundle {
            target: online.clone(),
            online,
            config,
            agent_topo,
            hyper,
            layout,
            adam,
            train_steps,
            scratch,
        };
        bundle.sync_targets();
        Ok(bundle)
    }

    fn layout_for(config: &LearnerConfig) -> Result<(Topology, Option<HyperTopologies>, ParamLayout), QmixError> {
        if config.n_agents == 0 {
            return Err(QmixError::ShapeMismatch("n_agents must be >= 1".into()));
        }
        let agent_topo = config.agent_topology()?;
        let a = agent_topo.param_count();
        let hyper = match config.mode {
            MixerMode::Qmix => Some(HyperTopologies::new(config.state_len, config.n_agents, config.embed_dim)?),
            _ => None,
        };
        let mut cursor = a;
        let mut next = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let layout = match &hyper {
            Some(h) => ParamLayout {
                agent: 0..a,
                hw1: next(h.hw1.param_count()),
                hb1: next(h.hb1.param_count()),
                hw2: next(h.hw2.param_count()),
                hb2: next(h.hb2.param_count()),
            },
            None => ParamLayout { agent: 0..a, hw1: a..a, hb1: a..a, hw2: a..a, hb2: a..a },
        };
        Ok((agent_topo, hyper, layout))
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn mode(&self) -> MixerMode {
        self.config.mode
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn agent_topology(&self) -> &Topology {
        &self.agent_topo
    }

    pub fn hyper_topologies(&self) -> Option<&HyperTopologies> {
        self.hyper.as_ref()
    }

    pub fn online_params(&self) -> &[f64] {
        &self.online
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    pub fn set_online_params(&mut self, params: &[f64]) -> Result<(), QmixError> {
        if params.len() != self.online.len() {
            return Err(QmixError::ShapeMismatch("parameter vector length".into()));
        }
        self.online.copy_from_slice(params);
        Ok(())
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn set_train_steps(&mut self, steps: u64) {
        self.train_steps = steps;
    }

    fn params(&self, which: Which) -> &[f64] {
        match which {
            Which::Online => &self.online,
            Which::Target => &self.target,
        }
    }

    /// Hard update: target := online.
    pub fn sync_targets(&mut self) {
        self.target.copy_from_slice(&self.online);
    }

    /// Q-values of all five actions for one flattened observation.
    pub fn agent_q_values(&self, which: Which, obs: &[f64]) -> Result<[f64; Action::COUNT], QmixError> {
        let mut tape = Tape::new(&self.agent_topo);
        let out = forward_into(&self.agent_topo, &self.params(which)[self.layout.agent.clone()], obs, &mut tape)?;
        let mut q = [0.0; Action::COUNT];
        q.copy_from_slice(out);
        Ok(q)
    }

    /// Mixing weights generated from `state` by the chosen hypernetworks.
    pub fn mixing_weights(&self, which: Which, state: &[f64]) -> Result<MixingWeights, QmixError> {
        let h = self.hyper.as_ref().ok_or(QmixError::WrongMode { required: MixerMode::Qmix, actual: self.config.mode })?;
        let p = self.params(which);
        let run = |topo: &Topology, range: &Range<usize>| -> Result<Vec<f64>, QmixError> {
            let mut tape = Tape::new(topo);
            Ok(forward_into(topo, &p[range.clone()], state, &mut tape)?.to_vec())
        };
        Ok(MixingWeights {
            n_agents: self.config.n_agents,
            embed: self.config.embed_dim,
            w1: run(&h.hw1, &self.layout.hw1)?,
            b1: run(&h.hb1, &self.layout.hb1)?,
            w2: run(&h.hw2, &self.layout.hw2)?,
            b2: run(&h.hb2, &self.layout.hb2)?[0],
        })
    }

    /// `Q_tot` for given agent values. VDN sums; QMIX mixes; IQL has no mixer.
    pub fn mix(&self, which: Which, agent_qs: &[f64], state: &[f64]) -> Result<f64, QmixError> {
        if agent_qs.len() != self.config.n_agents {
            return Err(QmixError::ShapeMismatch(format!(
                "{} agent values for {} agents",
                agent_qs.len(),
                self.config.n_agents
            )));
        }
        match self.config.mode {
            MixerMode::Vdn => Ok(agent_qs.iter().sum()),
            MixerMode::Qmix => {
                if state.len() != self.config.state_len {
                    return Err(QmixError::ShapeMismatch("state length".into()));
                }
                let w = self.mixing_weights(which, state)?;
                Ok(w.q_tot(agent_qs, self.config.mixer_activation).0)
            }
            MixerMode::Iql => Err(QmixError::WrongMode { required: MixerMode::Qmix, actual: MixerMode::Iql }),
        }
    }

    /// Epsilon-greedy actions. `obs[i]` is `None` for inactive agents, which
    /// always stay. Greedy ties go to the lowest action code.
    pub fn select_actions<R: Rng + ?Sized>(
        &self,
        obs: &[Option<&[f64]>],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Vec<Action>, QmixError> {
        obs.iter()
            .map(|o| match o {
                None => Ok(Action::Stay),
                Some(o) => {
                    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                        Ok(Action::ALL[rng.gen_range(0..Action::COUNT)])
                    } else {
                        Ok(Action::ALL[argmax(&self.agent_q_values(Which::Online, o)?)])
                    }
                }
            })
            .collect()
    }

    /// Regression targets for a batch, computed from the target networks.
    ///
    /// Returns one value per sample for QMIX and VDN, and one per
    /// (sample, agent) pair in sample-major order for IQL.
    pub fn td_targets(&mut self, batch: &[&JointTransition]) -> Result<Vec<f64>, QmixError> {
        let n = self.config.n_agents;
        let gamma = self.config.gamma;
        let radius = self.config.obs_radius;
        let mut out = Vec::with_capacity(batch.len() * if self.config.mode == MixerMode::Iql { n } else { 1 });
        let mut next_qs = vec![0.0; n];
        for t in batch {
            self.check_transition(t)?;
            for (i, q) in next_qs.iter_mut().enumerate() {
                *q = 0.0;
                if t.next_active(i) {
                    t.next_obs[i].unpack_into(radius, &mut self.scratch.obs);
                    let tape = &mut self.scratch.agent_tapes[i];
                    let qv = forward_into(&self.agent_topo, &self.target[self.layout.agent.clone()], &self.scratch.obs, tape)?;
                    *q = qv[argmax(qv)];
                }
            }
            match self.config.mode {
                MixerMode::Iql => {
                    for ((&on, &r), &q) in t.active.iter().zip(&t.rewards).zip(&next_qs) {
                        out.push(if on { r + gamma * q } else { 0.0 });
                    }
                }
                MixerMode::Vdn => {
                    let cont = if t.terminal { 0.0 } else { next_qs.iter().sum::<f64>() };
                    out.push(t.team_reward() + gamma * cont);
                }
                MixerMode::Qmix => {
                    let cont = if t.terminal {
                        0.0
                    } else {
                        t.next_state.unpack_into(&mut self.scratch.state);
                        let state = std::mem::take(&mut self.scratch.state);
                        let v = self.mix(Which::Target, &next_qs, &state);
                        self.scratch.state = state;
                        v?
                    };
                    out.push(t.team_reward() + gamma * cont);
                }
            }
        }
        Ok(out)
    }

    fn check_transition(&self, t: &JointTransition) -> Result<(), QmixError> {
        let n = self.config.n_agents;
        if t.actions.len() != n || t.rewards.len() != n || t.obs.len() != n || t.next_obs.len() != n || t.active.len() != n || t.done.len() != n {
            return Err(QmixError::ShapeMismatch(format!("transition is not for {n} agents")));
        }
        if self.config.mode == MixerMode::Qmix && (t.state.len() != self.config.state_len || t.next_state.len() != self.config.state_len) {
            return Err(QmixError::ShapeMismatch("transition state length".into()));
        }
        Ok(())
    }

    /// Loss of the online parameters against precomputed `targets`, with its
    /// gradient when `grad` is given (accumulated into it). Returns the
    /// report (grad_norm left at 0) and a hash of the activation pattern.
    fn evaluate(
        &mut self,
        params: &[f64],
        batch: &[&JointTransition],
        targets: &[f64],
        mut grad: Option<&mut [f64]>,
        hash_region: bool,
    ) -> Result<(LossReport, u64), QmixError> {
        if batch.is_empty() {
            return Err(QmixError::EmptyBatch);
        }
        let n = self.config.n_agents;
        let b = batch.len() as f64;
        let radius = self.config.obs_radius;
        let mode = self.config.mode;
        let act = self.config.mixer_activation;
        let embed = self.config.embed_dim;
        let lay = self.layout.clone();
        let mut region = 0xcbf2_9ce4_8422_2325u64;
        let mut loss = 0.0;
        let mut q_sum = 0.0;
        let mut td_errors = Vec::with_capacity(targets.len());
        let mut qs = vec![0.0; n];
        let mut out_grad = [0.0; Action::COUNT];

        for (s, t) in batch.iter().enumerate() {
            self.check_transition(t)?;
            for i in 0..n {
                qs[i] = 0.0;
                if t.active[i] {
                    t.obs[i].unpack_into(radius, &mut self.scratch.obs);
                    let tape = &mut self.scratch.agent_tapes[i];
                    let qv = forward_into(&self.agent_topo, &params[lay.agent.clone()], &self.scratch.obs, tape)?;
                    qs[i] = qv[t.actions[i] as usize];
                    if hash_region {
                        tape.hash_region(&self.agent_topo, &mut region);
                    }
                }
            }
            // dLoss/dq_i for each agent slot
            let mut dq = vec![0.0; n];
            match mode {
                MixerMode::Iql => {
                    for i in 0..n {
                        let delta = if t.active[i] { qs[i] - targets[s * n + i] } else { 0.0 };
                        td_errors.push(delta);
                        loss += delta * delta / b;
                        dq[i] = 2.0 * delta / b;
                    }
                    q_sum += qs.iter().sum::<f64>();
                }
                MixerMode::Vdn => {
                    let q_tot: f64 = qs.iter().sum();
                    let delta = q_tot - targets[s];
                    td_errors.push(delta);
                    loss += delta * delta / b;
                    q_sum += q_tot;
                    dq.iter_mut().for_each(|g| *g = 2.0 * delta / b);
                }
                MixerMode::Qmix => {
                    let h = self.hyper.as_ref().expect("qmix bundle has hypernets");
                    let sc = &mut self.scratch;
                    t.state.unpack_into(&mut sc.state);
                    let w1 = forward_into(&h.hw1, &params[lay.hw1.clone()], &sc.state, &mut sc.hw1)?.to_vec();
                    let b1 = forward_into(&h.hb1, &params[lay.hb1.clone()], &sc.state, &mut sc.hb1)?.to_vec();
                    let w2 = forward_into(&h.hw2, &params[lay.hw2.clone()], &sc.state, &mut sc.hw2)?.to_vec();
                    let b2 = forward_into(&h.hb2, &params[lay.hb2.clone()], &sc.state, &mut sc.hb2)?[0];
                    if hash_region {
                        sc.hw1.hash_region(&h.hw1, &mut region);
                        sc.hw2.hash_region(&h.hw2, &mut region);
                        sc.hb2.hash_region(&h.hb2, &mut region);
                    }
                    let mw = MixingWeights { n_agents: n, embed, w1, b1, w2, b2 };
                    let (q_tot, pre) = mw.q_tot(&qs, act);
                    let delta = q_tot - targets[s];
                    td_errors.push(delta);
                    loss += delta * delta / b;
                    q_sum += q_tot;

                    if let Some(g) = grad.as_deref_mut() {
                        let g_out = 2.0 * delta / b;
                        let post: Vec<f64> = pre.iter().map(|&p| act.apply(p)).collect();
                        let d_w2: Vec<f64> = post.iter().map(|&h| g_out * h).collect();
                        let d_pre: Vec<f64> = pre
                            .iter()
                            .zip(&post)
                            .zip(&mw.w2)
                            .map(|((&p, &o), &w)| g_out * w * act.derivative(p, o))
                            .collect();
                        let mut d_w1 = vec![0.0; n * embed];
                        for i in 0..n {
                            let row = &mw.w1[i * embed..(i + 1) * embed];
                            dq[i] = row.iter().zip(&d_pre).map(|(w, d)| w * d).sum();
                            for (dw, &d) in d_w1[i * embed..(i + 1) * embed].iter_mut().zip(&d_pre) {
                                *dw = d * qs[i];
                            }
                        }
                        backward_into(&h.hw1, &params[lay.hw1.clone()], &sc.hw1, &d_w1, &mut g[lay.hw1.clone()], None)?;
                        backward_into(&h.hb1, &params[lay.hb1.clone()], &sc.hb1, &d_pre, &mut g[lay.hb1.clone()], None)?;
                        backward_into(&h.hw2, &params[lay.hw2.clone()], &sc.hw2, &d_w2, &mut g[lay.hw2.clone()], None)?;
                        backward_into(&h.hb2, &params[lay.hb2.clone()], &sc.hb2, &[g_out], &mut g[lay.hb2.clone()], None)?;
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                for i in 0..n {
                    if !t.active[i] || dq[i] == 0.0 {
                        continue;
                    }
                    out_grad.fill(0.0);
                    out_grad[t.actions[i] as usize] = dq[i];
                    backward_into(
                        &self.agent_topo,
                        &params[lay.agent.clone()],
                        &self.scratch.agent_tapes[i],
                        &out_grad,
                        &mut g[lay.agent.clone()],
                        None,
                    )?;
                }
            }
        }
        let q_tot_mean = match mode {
            MixerMode::Iql => q_sum / (b * n as f64),
            _ => q_sum / b,
        };
        Ok((LossReport { loss, td_errors, grad_norm: 0.0, q_tot_mean }, region))
    }

    /// Loss and its exact gradient w.r.t. the online parameters, without
    /// updating anything.
    pub fn loss_and_gradient(&mut self, batch: &[&JointTransition]) -> Result<(LossReport, Vec<f64>), QmixError> {
        let targets = self.td_targets(batch)?;
        let params = std::mem::take(&mut self.online);
        let mut grad = vec![0.0; params.len()];
        let res = self.evaluate(&params, batch, &targets, Some(&mut grad), false);
        self.online = params;
        let (mut report, _) = res?;
        report.grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok((report, grad))
    }

    /// Loss of arbitrary online parameters against fixed targets, plus the
    /// activation-region hash. Used by gradient checks.
    pub fn probe_loss(&mut self, params: &[f64], batch: &[&JointTransition], targets: &[f64]) -> Result<(f64, u64), QmixError> {
        let (r, region) = self.evaluate(params, batch, targets, None, true)?;
        Ok((r.loss, region))
    }

    /// Gradient of [`Self::probe_loss`].
    pub fn probe_gradient(&mut self, params: &[f64], batch: &[&JointTransition], targets: &[f64]) -> Result<Vec<f64>, QmixError> {
        let mut grad = vec![0.0; params.len()];
        self.evaluate(params, batch, targets, Some(&mut grad), false)?;
        Ok(grad)
    }

    /// One optimization step on `batch`. Target parameters are untouched.
    pub fn train_step(&mut self, batch: &[&JointTransition]) -> Result<LossReport, QmixError> {
        let (mut report, mut grad) = self.loss_and_gradient(batch)?;
        report.grad_norm = dense_net::clip_global_norm(&mut grad, self.config.grad_clip);
        self.adam.step(&mut self.online, &grad)?;
        self.train_steps += 1;
        Ok(report)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
