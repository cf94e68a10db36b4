//! Multi-agent grid environment: generation, dynamics, and rewards.
//!
//! Coordinates are `(row, col)` with row 0 at the top and col 0 at the left.
//! `Up` decreases the row. Agents are resolved one at a time in ascending
//! index order; an agent that reaches its goal is removed from the map
//! immediately, so later agents in the same step can enter its old cell.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance value for blocked or unreachable cells.
pub const UNREACHABLE: u32 = u32::MAX;

/// Number of whole-map resampling attempts before generation gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 64;

pub const REWARD_PROGRESS: f64 = 0.5;
pub const REWARD_STAY: f64 = -0.5;
pub const REWARD_REGRESS: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("map generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
    #[error("expected {expected} actions, got {got}")]
    InvalidActionCount { expected: usize, got: usize },
    #[error("episode already over (t = {0})")]
    EpisodeOver(usize),
    #[error("agent {0} is not active")]
    InactiveAgent(usize),
    #[error("invalid map record: {0}")]
    InvalidRecord(String),
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub size: usize,
    pub density: f64,
    pub n_agents: usize,
    pub obs_radius: usize,
    pub horizon: usize,
    #[serde(default)]
    pub goal_dist: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if self.size < 2 {
            return bad("size must be >= 2");
        }
        if !(0.0..1.0).contains(&self.density) {
            return bad("density must lie in [0, 1)");
        }
        if self.n_agents < 1 {
            return bad("n_agents must be >= 1");
        }
        if self.obs_radius < 1 || self.obs_radius > self.size {
            return bad("obs_radius must lie in [1, size]");
        }
        if self.horizon < 1 {
            return bad("horizon must be >= 1");
        }
        if let Some(d) = self.goal_dist {
            if d < 1 || d > self.size * self.size {
                return bad("goal_dist must lie in [1, size^2]");
            }
        }
        Ok(())
    }

    /// `floor(density * size^2)`.
    pub fn obstacle_count(&self) -> usize {
        (self.density * (self.size * self.size) as f64).floor() as usize
    }

    /// Flattened length of one agent observation, `4 (2R+1)^2`.
    pub fn obs_len(&self) -> usize {
        crate::observation::obs_len(self.obs_radius)
    }

    /// Flattened length of the global state tensor, `3 size^2`.
    pub fn state_len(&self) -> usize {
        3 * self.size * self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Stay = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Stay, Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 5;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Action> {
        Action::ALL.get(code as usize).copied()
    }

    /// Row/col offset of the move.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Stay => (0, 0),
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// Static obstacle field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    size: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    pub fn empty(size: usize) -> Self {
        GridMap { size, blocked: vec![false; size * size] }
    }

    pub fn from_blocked(size: usize, cells: &[Cell]) -> Result<Self, EnvError> {
        let mut map = GridMap::empty(size);
        for &(r, c) in cells {
            if r >= size || c >= size {
                return Err(EnvError::InvalidRecord(format!("blocked cell ({r}, {c}) off grid")));
            }
            map.blocked[r * size + c] = true;
        }
        Ok(map)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.0 * self.size + cell.1
    }

    #[inline]
    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.index(cell)]
    }

    pub fn set_blocked(&mut self, cell: Cell, value: bool) {
        let i = self.index(cell);
        self.blocked[i] = value;
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    pub fn blocked_cells(&self) -> Vec<Cell> {
        (0..self.size * self.size)
            .filter(|&i| self.blocked[i])
            .map(|i| (i / self.size, i % self.size))
            .collect()
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.size * self.size)
            .filter(|&i| !self.blocked[i])
            .map(|i| (i / self.size, i % self.size))
            .collect()
    }

    /// Neighbor of `cell` under `action`, or `None` when it leaves the grid.
    #[inline]
    pub fn neighbor(&self, cell: Cell, action: Action) -> Option<Cell> {
        let (dr, dc) = action.delta();
        let r = cell.0 as isize + dr;
        let c = cell.1 as isize + dc;
        if r < 0 || c < 0 || r >= self.size as isize || c >= self.size as isize {
            None
        } else {
            Some((r as usize, c as usize))
        }
    }
}

/// Per-cell BFS distance to a fixed goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    size: usize,
    dist: Vec<u32>,
}

impl DistanceField {
    #[inline]
    pub fn get(&self, cell: Cell) -> u32 {
        self.dist[cell.0 * self.size + cell.1]
    }

    pub fn is_reachable(&self, cell: Cell) -> bool {
        self.get(cell) != UNREACHABLE
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }
}

/// 4-connected BFS from `goal` over free cells. Blocked and unreachable
/// cells hold [`UNREACHABLE`]; the goal holds 0.
pub fn bfs_distance_field(grid: &GridMap, goal: Cell) -> DistanceField {
    let n = grid.size;
    let mut dist = vec![UNREACHABLE; n * n];
    if grid.is_blocked(goal) {
        return DistanceField { size: n, dist };
    }
    let mut queue = VecDeque::with_capacity(n * n);
    dist[grid.index(goal)] = 0;
    queue.push_back(goal);
    while let Some(cell) = queue.pop_front() {
        let d = dist[grid.index(cell)];
        for action in &Action::ALL[1..] {
            if let Some(next) = grid.neighbor(cell, *action) {
                let j = grid.index(next);
                if !grid.blocked[j] && dist[j] == UNREACHABLE {
                    dist[j] = d + 1;
                    queue.push_back(next);
                }
            }
        }
    }
    DistanceField { size: n, dist }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub pos: Cell,
    pub goal: Cell,
    pub active: bool,
    pub dist_field: DistanceField,
}

impl AgentState {
    pub fn distance(&self) -> u32 {
        self.dist_field.get(self.pos)
    }
}

/// Reward for one agent's transition from `old_pos` to `new_pos`.
///
/// A successful move on a grid graph changes the BFS distance by exactly one
/// in either direction, so only three values are possible.
pub fn reward_for(agent: &AgentState, old_pos: Cell, new_pos: Cell) -> f64 {
    if old_pos == new_pos {
        return REWARD_STAY;
    }
    let old_d = agent.dist_field.get(old_pos);
    let new_d = agent.dist_field.get(new_pos);
    debug_assert!(
        old_d != UNREACHABLE && new_d != UNREACHABLE && old_d.abs_diff(new_d) == 1,
        "move {old_pos:?}->{new_pos:?} changed distance {old_d}->{new_d}"
    );
    if new_d < old_d {
        REWARD_PROGRESS
    } else {
        REWARD_REGRESS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    /// True for agents that reached their goal during this step.
    pub done: Vec<bool>,
    pub episode_over: bool,
    pub moved: Vec<bool>,
}

/// Full simulator state. Cloning is cheap relative to stepping cost; distance
/// fields are owned per agent.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub config: EnvConfig,
    pub grid: GridMap,
    pub agents: Vec<AgentState>,
    pub t: usize,
    /// Seed the map was generated from (recorded in map JSON).
    pub map_seed: u64,
    /// Occupancy: `agent index + 1` for active agents, 0 when empty.
    occupancy: Vec<u16>,
}

impl PartialEq for EnvState {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.grid == other.grid
            && self.agents == other.agents
            && self.t == other.t
            && self.map_seed == other.map_seed
    }
}

/// Generates a random environment per `config` (seeded by `config.seed`).
pub fn generate(config: &EnvConfig) -> Result<EnvState, EnvError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_cells = config.size * config.size;
    let n_blocked = config.obstacle_count();
    let mut last_reason = String::new();
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut grid = GridMap::empty(config.size);
        for i in sample_indices(&mut rng, n_cells, n_blocked).into_iter() {
            grid.blocked[i] = true;
        }
        let free = grid.free_cells();
        if free.len() < config.n_agents {
            last_reason = format!("{} free cells for {} agents", free.len(), config.n_agents);
            continue;
        }
        let starts: Vec<Cell> = sample_indices(&mut rng, free.len(), config.n_agents)
            .into_iter()
            .map(|i| free[i])
            .collect();
        let mut goals = Vec::with_capacity(config.n_agents);
        for &start in &starts {
            let from_start = bfs_distance_field(&grid, start);
            let candidates: Vec<Cell> = free
                .iter()
                .copied()
                .filter(|&c| {
                    let d = from_start.get(c);
                    match config.goal_dist {
                        Some(want) => d as usize == want,
                        None => d != UNREACHABLE && d >= 1,
                    }
                })
                .collect();
            if candidates.is_empty() {
                break;
            }
            goals.push(candidates[rng.gen_range(0..candidates.len())]);
        }
        if goals.len() != config.n_agents {
            last_reason = "no goal cell at the required distance".to_string();
            continue;
        }
        return Ok(EnvState::new(config.clone(), grid, &starts, &goals, config.seed));
    }
    Err(EnvError::GenerationFailed { attempts: MAX_GENERATION_ATTEMPTS, reason: last_reason })
}

impl EnvState {
    /// Builds a state at `t = 0` from explicit placements. Callers guarantee
    /// starts are distinct free cells and goals are free cells.
    pub fn new(config: EnvConfig, grid: GridMap, starts: &[Cell], goals: &[Cell], map_seed: u64) -> Self {
        let mut occupancy = vec![0u16; grid.size * grid.size];
        let agents: Vec<AgentState> = starts
            .iter()
            .zip(goals)
            .enumerate()
            .map(|(i, (&pos, &goal))| {
                occupancy[grid.index(pos)] = (i + 1) as u16;
                AgentState { pos, goal, active: true, dist_field: bfs_distance_field(&grid, goal) }
            })
            .collect();
        let mut state = EnvState { config, grid, agents, t: 0, map_seed, occupancy };
        // An agent spawned on its own goal is finished before the first step.
        for i in 0..state.agents.len() {
            if state.agents[i].pos == state.agents[i].goal {
                state.deactivate(i);
            }
        }
        state
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn is_over(&self) -> bool {
        self.t >= self.config.horizon || self.agents.iter().all(|a| !a.active)
    }

    pub fn active_count(&self) -> usize {
        self.agents.iter().filter(|a| a.active).count()
    }

    /// Index of the active agent occupying `cell`, if any.
    #[inline]
    pub fn occupant(&self, cell: Cell) -> Option<usize> {
        match self.occupancy[self.grid.index(cell)] {
            0 => None,
            k => Some(k as usize - 1),
        }
    }

    fn deactivate(&mut self, i: usize) {
        let idx = self.grid.index(self.agents[i].pos);
        if self.occupancy[idx] == (i + 1) as u16 {
            self.occupancy[idx] = 0;
        }
        self.agents[i].active = false;
    }

    /// Advances every agent by one action, resolving moves in index order.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome, EnvError> {
        let n = self.agents.len();
        if actions.len() != n {
            return Err(EnvError::InvalidActionCount { expected: n, got: actions.len() });
        }
        if self.t >= self.config.horizon {
            return Err(EnvError::EpisodeOver(self.t));
        }
        let mut outcome = StepOutcome {
            rewards: vec![0.0; n],
            done: vec![false; n],
            episode_over: false,
            moved: vec![false; n],
        };
        for (i, &action) in actions.iter().enumerate() {
            if !self.agents[i].active {
                continue;
            }
            let old = self.agents[i].pos;
            let target = match self.grid.neighbor(old, action) {
                Some(cell) if action != Action::Stay => cell,
                _ => old,
            };
            let free = target != old && !self.grid.is_blocked(target) && self.occupant(target).is_none();
            let new = if free { target } else { old };
            outcome.rewards[i] = reward_for(&self.agents[i], old, new);
            if new != old {
                let (oi, ni) = (self.grid.index(old), self.grid.index(new));
                self.occupancy[oi] = 0;
                self.occupancy[ni] = (i + 1) as u16;
                self.agents[i].pos = new;
                outcome.moved[i] = true;
            }
            if new == self.agents[i].goal {
                outcome.done[i] = true;
                self.deactivate(i);
            }
        }
        self.t += 1;
        if self.t == self.config.horizon {
            for i in 0..n {
                if self.agents[i].active {
                    self.deactivate(i);
                }
            }
        }
        outcome.episode_over = self.is_over();
        Ok(outcome)
    }

    /// Global state tensor, `3 x size x size` flattened row-major per
    /// channel: obstacles, active agents, goals of active agents.
    pub fn global_state_tensor(&self) -> Vec<f64> {
        let mut out = vec![0.0; 3 * self.grid.size * self.grid.size];
        self.write_global_state(&mut out);
        out
    }

    pub fn write_global_state(&self, out: &mut [f64]) {
        let plane = self.grid.size * self.grid.size;
        assert_eq!(out.len(), 3 * plane);
        for (o, &b) in out[..plane].iter_mut().zip(&self.grid.blocked) {
            *o = if b { 1.0 } else { 0.0 };
        }
        out[plane..].fill(0.0);
        for agent in self.agents.iter().filter(|a| a.active) {
            out[plane + self.grid.index(agent.pos)] = 1.0;
            out[2 * plane + self.grid.index(agent.goal)] = 1.0;
        }
    }

    /// Map record at the current starts (only meaningful at `t = 0`).
    pub fn to_record(&self) -> MapRecord {
        MapRecord {
            size: self.grid.size,
            blocked: self.grid.blocked_cells().into_iter().map(|(r, c)| [r, c]).collect(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentRecord { start: [a.pos.0, a.pos.1], goal: [a.goal.0, a.goal.1] })
                .collect(),
            seed: self.map_seed,
        }
    }

    /// Rebuilds a fresh episode from a map record. `config` supplies the
    /// horizon and observation radius; its size and agent count must match.
    pub fn from_record(record: &MapRecord, config: &EnvConfig) -> Result<Self, EnvError> {
        if record.size != config.size {
            return Err(EnvError::InvalidRecord(format!(
                "map size {} does not match config size {}",
                record.size, config.size
            )));
        }
        if record.agents.len() != config.n_agents {
            return Err(EnvError::InvalidRecord(format!(
                "map has {} agents, config expects {}",
                record.agents.len(),
                config.n_agents
            )));
        }
        let blocked: Vec<Cell> = record.blocked.iter().map(|&[r, c]| (r, c)).collect();
        let grid = GridMap::from_blocked(record.size, &blocked)?;
        let mut starts = Vec::new();
        let mut goals = Vec::new();
        for (i, a) in record.agents.iter().enumerate() {
            let s = (a.start[0], a.start[1]);
            let g = (a.goal[0], a.goal[1]);
            for cell in [s, g] {
                if cell.0 >= record.size || cell.1 >= record.size || grid.is_blocked(cell) {
                    return Err(EnvError::InvalidRecord(format!("agent {i} cell {cell:?} is off grid or blocked")));
                }
            }
            if starts.contains(&s) {
                return Err(EnvError::InvalidRecord(format!("agent {i} start {s:?} is shared")));
            }
            if !bfs_distance_field(&grid, g).is_reachable(s) {
                return Err(EnvError::InvalidRecord(format!("agent {i} goal unreachable")));
            }
            starts.push(s);
            goals.push(g);
        }
        let mut cfg = config.clone();
        cfg.seed = record.seed;
        Ok(EnvState::new(cfg, grid, &starts, &goals, record.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub start: [usize; 2],
    pub goal: [usize; 2],
}

/// Serializable map: `{"size", "blocked": [[r,c],...], "agents": [{"start","goal"}], "seed"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapRecord {
    pub size: usize,
    pub blocked: Vec<[usize; 2]>,
    pub agents: Vec<AgentRecord>,
    pub seed: u64,
}

impl MapRecord {
    /// Stable 64-bit digest of the map layout, starts, and goals (seed excluded).
    pub fn layout_hash(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut blocked = self.blocked.clone();
        blocked.sort_unstable();
        let mut h = Sha256::new();
        h.update((self.size as u64).to_le_bytes());
        for [r, c] in blocked {
            h.update((r as u64).to_le_bytes());
            h.update((c as u64).to_le_bytes());
        }
        h.update([0xff]);
        for a in &self.agents {
            for v in a.start.iter().chain(&a.goal) {
                h.update((*v as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}
