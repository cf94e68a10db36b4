//! Fixed map sets for evaluation, and the give-way map family.
//!
//! A give-way map is a width-1 corridor (optionally bent at either end) with
//! a single dead-end alcove attached to one interior cell, cut out of an
//! otherwise blocked field. Two agents travel along the corridor in opposite
//! directions. Every candidate is certified before acceptance:
//!
//! - each agent has exactly one shortest path to its goal;
//! - the individually greedy rollout leaves at least one agent short of its
//!   goal within the horizon;
//! - a joint search over both agents finds a plan that gets both home within
//!   the horizon (so yielding is possible and necessary).
//!
//! Cells farther than one step from the corridor are filled with random
//! disconnected free pockets so that maps differ beyond the template.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::baseline::GreedyBfsPolicy;
use super::{derive_seed, HarnessError};
use crate::grid_world::{bfs_distance_field, generate, Action, Cell, EnvConfig, EnvError, EnvState, GridMap, MapRecord, UNREACHABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Random,
    Giveway,
}

impl std::str::FromStr for MapKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(MapKind::Random),
            "giveway" => Ok(MapKind::Giveway),
            other => Err(format!("unknown map kind `{other}`")),
        }
    }
}

/// Candidates tried per requested give-way map before giving up.
const GIVEWAY_ATTEMPTS_PER_MAP: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSet {
    pub kind: MapKind,
    /// Environment parameters shared by every map (horizon, radius, ...).
    pub config: EnvConfig,
    pub maps: Vec<MapRecord>,
}

impl MapSet {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let set: MapSet = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Every map must load into a valid episode.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.config.validate()?;
        for m in &self.maps {
            EnvState::from_record(m, &self.config)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn episode(&self, index: usize) -> Result<EnvState, EnvError> {
        EnvState::from_record(&self.maps[index], &self.config)
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn sha256_hex(&self) -> String {
        let json = serde_json::to_string(self).expect("map set serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn layout_hashes(&self) -> HashSet<u64> {
        self.maps.iter().map(MapRecord::layout_hash).collect()
    }
}

pub fn gen_mapset(kind: MapKind, count: usize, config: &EnvConfig, seed: u64) -> Result<MapSet, HarnessError> {
    gen_mapset_excluding(kind, count, config, seed, &HashSet::new())
}

/// Like [`gen_mapset`] but skips maps whose layout hash is in `exclude`.
pub fn gen_mapset_excluding(
    kind: MapKind,
    count: usize,
    config: &EnvConfig,
    seed: u64,
    exclude: &HashSet<u64>,
) -> Result<MapSet, HarnessError> {
    if count == 0 {
        return Err(HarnessError::ConfigInvalid("map count must be >= 1".into()));
    }
    config.validate()?;
    let mut maps = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    match kind {
        MapKind::Random => {
            let mut k = 0u64;
            while maps.len() < count {
                let mut cfg = config.clone();
                cfg.seed = derive_seed(seed, k);
                k += 1;
                let rec = generate(&cfg)?.to_record();
                let h = rec.layout_hash();
                if exclude.contains(&h) {
                    continue;
                }
                seen.insert(h);
                maps.push(rec);
                if k as usize > count * GIVEWAY_ATTEMPTS_PER_MAP {
                    return Err(EnvError::GenerationFailed { attempts: k as usize, reason: "excluded set too large".into() }.into());
                }
            }
        }
        MapKind::Giveway => {
            if config.n_agents != 2 {
                return Err(HarnessError::ConfigInvalid("give-way maps are two-agent".into()));
            }
            if config.size < 5 {
                return Err(HarnessError::ConfigInvalid("give-way maps need size >= 5".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let budget = count * GIVEWAY_ATTEMPTS_PER_MAP;
            let mut attempts = 0;
            while maps.len() < count {
                attempts += 1;
                if attempts > budget {
                    return Err(EnvError::GenerationFailed {
                        attempts,
                        reason: format!("only {} of {count} give-way maps certified", maps.len()),
                    }
                    .into());
                }
                let map_seed = rng.gen::<u64>();
                let Some(env) = giveway_candidate(config, map_seed) else { continue };
                let rec = env.to_record();
                let h = rec.layout_hash();
                if exclude.contains(&h) || seen.contains(&h) {
                    continue;
                }
                if !certify_giveway(&env) {
                    continue;
                }
                seen.insert(h);
                maps.push(rec);
            }
        }
    }
    let mut cfg = config.clone();
    cfg.seed = seed;
    if kind == MapKind::Giveway {
        cfg.goal_dist = None;
    }
    Ok(MapSet { kind, config: cfg, maps })
}

/// One template draw from `map_seed`. Returns `None` when the draw is
/// geometrically invalid; certification happens separately.
pub fn giveway_candidate(config: &EnvConfig, map_seed: u64) -> Option<EnvState> {
    let size = config.size;
    let mut rng = ChaCha8Rng::seed_from_u64(map_seed);

    // Canonical frame: horizontal corridor on `row`.
    let row = rng.gen_range(1..size - 1);
    let len = rng.gen_range(4..=size);
    let c0 = rng.gen_range(0..=size - len);
    let mut path: Vec<Cell> = (c0..c0 + len).map(|c| (row, c)).collect();
    // Optional vertical legs at both ends.
    for front in [true, false] {
        let legs = rng.gen_range(0..=2usize);
        let up = rng.gen_bool(0.5);
        let (r0, c) = if front { path[0] } else { *path.last().expect("non-empty") };
        let mut leg = Vec::new();
        for k in 1..=legs {
            let r = if up { r0.checked_sub(k) } else { Some(r0 + k).filter(|&r| r < size) };
            match r {
                Some(r) => leg.push((r, c)),
                None => break,
            }
        }
        if front {
            leg.reverse();
            leg.extend(path);
            path = leg;
        } else {
            path.extend(leg);
        }
    }

    let on_path: HashSet<Cell> = path.iter().copied().collect();
    let neighbors = |cell: Cell| -> Vec<Cell> {
        let g = GridMap::empty(size);
        Action::ALL[1..].iter().filter_map(|&a| g.neighbor(cell, a)).collect()
    };
    // Alcove: a free side cell of an interior path cell touching nothing else.
    let k = rng.gen_range(1..path.len() - 1);
    let options: Vec<Cell> = neighbors(path[k])
        .into_iter()
        .filter(|c| !on_path.contains(c))
        .filter(|&c| neighbors(c).iter().filter(|n| on_path.contains(n)).count() == 1)
        .collect();
    if options.is_empty() {
        return None;
    }
    let alcove = options[rng.gen_range(0..options.len())];

    let mut grid = GridMap::empty(size);
    let mut carved: HashSet<Cell> = on_path.clone();
    carved.insert(alcove);
    for r in 0..size {
        for c in 0..size {
            let cell = (r, c);
            if carved.contains(&cell) {
                continue;
            }
            let touches = neighbors(cell).iter().any(|n| carved.contains(n));
            let free = !touches && rng.gen_bool(1.0 - config.density);
            grid.set_blocked(cell, !free);
        }
    }

    // A walks forward along the path, B backward.
    let m = path.len();
    let a_start = rng.gen_range(0..m - 1);
    let b_start = rng.gen_range(a_start + 1..m);
    let a_goal = rng.gen_range(a_start + 1..m);
    let b_goal = rng.gen_range(0..b_start);
    let mut starts = vec![path[a_start], path[b_start]];
    let mut goals = vec![path[a_goal], path[b_goal]];
    if rng.gen_bool(0.5) {
        starts.swap(0, 1);
        goals.swap(0, 1);
    }

    // Random symmetry of the square.
    let transpose = rng.gen_bool(0.5);
    let flip_r = rng.gen_bool(0.5);
    let flip_c = rng.gen_bool(0.5);
    let map_cell = |(r, c): Cell| -> Cell {
        let (r, c) = if transpose { (c, r) } else { (r, c) };
        let r = if flip_r { size - 1 - r } else { r };
        let c = if flip_c { size - 1 - c } else { c };
        (r, c)
    };
    let blocked: Vec<Cell> = grid.blocked_cells().into_iter().map(map_cell).collect();
    let grid = GridMap::from_blocked(size, &blocked).ok()?;
    let starts: Vec<Cell> = starts.into_iter().map(map_cell).collect();
    let goals: Vec<Cell> = goals.into_iter().map(map_cell).collect();

    let mut cfg = config.clone();
    cfg.seed = map_seed;
    cfg.goal_dist = None;
    Some(EnvState::new(cfg, grid, &starts, &goals, map_seed))
}

/// All three give-way properties (see module docs).
pub fn certify_giveway(env: &EnvState) -> bool {
    env.agents.iter().all(|a| count_shortest_paths(&env.grid, a.pos, a.goal) == 1)
        && !greedy_rollout_succeeds(env)
        && jointly_solvable(env)
}

/// Number of distinct shortest paths from `start` to `goal` (saturating).
pub fn count_shortest_paths(grid: &GridMap, start: Cell, goal: Cell) -> u64 {
    let from_goal = bfs_distance_field(grid, goal);
    let d = from_goal.get(start);
    if d == UNREACHABLE {
        return 0;
    }
    // Walk levels from the goal outward: ways(c) = sum of ways over
    // neighbors one step closer to the goal.
    let mut cells: Vec<Cell> = grid.free_cells().into_iter().filter(|&c| from_goal.get(c) <= d).collect();
    cells.sort_by_key(|&c| from_goal.get(c));
    let mut ways: HashMap<Cell, u64> = HashMap::new();
    for c in cells {
        let dc = from_goal.get(c);
        let w = if dc == 0 {
            1
        } else {
            Action::ALL[1..]
                .iter()
                .filter_map(|&a| grid.neighbor(c, a))
                .filter(|&n| from_goal.get(n) == dc - 1)
                .map(|n| ways.get(&n).copied().unwrap_or(0))
                .fold(0u64, u64::saturating_add)
        };
        ways.insert(c, w);
    }
    ways.get(&start).copied().unwrap_or(0)
}

/// Whether the independent greedy policy brings every agent home.
pub fn greedy_rollout_succeeds(env: &EnvState) -> bool {
    let mut env = env.clone();
    while !env.is_over() {
        let actions: Vec<Action> = (0..env.n_agents()).map(|i| GreedyBfsPolicy::action_for(&env, i)).collect();
        env.step(&actions).expect("valid joint action");
    }
    env.agents.iter().all(|a| a.pos == a.goal)
}

/// Breadth-first search over joint configurations: can all agents reach
/// their goals within the horizon under the real dynamics?
pub fn jointly_solvable(env: &EnvState) -> bool {
    type Key = Vec<(Cell, bool)>;
    let key = |e: &EnvState| -> Key { e.agents.iter().map(|a| (a.pos, a.active)).collect() };
    let n = env.n_agents();
    let joint: Vec<Vec<Action>> = (0..Action::COUNT.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let a = Action::ALL[code % Action::COUNT];
                    code /= Action::COUNT;
                    a
                })
                .collect()
        })
        .collect();
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(key(env));
    queue.push_back(env.clone());
    while let Some(e) = queue.pop_front() {
        if e.is_over() {
            continue;
        }
        for actions in &joint {
            // inactive agents only ever stay
            if actions.iter().zip(&e.agents).any(|(a, ag)| !ag.active && *a != Action::Stay) {
                continue;
            }
            let mut next = e.clone();
            next.step(actions).expect("valid joint action");
            if next.agents.iter().all(|a| a.pos == a.goal) {
                return true;
            }
            if next.is_over() {
                continue;
            }
            if seen.insert(key(&next)) {
                queue.push_back(next);
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn giveway_cfg() -> EnvConfig {
        EnvConfig { size: 8, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 16, goal_dist: None, seed: 0 }
    }

    #[test]
    fn shortest_path_counts() {
        let g = GridMap::empty(3);
        assert_eq!(count_shortest_paths(&g, (0, 0), (2, 2)), 6);
        assert_eq!(count_shortest_paths(&g, (0, 0), (0, 2)), 1);
        let g = GridMap::from_blocked(3, &[(0, 1), (1, 1), (2, 1)]).unwrap();
        assert_eq!(count_shortest_paths(&g, (0, 0), (0, 2)), 0);
    }

    #[test]
    fn random_set_is_deterministic() {
        let cfg = EnvConfig { size: 8, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 16, goal_dist: Some(5), seed: 0 };
        let a = gen_mapset(MapKind::Random, 10, &cfg, 7).unwrap();
        let b = gen_mapset(MapKind::Random, 10, &cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sha256_hex(), b.sha256_hex());
        assert_eq!(a.len(), 10);
        a.validate().unwrap();
    }

    #[test]
    fn giveway_maps_are_certified() {
        let set = gen_mapset(MapKind::Giveway, 12, &giveway_cfg(), 3).unwrap();
        assert_eq!(set.len(), 12);
        for i in 0..set.len() {
            let env = set.episode(i).unwrap();
            assert!(!greedy_rollout_succeeds(&env));
            assert!(jointly_solvable(&env));
            for a in &env.agents {
                assert_eq!(count_shortest_paths(&env.grid, a.pos, a.goal), 1);
            }
        }
        assert_eq!(set.layout_hashes().len(), 12);
    }

    #[test]
    fn exclusion_is_respected() {
        let cfg = giveway_cfg();
        let first = gen_mapset(MapKind::Giveway, 5, &cfg, 11).unwrap();
        let second = gen_mapset_excluding(MapKind::Giveway, 5, &cfg, 11, &first.layout_hashes()).unwrap();
        assert!(first.layout_hashes().is_disjoint(&second.layout_hashes()));
    }

    #[test]
    fn giveway_requires_two_agents() {
        let mut cfg = giveway_cfg();
        cfg.n_agents = 3;
        assert!(gen_mapset(MapKind::Giveway, 1, &cfg, 0).is_err());
    }
}
