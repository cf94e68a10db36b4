//! Egocentric 4-channel agent observations.
//!
//! Layout is `[channel][row][col]` flattened row-major, channels in order:
//! obstacles, agents, other agents' goals, own goal. Window side is `2R+1`
//! and the observing agent sits at the center cell.

use crate::grid_world::{EnvError, EnvState};

pub const CHANNELS: usize = 4;
pub const CH_OBSTACLES: usize = 0;
pub const CH_AGENTS: usize = 1;
pub const CH_OTHER_GOALS: usize = 2;
pub const CH_OWN_GOAL: usize = 3;

pub fn window_side(radius: usize) -> usize {
    2 * radius + 1
}

pub fn obs_len(radius: usize) -> usize {
    let w = window_side(radius);
    CHANNELS * w * w
}

/// Clamps an out-of-view goal offset onto the window border.
///
/// If one coordinate already lies inside `[-R, R]` it is kept and the other
/// is pushed to the border; if both exceed, the result is the nearest corner.
pub fn project_goal(delta_row: isize, delta_col: isize, radius: usize) -> (isize, isize) {
    let r = radius as isize;
    (delta_row.clamp(-r, r), delta_col.clamp(-r, r))
}

/// Dense observation tensor for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub radius: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn side(&self) -> usize {
        window_side(self.radius)
    }

    /// Value at `(channel, window_row, window_col)`.
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f64 {
        let w = self.side();
        self.data[(channel * w + row) * w + col]
    }
}

pub fn observe(state: &EnvState, agent: usize) -> Result<Observation, EnvError> {
    let radius = state.config.obs_radius;
    let mut data = vec![0.0; obs_len(radius)];
    observe_into(state, agent, radius, &mut data)?;
    Ok(Observation { radius, data })
}

/// Writes agent `agent`'s observation into `out` (length `4 (2R+1)^2`).
pub fn observe_into(state: &EnvState, agent: usize, radius: usize, out: &mut [f64]) -> Result<(), EnvError> {
    let me = state.agents.get(agent).ok_or(EnvError::InactiveAgent(agent))?;
    if !me.active {
        return Err(EnvError::InactiveAgent(agent));
    }
    let w = window_side(radius);
    let plane = w * w;
    assert_eq!(out.len(), CHANNELS * plane, "observation buffer length");
    out.fill(0.0);
    let r = radius as isize;
    let size = state.grid.size() as isize;
    let (pr, pc) = (me.pos.0 as isize, me.pos.1 as isize);
    let at = |ch: usize, wr: isize, wc: isize| ch * plane + (wr + r) as usize * w + (wc + r) as usize;

    for dr in -r..=r {
        for dc in -r..=r {
            let (gr, gc) = (pr + dr, pc + dc);
            let off_grid = gr < 0 || gc < 0 || gr >= size || gc >= size;
            if off_grid || state.grid.is_blocked((gr as usize, gc as usize)) {
                out[at(CH_OBSTACLES, dr, dc)] = 1.0;
            }
            if !off_grid {
                if let Some(other) = state.occupant((gr as usize, gc as usize)) {
                    if other != agent {
                        out[at(CH_AGENTS, dr, dc)] = 1.0;
                    }
                }
            }
        }
    }
    out[at(CH_AGENTS, 0, 0)] = 1.0 / me.distance() as f64;

    for (j, other) in state.agents.iter().enumerate() {
        if j == agent || !other.active {
            continue;
        }
        let (dr, dc) = (other.goal.0 as isize - pr, other.goal.1 as isize - pc);
        if dr.abs() <= r && dc.abs() <= r {
            out[at(CH_OTHER_GOALS, dr, dc)] = 1.0;
        }
    }

    let (gr, gc) = project_goal(me.goal.0 as isize - pr, me.goal.1 as isize - pc, radius);
    out[at(CH_OWN_GOAL, gr, gc)] = 1.0;
    Ok(())
}

/// Lossless packed form of an observation: every entry is 0 or 1 except the
/// agents-channel center, which is stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactObs {
    bits: Vec<u64>,
    center: f64,
}

impl CompactObs {
    pub fn pack(dense: &[f64], radius: usize) -> Self {
        let center_idx = center_index(radius);
        let mut bits = vec![0u64; dense.len().div_ceil(64)];
        for (i, &v) in dense.iter().enumerate() {
            if i != center_idx && v != 0.0 {
                debug_assert_eq!(v, 1.0, "non-binary observation entry at {i}");
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        CompactObs { bits, center: dense[center_idx] }
    }

    /// A zeroed observation, used for slots of inactive agents.
    pub fn zeros(radius: usize) -> Self {
        CompactObs { bits: vec![0u64; obs_len(radius).div_ceil(64)], center: 0.0 }
    }

    pub fn unpack_into(&self, radius: usize, out: &mut [f64]) {
        out.fill(0.0);
        for (word_idx, &word) in self.bits.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let bit = w.trailing_zeros() as usize;
                out[word_idx * 64 + bit] = 1.0;
                w &= w - 1;
            }
        }
        out[center_index(radius)] = self.center;
    }

    pub fn unpack(&self, radius: usize) -> Vec<f64> {
        let mut out = vec![0.0; obs_len(radius)];
        self.unpack_into(radius, &mut out);
        out
    }
}

fn center_index(radius: usize) -> usize {
    let w = window_side(radius);
    CH_AGENTS * w * w + radius * w + radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_world::{generate, Action, EnvConfig, EnvState, GridMap};

    fn env(size: usize, radius: usize, starts: &[(usize, usize)], goals: &[(usize, usize)], blocked: &[(usize, usize)]) -> EnvState {
        let config = EnvConfig {
            size,
            density: 0.0,
            n_agents: starts.len(),
            obs_radius: radius,
            horizon: 50,
            goal_dist: None,
            seed: 0,
        };
        EnvState::new(config, GridMap::from_blocked(size, blocked).unwrap(), starts, goals, 0)
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_goal(3, -2, 5), (3, -2));
        assert_eq!(project_goal(7, 2, 5), (5, 2));
        assert_eq!(project_goal(9, -8, 5), (5, -5));
    }

    #[test]
    fn shape_for_radius_five() {
        let s = generate(&EnvConfig { size: 15, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 30, goal_dist: Some(8), seed: 1 }).unwrap();
        let o = observe(&s, 0).unwrap();
        assert_eq!(o.data.len(), 4 * 11 * 11);
        assert_eq!(o.side(), 11);
    }

    #[test]
    fn center_holds_inverse_distance() {
        let s = env(5, 2, &[(2, 2)], &[(2, 3)], &[]);
        let o = observe(&s, 0).unwrap();
        assert_eq!(o.at(CH_AGENTS, 2, 2), 1.0);
        let s = env(5, 2, &[(0, 0)], &[(4, 4)], &[]);
        assert_eq!(observe(&s, 0).unwrap().at(CH_AGENTS, 2, 2), 1.0 / 8.0);
    }

    #[test]
    fn corner_sees_out_of_grid_as_obstacle() {
        let s = env(5, 2, &[(0, 0)], &[(4, 4)], &[]);
        let o = observe(&s, 0).unwrap();
        for wr in 0..5 {
            for wc in 0..5 {
                let outside = wr < 2 || wc < 2;
                assert_eq!(o.at(CH_OBSTACLES, wr, wc), if outside { 1.0 } else { 0.0 }, "({wr},{wc})");
            }
        }
        // goal at (+4,+4) projects to the far corner
        assert_eq!(o.at(CH_OWN_GOAL, 4, 4), 1.0);
        assert_eq!(o.data[3 * 25..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn other_agents_and_goals() {
        let s = env(7, 2, &[(3, 3), (3, 4), (0, 0)], &[(6, 6), (2, 3), (6, 0)], &[(4, 3)]);
        let o = observe(&s, 0).unwrap();
        assert_eq!(o.at(CH_AGENTS, 2, 3), 1.0);
        assert_eq!(o.at(CH_OTHER_GOALS, 1, 2), 1.0);
        assert_eq!(o.at(CH_OBSTACLES, 3, 2), 1.0);
        assert_eq!(o.at(CH_OBSTACLES, 2, 2), 0.0);
        // agent 2 at (0,0) and its goal (6,0) are out of view and not projected
        assert_eq!(o.data[2 * 25..3 * 25].iter().sum::<f64>(), 1.0);
        assert_eq!(o.data[25..50].iter().sum::<f64>(), 1.0 + 1.0 / 6.0);
    }

    #[test]
    fn finished_agents_vanish() {
        let mut s = env(5, 2, &[(2, 2), (2, 3)], &[(0, 0), (2, 4)], &[]);
        s.step(&[Action::Stay, Action::Right]).unwrap();
        assert!(!s.agents[1].active);
        let o = observe(&s, 0).unwrap();
        let w = 25;
        let others: f64 = o.data[w..2 * w].iter().sum::<f64>() - o.at(CH_AGENTS, 2, 2);
        assert_eq!(others, 0.0);
        assert_eq!(o.data[2 * w..3 * w].iter().sum::<f64>(), 0.0);
        assert_eq!(observe(&s, 1).unwrap_err(), EnvError::InactiveAgent(1));
    }

    #[test]
    fn compact_round_trip() {
        for seed in 0..20 {
            let s = generate(&EnvConfig { size: 8, density: 0.3, n_agents: 3, obs_radius: 3, horizon: 16, goal_dist: None, seed }).unwrap();
            for i in 0..3 {
                let o = observe(&s, i).unwrap();
                let packed = CompactObs::pack(&o.data, 3);
                assert_eq!(packed.unpack(3), o.data);
            }
        }
    }
}
