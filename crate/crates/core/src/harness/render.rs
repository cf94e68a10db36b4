//! ASCII replay of maps and recorded episodes.
//!
//! `#` is an obstacle, `.` a free cell, digits are agents (index mod 10) and
//! lowercase letters their goals (`a` for agent 0). An agent that reached its
//! goal is removed from the board together with its goal letter.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::grid_world::{Action, EnvConfig, EnvState, MapRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub config: EnvConfig,
    pub map: MapRecord,
    /// One row of action codes per step.
    pub actions: Vec<Vec<u8>>,
}

impl EpisodeLog {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::MalformedLog(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// Draws the current board, one line per row.
pub fn draw(env: &EnvState) -> String {
    let size = env.grid.size();
    let mut cells = vec![vec!['.'; size]; size];
    for (r, row) in cells.iter_mut().enumerate() {
        for (c, ch) in row.iter_mut().enumerate() {
            if env.grid.is_blocked((r, c)) {
                *ch = '#';
            }
        }
    }
    let visible = |a: &crate::grid_world::AgentState| a.active || a.pos != a.goal;
    for (i, a) in env.agents.iter().enumerate().filter(|(_, a)| visible(a)) {
        cells[a.goal.0][a.goal.1] = (b'a' + (i % 26) as u8) as char;
    }
    // agents drawn last so they cover goal letters
    for (i, a) in env.agents.iter().enumerate().filter(|(_, a)| visible(a)) {
        cells[a.pos.0][a.pos.1] = char::from_digit((i % 10) as u32, 10).expect("digit");
    }
    cells.into_iter().map(|row| row.into_iter().collect::<String>()).collect::<Vec<_>>().join("\n")
}

/// Replays a log through the simulator; returns `actions + 1` frames.
pub fn render_episode(log: &EpisodeLog) -> Result<Vec<String>, HarnessError> {
    let bad = |m: String| HarnessError::MalformedLog(m);
    let mut env = EnvState::from_record(&log.map, &log.config).map_err(|e| bad(e.to_string()))?;
    let mut frames = vec![draw(&env)];
    for (t, row) in log.actions.iter().enumerate() {
        if env.is_over() {
            return Err(bad(format!("action row {t} after the episode ended")));
        }
        if row.len() != env.n_agents() {
            return Err(bad(format!("action row {t} has {} entries for {} agents", row.len(), env.n_agents())));
        }
        let actions = row
            .iter()
            .map(|&c| Action::from_code(c).ok_or_else(|| bad(format!("invalid action code {c} at step {t}"))))
            .collect::<Result<Vec<_>, _>>()?;
        env.step(&actions).map_err(|e| bad(e.to_string()))?;
        frames.push(draw(&env));
    }
    Ok(frames)
}

/// Single frame of a map at its start positions.
pub fn render_map(map: &MapRecord) -> Result<String, HarnessError> {
    let config = EnvConfig {
        size: map.size,
        density: 0.0,
        n_agents: map.agents.len(),
        obs_radius: 1,
        horizon: 1,
        goal_dist: None,
        seed: map.seed,
    };
    let env = EnvState::from_record(map, &config).map_err(|e| HarnessError::MalformedLog(e.to_string()))?;
    Ok(draw(&env))
}
