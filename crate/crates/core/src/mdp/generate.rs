//! Seeded instance generators: random stochastic MDPs, gridworlds and the
//! sparse-solution chain.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Choice, CsspMdp, Outcome};
use crate::rng::{SeedStream, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomMdpConfig {
    pub states: usize,
    /// Applicable actions per non-goal state.
    pub actions: usize,
    /// Maximum number of outcomes of a stochastic action.
    pub branching: usize,
    /// Probability that an action has more than one outcome.
    pub stochasticity: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    pub constraints: usize,
    pub seed: u64,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            states: 5,
            actions: 2,
            branching: 2,
            stochasticity: 0.5,
            cost_min: 0.5,
            cost_max: 2.0,
            constraints: 0,
            seed: 0,
        }
    }
}

/// Random CSSP-MDP with initial state 0 and goal `states - 1`.
///
/// Action 0 of every state `s` always has `s + 1` among its outcomes, so the
/// goal is reachable from every state. Goal has no applicable actions.
pub fn generate_random_mdp(cfg: &RandomMdpConfig) -> Result<CsspMdp> {
    if cfg.states < 2 {
        return Err(Error::config("random MDP needs at least 2 states"));
    }
    if cfg.actions == 0 || cfg.branching == 0 {
        return Err(Error::config("actions and branching must be at least 1"));
    }
    if cfg.branching > cfg.states {
        return Err(Error::config(format!(
            "branching {} exceeds the number of states {}",
            cfg.branching, cfg.states
        )));
    }
    if !(0.0..=1.0).contains(&cfg.stochasticity) {
        return Err(Error::config("stochasticity must lie in [0, 1]"));
    }
    if !(cfg.cost_min >= 0.0 && cfg.cost_max >= cfg.cost_min) {
        return Err(Error::config("cost range must satisfy 0 <= cost_min <= cost_max"));
    }

    let mut rng = SeedStream::new(cfg.seed).rng(Stream::Generator, 0);
    let n = cfg.states;
    let goal = n - 1;
    let k = cfg.constraints;
    let all_states: Vec<usize> = (0..n).collect();
    let mut choices = vec![Vec::new(); n];
    for (s, row) in choices.iter_mut().enumerate().take(goal) {
        for a in 0..cfg.actions {
            let fanout = if cfg.branching > 1 && rng.random::<f64>() < cfg.stochasticity {
                rng.random_range(2..=cfg.branching)
            } else {
                1
            };
            let mut targets: Vec<usize> = all_states
                .choose_multiple(&mut rng, fanout)
                .copied()
                .collect();
            if a == 0 && !targets.contains(&(s + 1)) {
                targets[0] = s + 1;
            }
            targets.sort_unstable();
            let raw: Vec<f64> = targets.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let outcomes = targets
                .iter()
                .zip(&raw)
                .map(|(&next, &w)| {
                    let cost = if cfg.cost_max > cfg.cost_min {
                        rng.random_range(cfg.cost_min..cfg.cost_max)
                    } else {
                        cfg.cost_min
                    };
                    Outcome::new(next, w / total, cost)
                        .with_constraints((0..k).map(|_| rng.random_range(0.0..1.0)).collect())
                })
                .collect();
            row.push(Choice { action: a, outcomes });
        }
    }
    let constraint_values = (0..k).map(|_| rng.random_range(1.0..4.0)).collect();
    CsspMdp::checked(n, cfg.actions, choices, constraint_values, 0, goal)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMoves {
    /// Up, right, down, left.
    Four,
    /// Right and down only.
    RightDown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    /// Fraction of non-terminal cells turned into walls.
    pub wall_density: f64,
    /// Fraction of non-terminal cells turned into absorbing pits.
    pub pit_density: f64,
    /// Probability that a move leaves the agent in place.
    pub slip: f64,
    pub moves: GridMoves,
    pub seed: u64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            wall_density: 0.2,
            pit_density: 0.0,
            slip: 0.0,
            moves: GridMoves::Four,
            seed: 0,
        }
    }
}

/// Action indices used by [`gridworld`].
pub mod grid_action {
    pub const UP: usize = 0;
    pub const RIGHT: usize = 1;
    pub const DOWN: usize = 2;
    pub const LEFT: usize = 3;
    pub const STAY: usize = 4;
}

/// Gridworld from the top-left corner to the bottom-right corner with unit
/// move costs.
///
/// States are the free cells in row-major order. Walls are resampled until
/// the goal is reachable. Pits and cells without any legal move only offer a
/// unit-cost `STAY` self-loop.
pub fn gridworld(cfg: &GridworldConfig) -> Result<CsspMdp> {
    use grid_action::*;
    let (w, h) = (cfg.width, cfg.height);
    if w * h < 2 {
        return Err(Error::config("gridworld needs at least 2 cells"));
    }
    if !(0.0..1.0).contains(&cfg.wall_density) || !(0.0..1.0).contains(&cfg.pit_density) {
        return Err(Error::config("wall and pit densities must lie in [0, 1)"));
    }
    if !(0.0..1.0).contains(&cfg.slip) {
        return Err(Error::config("slip must lie in [0, 1)"));
    }
    let start = 0;
    let goal_cell = w * h - 1;
    let streams = SeedStream::new(cfg.seed);

    for attempt in 0..1000u64 {
        let mut rng = streams.rng(Stream::Generator, attempt);
        // 0 free, 1 wall, 2 pit
        let mut cell = vec![0u8; w * h];
        for (i, c) in cell.iter_mut().enumerate() {
            if i == start || i == goal_cell {
                continue;
            }
            let r: f64 = rng.random();
            if r < cfg.wall_density {
                *c = 1;
            } else if r < cfg.wall_density + cfg.pit_density {
                *c = 2;
            }
        }
        let moves: &[usize] = match cfg.moves {
            GridMoves::Four => &[UP, RIGHT, DOWN, LEFT],
            GridMoves::RightDown => &[RIGHT, DOWN],
        };
        let step = |i: usize, a: usize| -> Option<usize> {
            let (x, y) = (i % w, i / w);
            let j = match a {
                UP if y > 0 => i - w,
                RIGHT if x + 1 < w => i + 1,
                DOWN if y + 1 < h => i + w,
                LEFT if x > 0 => i - 1,
                _ => return None,
            };
            (cell[j] != 1).then_some(j)
        };

        // Reachability of the goal through free cells.
        let mut seen = vec![false; w * h];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            if cell[i] == 2 || i == goal_cell {
                continue;
            }
            for &a in moves {
                if let Some(j) = step(i, a) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if !seen[goal_cell] {
            continue;
        }

        let free: Vec<usize> = (0..w * h).filter(|&i| cell[i] != 1).collect();
        let mut index = vec![usize::MAX; w * h];
        for (sid, &i) in free.iter().enumerate() {
            index[i] = sid;
        }
        let mut choices = vec![Vec::new(); free.len()];
        for (sid, &i) in free.iter().enumerate() {
            if i == goal_cell {
                continue;
            }
            let row: &mut Vec<Choice> = &mut choices[sid];
            if cell[i] != 2 {
                for &a in moves {
                    if let Some(j) = step(i, a) {
                        let outcomes = if cfg.slip > 0.0 {
                            vec![
                                Outcome::new(sid.min(index[j]), 0.0, 1.0),
                                Outcome::new(sid.max(index[j]), 0.0, 1.0),
                            ]
                            .into_iter()
                            .map(|mut o| {
                                o.prob = if o.next == sid { cfg.slip } else { 1.0 - cfg.slip };
                                o
                            })
                            .collect()
                        } else {
                            vec![Outcome::new(index[j], 1.0, 1.0)]
                        };
                        row.push(Choice { action: a, outcomes });
                    }
                }
            }
            if row.is_empty() {
                row.push(Choice {
                    action: STAY,
                    outcomes: vec![Outcome::new(sid, 1.0, 1.0)],
                });
            }
        }
        return CsspMdp::checked(free.len(), 5, choices, Vec::new(), index[start], index[goal_cell]);
    }
    Err(Error::config("could not place walls with a reachable goal in 1000 attempts"))
}

/// Chain `0 -> 1 -> ... -> length` where every non-goal state offers
/// `forward` (action 0) and a zero-cost self-loop `stall` (action 1).
///
/// Entering the goal costs 1 and everything else is free, so the single
/// proper policy has quality 1 and is one of `2^length` policies.
pub fn sparse_chain(length: usize) -> Result<CsspMdp> {
    if length == 0 {
        return Err(Error::config("chain length must be at least 1"));
    }
    let mut choices = vec![Vec::new(); length + 1];
    for (s, row) in choices.iter_mut().enumerate().take(length) {
        let entry_cost = if s + 1 == length { 1.0 } else { 0.0 };
        row.push(Choice {
            action: 0,
            outcomes: vec![Outcome::new(s + 1, 1.0, entry_cost)],
        });
        row.push(Choice {
            action: 1,
            outcomes: vec![Outcome::new(s, 1.0, 0.0)],
        });
    }
    CsspMdp::checked(length + 1, 2, choices, Vec::new(), 0, length)
}
