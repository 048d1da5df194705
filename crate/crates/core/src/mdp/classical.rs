//! Classical planning tasks and their three CSSP encodings (optimal,
//! satisficing, agile).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{parse_json, read_text};
use super::{Choice, CsspMdp, Outcome};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalEdge {
    pub from: usize,
    pub action: usize,
    pub to: usize,
    /// Positive action cost; unit when omitted.
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

/// Deterministic labeled transition system with one initial and one goal state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalTask {
    pub states: usize,
    pub edges: Vec<ClassicalEdge>,
    pub initial: usize,
    pub goal: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingMode {
    Optimal,
    Satisficing,
    Agile,
}

impl std::str::FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Self::Optimal),
            "satisficing" => Ok(Self::Satisficing),
            "agile" => Ok(Self::Agile),
            other => Err(Error::config(format!("unknown encoding mode {other:?}"))),
        }
    }
}

impl ClassicalTask {
    pub fn load(path: &Path) -> Result<Self> {
        let task: ClassicalTask = parse_json(&read_text(path)?, path)?;
        task.check()?;
        Ok(task)
    }

    /// Rejects out-of-range states, non-positive weights and
    /// nondeterministic (state, action) pairs.
    pub fn check(&self) -> Result<()> {
        if self.initial >= self.states || self.goal >= self.states {
            return Err(Error::invalid("initial or goal state out of range"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.from >= self.states || e.to >= self.states {
                return Err(Error::invalid(format!(
                    "edge ({}, {}, {}) references a state out of range",
                    e.from, e.action, e.to
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}, {}) has non-positive weight {}",
                    e.from, e.action, e.to, e.weight
                )));
            }
            if !seen.insert((e.from, e.action)) {
                return Err(Error::invalid(format!(
                    "state {} has two edges labeled with action {}",
                    e.from, e.action
                )));
            }
        }
        Ok(())
    }

    /// Minimum plan cost from the initial state to the goal, if reachable.
    pub fn optimal_plan_cost(&self) -> Option<f64> {
        let mut dist = vec![f64::INFINITY; self.states];
        let mut done = vec![false; self.states];
        dist[self.initial] = 0.0;
        loop {
            let next = (0..self.states)
                .filter(|&s| !done[s] && dist[s].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let Some(u) = next else { break };
            if u == self.goal {
                return Some(dist[u]);
            }
            done[u] = true;
            for e in self.edges.iter().filter(|e| e.from == u) {
                let alt = dist[u] + e.weight;
                if alt < dist[e.to] {
                    dist[e.to] = alt;
                }
            }
        }
        None
    }

    pub fn goal_reachable(&self) -> bool {
        self.optimal_plan_cost().is_some()
    }
}

/// Encodes a classical task as a CSSP-MDP.
///
/// * `Optimal`: costs are edge weights (1 for unit tasks), the single
///   constraint cost equals the cost and its bound is the optimal plan cost,
///   computed by uniform-cost search unless `optimal_length` is given.
/// * `Satisficing`: same costs, no constraints.
/// * `Agile`: cost 1 on edges entering the goal, 0 elsewhere, no constraints.
///
/// Goal edges are dropped. A non-goal state without outgoing edges receives
/// a self-loop on an extra action so that every state has an applicable
/// action; policies reaching it are improper.
pub fn encode_classical(
    task: &ClassicalTask,
    mode: EncodingMode,
    optimal_length: Option<f64>,
) -> Result<CsspMdp> {
    task.check()?;
    let best = task.optimal_plan_cost().ok_or(Error::NoProperPolicy)?;
    if let Some(len) = optimal_length {
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::config(format!("optimal length must be positive, got {len}")));
        }
    }

    let with_constraint = mode == EncodingMode::Optimal;
    let cost_of = |e: &ClassicalEdge| match mode {
        EncodingMode::Optimal | EncodingMode::Satisficing => e.weight,
        EncodingMode::Agile => {
            if e.to == task.goal {
                1.0
            } else {
                0.0
            }
        }
    };

    let mut num_actions = task.edges.iter().map(|e| e.action + 1).max().unwrap_or(0);
    let stuck_action = num_actions;
    let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); task.states];
    for e in task.edges.iter().filter(|e| e.from != task.goal) {
        let cost = cost_of(e);
        let mut outcome = Outcome::new(e.to, 1.0, cost);
        if with_constraint {
            outcome = outcome.with_constraints(vec![cost]);
        }
        choices[e.from].push(Choice {
            action: e.action,
            outcomes: vec![outcome],
        });
    }
    for (s, row) in choices.iter_mut().enumerate() {
        if s != task.goal && row.is_empty() {
            num_actions = stuck_action + 1;
            let cost = if mode == EncodingMode::Agile { 0.0 } else { 1.0 };
            let mut outcome = Outcome::new(s, 1.0, cost);
            if with_constraint {
                outcome = outcome.with_constraints(vec![cost]);
            }
            row.push(Choice {
                action: stuck_action,
                outcomes: vec![outcome],
            });
        }
    }

    let constraint_values = if with_constraint {
        vec![optimal_length.unwrap_or(best)]
    } else {
        Vec::new()
    };
    CsspMdp::checked(
        task.states,
        num_actions,
        choices,
        constraint_values,
        task.initial,
        task.goal,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> ClassicalTask {
        // s0 --0--> s1 --0--> g, plus s1 --1--> s0
        ClassicalTask {
            states: 3,
            edges: vec![
                ClassicalEdge { from: 0, action: 0, to: 1, weight: 1.0 },
                ClassicalEdge { from: 1, action: 0, to: 2, weight: 1.0 },
                ClassicalEdge { from: 1, action: 1, to: 0, weight: 1.0 },
            ],
            initial: 0,
            goal: 2,
        }
    }

    #[test]
    fn optimal_mode_sets_single_constraint_to_plan_length() {
        let mdp = encode_classical(&line(), EncodingMode::Optimal, None).unwrap();
        assert_eq!(mdp.constraint_values(), &[2.0]);
        let o = &mdp.choice(0, 0).unwrap().outcomes[0];
        assert_eq!(o.cost, 1.0);
        assert_eq!(o.constraint_costs, vec![1.0]);
    }

    #[test]
    fn satisficing_has_no_constraints_and_agile_charges_goal_entry() {
        let sat = encode_classical(&line(), EncodingMode::Satisficing, None).unwrap();
        assert_eq!(sat.num_constraints(), 0);
        let agile = encode_classical(&line(), EncodingMode::Agile, None).unwrap();
        assert_eq!(agile.choice(0, 0).unwrap().outcomes[0].cost, 0.0);
        assert_eq!(agile.choice(1, 0).unwrap().outcomes[0].cost, 1.0);
    }

    #[test]
    fn unreachable_goal_is_rejected() {
        let mut task = line();
        task.edges.remove(1);
        assert!(matches!(
            encode_classical(&task, EncodingMode::Satisficing, None),
            Err(Error::NoProperPolicy)
        ));
    }

    #[test]
    fn dead_ends_get_a_stuck_self_loop() {
        let task = ClassicalTask {
            states: 3,
            edges: vec![
                ClassicalEdge { from: 0, action: 0, to: 2, weight: 1.0 },
                ClassicalEdge { from: 0, action: 1, to: 1, weight: 1.0 },
            ],
            initial: 0,
            goal: 2,
        };
        let mdp = encode_classical(&task, EncodingMode::Satisficing, None).unwrap();
        assert_eq!(mdp.num_actions(), 3);
        assert_eq!(mdp.choices(1)[0].action, 2);
        assert_eq!(mdp.choices(1)[0].outcomes[0].next, 1);
    }

    #[test]
    fn nondeterministic_edges_are_rejected() {
        let mut task = line();
        task.edges.push(ClassicalEdge { from: 0, action: 0, to: 2, weight: 1.0 });
        assert!(task.check().is_err());
    }
}
