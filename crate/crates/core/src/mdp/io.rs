//! JSON MDP documents.
//!
//! ```json
//! {
//!   "states": 3, "actions": 1,
//!   "applicable": [[0], [0], []],
//!   "transitions": [{"s": 0, "a": 0, "next": [[1, 1.0]]},
//!                   {"s": 1, "a": 0, "next": [[2, 1.0]]}],
//!   "costs": [[1.0], [1.0]],
//!   "constraint_costs": [[[1.0]], [[1.0]]],
//!   "constraint_values": [2.0],
//!   "initial": 0, "goal": 2
//! }
//! ```
//!
//! `costs[i][j]` and `constraint_costs[i][j]` belong to outcome `j` of
//! `transitions[i]`. `constraint_costs` may be omitted when there are no
//! constraints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_mdp, Choice, CsspMdp, Outcome, Violation, ViolationKind};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub states: usize,
    pub actions: usize,
    pub applicable: Vec<Vec<usize>>,
    pub transitions: Vec<TransitionEntry>,
    pub costs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint_costs: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub constraint_values: Vec<f64>,
    pub initial: usize,
    pub goal: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub s: usize,
    pub a: usize,
    pub next: Vec<(usize, f64)>,
}

impl From<&CsspMdp> for MdpDocument {
    fn from(mdp: &CsspMdp) -> Self {
        let mut applicable = Vec::with_capacity(mdp.num_states());
        let mut transitions = Vec::new();
        let mut costs = Vec::new();
        let mut constraint_costs = Vec::new();
        for (s, row) in mdp.all_choices().iter().enumerate() {
            applicable.push(row.iter().map(|c| c.action).collect());
            for choice in row {
                transitions.push(TransitionEntry {
                    s,
                    a: choice.action,
                    next: choice.outcomes.iter().map(|o| (o.next, o.prob)).collect(),
                });
                costs.push(choice.outcomes.iter().map(|o| o.cost).collect());
                constraint_costs.push(
                    choice
                        .outcomes
                        .iter()
                        .map(|o| o.constraint_costs.clone())
                        .collect(),
                );
            }
        }
        if mdp.num_constraints() == 0 {
            constraint_costs.clear();
        }
        MdpDocument {
            states: mdp.num_states(),
            actions: mdp.num_actions(),
            applicable,
            transitions,
            costs,
            constraint_costs,
            constraint_values: mdp.constraint_values().to_vec(),
            initial: mdp.initial(),
            goal: mdp.goal(),
        }
    }
}

impl MdpDocument {
    /// Converts to an MDP, reporting structural mismatches and model
    /// invariant violations together.
    pub fn into_mdp(self) -> std::result::Result<CsspMdp, Vec<Violation>> {
        use ViolationKind::*;
        let mut violations = Vec::new();
        let n = self.states;
        let k = self.constraint_values.len();

        if self.applicable.len() != n {
            violations.push(Violation::new(
                Structure,
                "applicable",
                format!("{} rows for {n} states", self.applicable.len()),
            ));
        }
        if self.costs.len() != self.transitions.len() {
            violations.push(Violation::new(
                Structure,
                "costs",
                format!("{} rows for {} transitions", self.costs.len(), self.transitions.len()),
            ));
        }
        let has_constraint_rows = !self.constraint_costs.is_empty();
        if (k > 0 || has_constraint_rows) && self.constraint_costs.len() != self.transitions.len() {
            violations.push(Violation::new(
                Structure,
                "constraint_costs",
                format!(
                    "{} rows for {} transitions",
                    self.constraint_costs.len(),
                    self.transitions.len()
                ),
            ));
        }
        if !violations.is_empty() {
            return Err(violations);
        }

        let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); n];
        for (i, t) in self.transitions.iter().enumerate() {
            let loc = format!("transitions[{i}]");
            if t.s >= n {
                violations.push(Violation::new(StateOutOfRange, loc, format!("state {} not in 0..{n}", t.s)));
                continue;
            }
            if !self.applicable[t.s].contains(&t.a) {
                violations.push(Violation::new(
                    Structure,
                    loc,
                    format!("action {} is not applicable in state {}", t.a, t.s),
                ));
                continue;
            }
            if choices[t.s].iter().any(|c| c.action == t.a) {
                violations.push(Violation::new(
                    DuplicateAction,
                    loc,
                    format!("second transition entry for ({}, {})", t.s, t.a),
                ));
                continue;
            }
            if self.costs[i].len() != t.next.len() {
                violations.push(Violation::new(
                    Structure,
                    format!("costs[{i}]"),
                    format!("{} costs for {} outcomes", self.costs[i].len(), t.next.len()),
                ));
                continue;
            }
            if has_constraint_rows && self.constraint_costs[i].len() != t.next.len() {
                violations.push(Violation::new(
                    Structure,
                    format!("constraint_costs[{i}]"),
                    format!(
                        "{} constraint vectors for {} outcomes",
                        self.constraint_costs[i].len(),
                        t.next.len()
                    ),
                ));
                continue;
            }
            let outcomes = t
                .next
                .iter()
                .enumerate()
                .map(|(j, &(next, prob))| Outcome {
                    next,
                    prob,
                    cost: self.costs[i][j],
                    constraint_costs: if has_constraint_rows {
                        self.constraint_costs[i][j].clone()
                    } else {
                        vec![0.0; k]
                    },
                })
                .collect();
            choices[t.s].push(Choice { action: t.a, outcomes });
        }
        for (s, actions) in self.applicable.iter().enumerate() {
            for &a in actions {
                if !choices[s].iter().any(|c| c.action == a) {
                    violations.push(Violation::new(
                        Structure,
                        format!("applicable[{s}]"),
                        format!("action {a} has no transition entry"),
                    ));
                }
            }
        }

        let mdp = CsspMdp::new(n, self.actions, choices, self.constraint_values, self.initial, self.goal);
        violations.extend(validate_mdp(&mdp));
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(violations)
        }
    }
}

/// Parses and validates an MDP document. `origin` only labels errors.
pub fn parse_mdp(text: &str, origin: &Path) -> Result<CsspMdp> {
    let doc: MdpDocument = parse_json(text, origin)?;
    doc.into_mdp().map_err(Error::InvalidMdp)
}

pub fn load_mdp(path: &Path) -> Result<CsspMdp> {
    let text = read_text(path)?;
    parse_mdp(&text, path)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
