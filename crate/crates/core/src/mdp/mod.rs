//! Constrained stochastic shortest path MDPs.
//!
//! States and actions are dense indices. Each state owns its list of
//! [`Choice`]s, one per applicable action, sorted by action index; a choice
//! carries the outcome distribution together with the cost and constraint
//! cost vector of every outcome. Keeping the three maps side by side makes
//! "transitions are defined exactly for applicable pairs" structural.

mod classical;
mod generate;
pub(crate) mod io;
mod shaping;

pub use classical::{encode_classical, ClassicalEdge, ClassicalTask, EncodingMode};
pub use generate::{
    generate_random_mdp, grid_action, gridworld, sparse_chain, GridMoves, GridworldConfig,
    RandomMdpConfig,
};
pub use io::{load_mdp, parse_mdp, MdpDocument, TransitionEntry};
pub use shaping::{shape_costs, PotentialFunction};

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Tolerance on the per-row probability mass.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub cost: f64,
    pub constraint_costs: Vec<f64>,
}

impl Outcome {
    pub fn new(next: usize, prob: f64, cost: f64) -> Self {
        Self {
            next,
            prob,
            cost,
            constraint_costs: Vec::new(),
        }
    }

    pub fn with_constraints(mut self, constraint_costs: Vec<f64>) -> Self {
        self.constraint_costs = constraint_costs;
        self
    }
}

/// One applicable action of a state and its outcome distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub outcomes: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsspMdp {
    num_states: usize,
    num_actions: usize,
    choices: Vec<Vec<Choice>>,
    constraint_values: Vec<f64>,
    initial: usize,
    goal: usize,
}

impl CsspMdp {
    /// Assembles an MDP without checking invariants; see [`validate_mdp`].
    ///
    /// `choices` must have one entry per state. Choices are sorted by action
    /// index.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        mut choices: Vec<Vec<Choice>>,
        constraint_values: Vec<f64>,
        initial: usize,
        goal: usize,
    ) -> Self {
        choices.resize_with(num_states, Vec::new);
        for row in &mut choices {
            row.sort_by_key(|c| c.action);
        }
        Self {
            num_states,
            num_actions,
            choices,
            constraint_values,
            initial,
            goal,
        }
    }

    /// Like [`CsspMdp::new`] but rejects the result if any invariant fails.
    pub fn checked(
        num_states: usize,
        num_actions: usize,
        choices: Vec<Vec<Choice>>,
        constraint_values: Vec<f64>,
        initial: usize,
        goal: usize,
    ) -> crate::Result<Self> {
        let mdp = Self::new(
            num_states,
            num_actions,
            choices,
            constraint_values,
            initial,
            goal,
        );
        let violations = validate_mdp(&mdp);
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(crate::Error::InvalidMdp(violations))
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    /// Number of constraints K.
    pub fn num_constraints(&self) -> usize {
        self.constraint_values.len()
    }

    pub fn constraint_values(&self) -> &[f64] {
        &self.constraint_values
    }

    /// Applicable choices of `state`, sorted by action index.
    pub fn choices(&self, state: usize) -> &[Choice] {
        &self.choices[state]
    }

    pub fn all_choices(&self) -> &[Vec<Choice>] {
        &self.choices
    }

    /// App(s) as action indices.
    pub fn applicable(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.choices[state].iter().map(|c| c.action)
    }

    pub fn choice(&self, state: usize, action: usize) -> Option<&Choice> {
        self.choices[state].iter().find(|c| c.action == action)
    }

    /// Reachable states S_R, see [`reachable_states`].
    pub fn reachable(&self) -> Vec<usize> {
        reachable_states(self)
    }

    /// Rebuilds the MDP with every outcome cost replaced by `f(state, choice, outcome)`.
    pub fn map_costs(&self, mut f: impl FnMut(usize, &Choice, &Outcome) -> f64) -> CsspMdp {
        let choices = self
            .choices
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .map(|choice| Choice {
                        action: choice.action,
                        outcomes: choice
                            .outcomes
                            .iter()
                            .map(|o| Outcome {
                                cost: f(s, choice, o),
                                ..o.clone()
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        CsspMdp {
            choices,
            constraint_values: self.constraint_values.clone(),
            ..*self
        }
    }

    /// Stable 64-bit digest of one MDP element, used as a context value.
    pub fn element_digest(&self, element: MdpElement) -> u64 {
        let mut hasher = Sha256::new();
        match element {
            MdpElement::Transitions => {
                hasher.update(b"T");
                self.visit_outcomes(|s, a, o| {
                    hasher.update((s as u64).to_le_bytes());
                    hasher.update((a as u64).to_le_bytes());
                    hasher.update((o.next as u64).to_le_bytes());
                    hasher.update(o.prob.to_le_bytes());
                });
            }
            MdpElement::Costs => {
                hasher.update(b"C");
                self.visit_outcomes(|s, a, o| {
                    hasher.update((s as u64).to_le_bytes());
                    hasher.update((a as u64).to_le_bytes());
                    hasher.update((o.next as u64).to_le_bytes());
                    hasher.update(o.cost.to_le_bytes());
                });
            }
            MdpElement::Constraints => {
                hasher.update(b"D");
                for v in &self.constraint_values {
                    hasher.update(v.to_le_bytes());
                }
                self.visit_outcomes(|s, a, o| {
                    hasher.update((s as u64).to_le_bytes());
                    hasher.update((a as u64).to_le_bytes());
                    hasher.update((o.next as u64).to_le_bytes());
                    for d in &o.constraint_costs {
                        hasher.update(d.to_le_bytes());
                    }
                });
            }
        }
        let bytes = hasher.finalize();
        u64::from_le_bytes(bytes[..8].try_into().expect("sha256 output is 32 bytes"))
    }

    fn visit_outcomes(&self, mut f: impl FnMut(usize, usize, &Outcome)) {
        for (s, row) in self.choices.iter().enumerate() {
            for choice in row {
                for o in &choice.outcomes {
                    f(s, choice.action, o);
                }
            }
        }
    }
}

/// Elements of an MDP that can be hashed into a context value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdpElement {
    Transitions,
    Costs,
    Constraints,
}

/// Incremental construction helper, mostly for tests and generators.
#[derive(Clone, Debug)]
pub struct MdpBuilder {
    num_states: usize,
    num_actions: usize,
    choices: Vec<Vec<Choice>>,
    constraint_values: Vec<f64>,
    initial: usize,
    goal: usize,
}

impl MdpBuilder {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            choices: vec![Vec::new(); num_states],
            constraint_values: Vec::new(),
            initial: 0,
            goal: num_states.saturating_sub(1),
        }
    }

    pub fn initial(mut self, s: usize) -> Self {
        self.initial = s;
        self
    }

    pub fn goal(mut self, s: usize) -> Self {
        self.goal = s;
        self
    }

    pub fn constraint_values(mut self, values: Vec<f64>) -> Self {
        self.constraint_values = values;
        self
    }

    pub fn action(mut self, state: usize, action: usize, outcomes: Vec<Outcome>) -> Self {
        self.choices[state].push(Choice { action, outcomes });
        self
    }

    /// Deterministic transition shorthand.
    pub fn edge(self, state: usize, action: usize, next: usize, cost: f64) -> Self {
        self.action(state, action, vec![Outcome::new(next, 1.0, cost)])
    }

    pub fn build_unchecked(self) -> CsspMdp {
        CsspMdp::new(
            self.num_states,
            self.num_actions,
            self.choices,
            self.constraint_values,
            self.initial,
            self.goal,
        )
    }

    pub fn build(self) -> crate::Result<CsspMdp> {
        CsspMdp::checked(
            self.num_states,
            self.num_actions,
            self.choices,
            self.constraint_values,
            self.initial,
            self.goal,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    StateOutOfRange,
    ActionOutOfRange,
    DuplicateAction,
    NoApplicableActions,
    EmptyTransition,
    NegativeProbability,
    ProbabilityMass,
    NegativeCost,
    NonFinite,
    ConstraintArity,
    NonTerminalGoal,
    Structure,
}

/// One failed invariant with its location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(kind: ViolationKind, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.message)
    }
}

/// Checks every model invariant; an empty list means the MDP is valid.
pub fn validate_mdp(mdp: &CsspMdp) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let n = mdp.num_states;
    let k = mdp.constraint_values.len();

    if mdp.initial >= n {
        out.push(Violation::new(StateOutOfRange, "initial", format!("initial state {} not in 0..{n}", mdp.initial)));
    }
    if mdp.goal >= n {
        out.push(Violation::new(StateOutOfRange, "goal", format!("goal state {} not in 0..{n}", mdp.goal)));
    }
    for (i, v) in mdp.constraint_values.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::new(NonFinite, format!("constraint_values[{i}]"), "constraint value is not finite"));
        }
    }
    if mdp.choices.len() != n {
        out.push(Violation::new(Structure, "choices", format!("{} choice rows for {n} states", mdp.choices.len())));
    }

    for (s, row) in mdp.choices.iter().enumerate() {
        if row.is_empty() && s != mdp.goal {
            out.push(Violation::new(NoApplicableActions, format!("state {s}"), "non-goal state has no applicable actions"));
        }
        for (i, choice) in row.iter().enumerate() {
            let loc = format!("({s}, {})", choice.action);
            if choice.action >= mdp.num_actions {
                out.push(Violation::new(ActionOutOfRange, loc.clone(), format!("action not in 0..{}", mdp.num_actions)));
            }
            if row[..i].iter().any(|c| c.action == choice.action) {
                out.push(Violation::new(DuplicateAction, loc.clone(), "action listed twice"));
            }
            if choice.outcomes.is_empty() {
                out.push(Violation::new(EmptyTransition, loc.clone(), "applicable action has no outcomes"));
                continue;
            }
            let mut mass = 0.0;
            for o in &choice.outcomes {
                let oloc = format!("({s}, {}, {})", choice.action, o.next);
                if o.next >= n {
                    out.push(Violation::new(StateOutOfRange, oloc.clone(), format!("next state not in 0..{n}")));
                }
                if !o.prob.is_finite() || !o.cost.is_finite() || o.constraint_costs.iter().any(|d| !d.is_finite()) {
                    out.push(Violation::new(NonFinite, oloc.clone(), "probability or cost is not finite"));
                    continue;
                }
                if o.prob < 0.0 {
                    out.push(Violation::new(NegativeProbability, oloc.clone(), format!("probability {}", o.prob)));
                }
                mass += o.prob;
                if o.cost < 0.0 {
                    out.push(Violation::new(NegativeCost, oloc.clone(), format!("cost {}", o.cost)));
                }
                if o.constraint_costs.len() != k {
                    out.push(Violation::new(
                        ConstraintArity,
                        oloc.clone(),
                        format!("{} constraint costs, expected {k}", o.constraint_costs.len()),
                    ));
                }
            }
            if (mass - 1.0).abs() > PROBABILITY_TOLERANCE {
                out.push(Violation::new(ProbabilityMass, loc, format!("outcome probabilities sum to {mass}")));
            }
        }
    }

    if mdp.goal < mdp.choices.len() {
        for choice in &mdp.choices[mdp.goal] {
            let terminal = choice.outcomes.iter().all(|o| {
                o.next == mdp.goal
                    && o.cost == 0.0
                    && o.constraint_costs.iter().all(|&d| d == 0.0)
            });
            if !terminal {
                out.push(Violation::new(
                    NonTerminalGoal,
                    format!("({}, {})", mdp.goal, choice.action),
                    "goal actions must be zero-cost self-loops",
                ));
            }
        }
    }
    out
}

/// States reachable from the initial state through applicable actions
/// (outcomes with positive probability), in ascending order. The goal is
/// terminal and never expanded.
pub fn reachable_states(mdp: &CsspMdp) -> Vec<usize> {
    let mut seen = vec![false; mdp.num_states];
    let mut queue = VecDeque::new();
    seen[mdp.initial] = true;
    queue.push_back(mdp.initial);
    while let Some(s) = queue.pop_front() {
        if s == mdp.goal {
            continue;
        }
        for choice in &mdp.choices[s] {
            for o in &choice.outcomes {
                if o.prob > 0.0 && !seen[o.next] {
                    seen[o.next] = true;
                    queue.push_back(o.next);
                }
            }
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(s, &r)| r.then_some(s))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// s0 -> s1 -> g with unit costs.
    pub(crate) fn chain() -> CsspMdp {
        MdpBuilder::new(3, 1)
            .edge(0, 0, 1, 1.0)
            .edge(1, 0, 2, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn well_formed_chain_has_no_violations() {
        assert!(validate_mdp(&chain()).is_empty());
    }

    #[test]
    fn short_probability_row_is_reported() {
        let mdp = MdpBuilder::new(2, 1)
            .action(0, 0, vec![Outcome::new(1, 0.9, 1.0)])
            .build_unchecked();
        let v = validate_mdp(&mdp);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ProbabilityMass);
    }

    #[test]
    fn negative_cost_is_reported() {
        let mdp = MdpBuilder::new(2, 1).edge(0, 0, 1, -1.0).build_unchecked();
        let v = validate_mdp(&mdp);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::NegativeCost);
    }

    #[test]
    fn goal_must_be_terminal() {
        let mdp = MdpBuilder::new(2, 1)
            .edge(0, 0, 1, 1.0)
            .edge(1, 0, 0, 0.0)
            .build_unchecked();
        let v = validate_mdp(&mdp);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::NonTerminalGoal);

        let self_loop = MdpBuilder::new(2, 1)
            .edge(0, 0, 1, 1.0)
            .edge(1, 0, 1, 0.0)
            .build_unchecked();
        assert!(validate_mdp(&self_loop).is_empty());
    }

    #[test]
    fn constraint_arity_and_range() {
        let mdp = MdpBuilder::new(2, 1)
            .constraint_values(vec![1.0])
            .action(0, 0, vec![Outcome::new(5, 1.0, 1.0)])
            .build_unchecked();
        let kinds: Vec<_> = validate_mdp(&mdp).into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::StateOutOfRange));
        assert!(kinds.contains(&ViolationKind::ConstraintArity));
    }

    #[test]
    fn reachable_chain_and_isolated_state() {
        assert_eq!(reachable_states(&chain()), vec![0, 1, 2]);
        let mdp = MdpBuilder::new(4, 1)
            .goal(2)
            .edge(0, 0, 1, 1.0)
            .edge(1, 0, 2, 1.0)
            .edge(3, 0, 2, 1.0)
            .build()
            .unwrap();
        assert_eq!(reachable_states(&mdp), vec![0, 1, 2]);
    }

    #[test]
    fn initial_equal_goal_reaches_only_goal() {
        let mdp = MdpBuilder::new(2, 1)
            .initial(1)
            .goal(1)
            .edge(0, 0, 1, 1.0)
            .build()
            .unwrap();
        assert_eq!(reachable_states(&mdp), vec![1]);
    }

    #[test]
    fn digests_distinguish_elements() {
        let a = chain();
        let b = a.map_costs(|_, _, o| o.cost * 2.0);
        assert_eq!(
            a.element_digest(MdpElement::Transitions),
            b.element_digest(MdpElement::Transitions)
        );
        assert_ne!(a.element_digest(MdpElement::Costs), b.element_digest(MdpElement::Costs));
    }
}
