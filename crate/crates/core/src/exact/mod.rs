//! Exact computations on enumerable instances.
//!
//! Policy evaluation decides properness on the policy-induced graph (every
//! state reachable from the initial state must still be able to reach the
//! goal) and then solves the absorbing-chain linear system over the
//! reachable transient states for the expected total cost and every expected
//! constraint cost at once.

mod distribution;
mod horizon;
mod scale;

pub use distribution::{
    exact_set_distance, exact_task_difficulty, solution_distribution, solution_over,
    temper_distribution, total_variation,
};
pub use horizon::{truncated_evaluation, TruncatedEvaluation};
pub use scale::{normalize_quality_scale, optimal_expected_cost, QualityScale, ScaleMethod};

use serde::{Deserialize, Serialize};

use crate::linalg::solve_in_place;
use crate::mdp::CsspMdp;
use crate::policy::{Binding, DeterministicPolicy, KeySpace};
use crate::report::{inf_f64, inf_vec};
use crate::{Error, Result};

/// Slack on constraint checks, `E[Σd_i] <= v_i + CONSTRAINT_TOLERANCE`.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Quality assigned when a proper policy has zero expected cost.
pub const QUALITY_CAP: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityEstimate {
    pub proper: bool,
    #[serde(with = "inf_f64")]
    pub expected_total_cost: f64,
    #[serde(with = "inf_vec")]
    pub expected_constraint_costs: Vec<f64>,
    pub constraints_satisfied: bool,
    pub quality: f64,
}

impl QualityEstimate {
    pub fn improper(num_constraints: usize) -> Self {
        Self {
            proper: false,
            expected_total_cost: f64::INFINITY,
            expected_constraint_costs: vec![f64::INFINITY; num_constraints],
            constraints_satisfied: false,
            quality: 0.0,
        }
    }

    /// Quality of a proper policy with the given expected totals.
    pub fn from_totals(cost: f64, constraint_costs: Vec<f64>, bounds: &[f64]) -> Self {
        let satisfied = constraint_costs
            .iter()
            .zip(bounds)
            .all(|(d, v)| *d <= v + CONSTRAINT_TOLERANCE);
        Self {
            proper: true,
            expected_total_cost: cost,
            constraints_satisfied: satisfied,
            quality: if satisfied { quality_of_cost(cost) } else { 0.0 },
            expected_constraint_costs: constraint_costs,
        }
    }
}

/// `1 / cost`, capped at [`QUALITY_CAP`].
pub fn quality_of_cost(cost: f64) -> f64 {
    if cost <= 1.0 / QUALITY_CAP {
        QUALITY_CAP
    } else {
        1.0 / cost
    }
}

/// Evaluates `policy` on `mdp`. The policy must cover the MDP's reachable keys.
pub fn exact_policy_evaluation(mdp: &CsspMdp, policy: &DeterministicPolicy) -> Result<QualityEstimate> {
    let binding = policy.space().bind(mdp)?;
    evaluate_resolved(mdp, &binding.resolve(policy.choices()))
}

/// Evaluation on per-state choice positions (`None` where the policy is
/// never consulted).
pub fn evaluate_resolved(mdp: &CsspMdp, choice_of: &[Option<usize>]) -> Result<QualityEstimate> {
    let n = mdp.num_states();
    let k = mdp.num_constraints();
    let goal = mdp.goal();
    if mdp.initial() == goal {
        return Ok(QualityEstimate::from_totals(0.0, vec![0.0; k], mdp.constraint_values()));
    }

    // States reachable under the policy, in discovery order.
    let mut slot = vec![usize::MAX; n];
    let mut order = vec![mdp.initial()];
    slot[mdp.initial()] = 0;
    let mut head = 0;
    let mut goal_seen = false;
    while head < order.len() {
        let s = order[head];
        head += 1;
        let c = choice_of[s].ok_or(Error::UncoveredState { state: s })?;
        for o in mdp.choices(s)[c].outcomes.iter().filter(|o| o.prob > 0.0) {
            if o.next == goal {
                goal_seen = true;
            } else if slot[o.next] == usize::MAX {
                slot[o.next] = order.len();
                order.push(o.next);
            }
        }
    }
    if !goal_seen {
        return Ok(QualityEstimate::improper(k));
    }

    // Every reachable state must keep a path to the goal.
    let m = order.len();
    let mut preds = vec![Vec::new(); m];
    let mut can_finish = vec![false; m];
    let mut stack = Vec::new();
    for (i, &s) in order.iter().enumerate() {
        for o in mdp.choices(s)[choice_of[s].unwrap()].outcomes.iter().filter(|o| o.prob > 0.0) {
            if o.next == goal {
                if !can_finish[i] {
                    can_finish[i] = true;
                    stack.push(i);
                }
            } else {
                preds[slot[o.next]].push(i);
            }
        }
    }
    while let Some(i) = stack.pop() {
        for &p in &preds[i] {
            if !can_finish[p] {
                can_finish[p] = true;
                stack.push(p);
            }
        }
    }
    if can_finish.iter().any(|f| !f) {
        return Ok(QualityEstimate::improper(k));
    }

    // (I - P) x = r with one column for the cost and one per constraint.
    let cols = 1 + k;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m * cols];
    for (i, &s) in order.iter().enumerate() {
        a[i * m + i] += 1.0;
        for o in &mdp.choices(s)[choice_of[s].unwrap()].outcomes {
            b[i * cols] += o.prob * o.cost;
            for (j, d) in o.constraint_costs.iter().enumerate() {
                b[i * cols + 1 + j] += o.prob * d;
            }
            if o.next != goal && o.prob > 0.0 {
                a[i * m + slot[o.next]] -= o.prob;
            }
        }
    }
    if !solve_in_place(&mut a, &mut b, m, cols) {
        return Err(Error::invalid(
            "singular cost system for a policy that reaches the goal almost surely",
        ));
    }
    let cost = b[0].max(0.0);
    let constraint_costs = (0..k).map(|j| b[1 + j].max(0.0)).collect();
    Ok(QualityEstimate::from_totals(cost, constraint_costs, mdp.constraint_values()))
}

/// Precomputed bindings of a set of MDPs into one key space.
#[derive(Clone, Debug)]
pub struct SetEvaluator<'a> {
    mdps: &'a [CsspMdp],
    bindings: Vec<Binding>,
}

impl<'a> SetEvaluator<'a> {
    pub fn new(mdps: &'a [CsspMdp], space: &KeySpace) -> Result<Self> {
        let bindings = mdps.iter().map(|m| space.bind(m)).collect::<Result<_>>()?;
        Ok(Self { mdps, bindings })
    }

    pub fn mdps(&self) -> &'a [CsspMdp] {
        self.mdps
    }

    pub fn evaluate(&self, choices: &[usize]) -> Result<Vec<QualityEstimate>> {
        self.mdps
            .iter()
            .zip(&self.bindings)
            .map(|(m, b)| evaluate_resolved(m, &b.resolve(choices)))
            .collect()
    }

    /// Product of per-MDP qualities, stopping at the first zero.
    pub fn set_quality(&self, choices: &[usize]) -> Result<f64> {
        let mut q = 1.0;
        for (m, b) in self.mdps.iter().zip(&self.bindings) {
            q *= evaluate_resolved(m, &b.resolve(choices))?.quality;
            if q == 0.0 {
                break;
            }
        }
        Ok(q)
    }
}

/// Set quality: the product of the per-MDP exact qualities.
pub fn quality_on_set(mdps: &[CsspMdp], policy: &DeterministicPolicy) -> Result<f64> {
    SetEvaluator::new(mdps, policy.space())?.set_quality(policy.choices())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{MdpBuilder, Outcome};
    use crate::policy::ContextSpec;
    use std::sync::Arc;

    fn only_policy(mdp: &CsspMdp, actions: &[usize]) -> DeterministicPolicy {
        let space = KeySpace::build(std::slice::from_ref(mdp), &ContextSpec::empty()).unwrap();
        DeterministicPolicy::from_actions(space, actions).unwrap()
    }

    #[test]
    fn two_step_chain() {
        let mdp = MdpBuilder::new(3, 1).edge(0, 0, 1, 1.0).edge(1, 0, 2, 1.0).build().unwrap();
        let q = exact_policy_evaluation(&mdp, &only_policy(&mdp, &[0, 0])).unwrap();
        assert!(q.proper);
        assert_eq!(q.expected_total_cost, 2.0);
        assert_eq!(q.quality, 0.5);
    }

    #[test]
    fn self_loop_is_improper() {
        let mdp = MdpBuilder::new(2, 2).edge(0, 0, 1, 1.0).edge(0, 1, 0, 1.0).build().unwrap();
        let q = exact_policy_evaluation(&mdp, &only_policy(&mdp, &[1])).unwrap();
        assert!(!q.proper);
        assert_eq!(q.quality, 0.0);
        assert!(q.expected_total_cost.is_infinite());
    }

    #[test]
    fn coin_flip_geometric_cost() {
        let mdp = MdpBuilder::new(2, 1)
            .action(0, 0, vec![Outcome::new(1, 0.5, 1.0), Outcome::new(0, 0.5, 1.0)])
            .build()
            .unwrap();
        let q = exact_policy_evaluation(&mdp, &only_policy(&mdp, &[0])).unwrap();
        assert!((q.expected_total_cost - 2.0).abs() < 1e-12);
        assert!((q.quality - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partially_absorbing_policy_is_improper() {
        // From s0: half to goal, half to a trap s1 that loops forever.
        let mdp = MdpBuilder::new(3, 1)
            .goal(2)
            .action(0, 0, vec![Outcome::new(2, 0.5, 1.0), Outcome::new(1, 0.5, 1.0)])
            .edge(1, 0, 1, 0.0)
            .build()
            .unwrap();
        let q = exact_policy_evaluation(&mdp, &only_policy(&mdp, &[0, 0])).unwrap();
        assert!(!q.proper);
    }

    #[test]
    fn constraint_violation_zeroes_quality() {
        let mdp = MdpBuilder::new(2, 1)
            .constraint_values(vec![0.5])
            .action(0, 0, vec![Outcome::new(1, 1.0, 1.0).with_constraints(vec![1.0])])
            .build()
            .unwrap();
        let q = exact_policy_evaluation(&mdp, &only_policy(&mdp, &[0])).unwrap();
        assert!(q.proper && !q.constraints_satisfied);
        assert_eq!(q.quality, 0.0);
        assert_eq!(q.expected_constraint_costs, vec![1.0]);
    }

    #[test]
    fn initial_goal_gets_capped_quality() {
        let mdp = MdpBuilder::new(2, 1).goal(0).edge(1, 0, 0, 1.0).build().unwrap();
        let space = KeySpace::build(std::slice::from_ref(&mdp), &ContextSpec::empty()).unwrap();
        let p = DeterministicPolicy::from_choices(Arc::clone(&space), vec![]).unwrap();
        let q = exact_policy_evaluation(&mdp, &p).unwrap();
        assert_eq!(q.quality, QUALITY_CAP);
    }

    #[test]
    fn set_quality_is_product() {
        let m1 = MdpBuilder::new(3, 1).edge(0, 0, 1, 1.0).edge(1, 0, 2, 1.0).build().unwrap();
        let set = vec![m1.clone(), m1.clone()];
        let p = only_policy(&m1, &[0, 0]);
        assert_eq!(quality_on_set(&set, &p).unwrap(), 0.25);
        assert_eq!(quality_on_set(&set[..1], &p).unwrap(), 0.5);
    }
}
