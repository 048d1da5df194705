use serde::{Deserialize, Serialize};

use super::CsspMdp;
use crate::{Error, Result};

/// State potential Φ with Φ(goal) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PotentialFunction {
    values: Vec<f64>,
}

impl PotentialFunction {
    pub fn new(mdp: &CsspMdp, values: Vec<f64>) -> Result<Self> {
        if values.len() != mdp.num_states() {
            return Err(Error::invalid(format!(
                "potential has {} values for {} states",
                values.len(),
                mdp.num_states()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("potential value {v} is not finite")));
        }
        if values[mdp.goal()] != 0.0 {
            return Err(Error::NonZeroGoalPotential(values[mdp.goal()]));
        }
        Ok(Self { values })
    }

    pub fn zero(mdp: &CsspMdp) -> Self {
        Self {
            values: vec![0.0; mdp.num_states()],
        }
    }

    /// `offset + scale * steps-to-goal` for every non-goal state, where
    /// steps-to-goal is the fewest transitions (over positive-probability
    /// outcomes) needed to reach the goal. States that cannot reach the goal
    /// get `offset + scale * num_states`.
    pub fn goal_distance(mdp: &CsspMdp, offset: f64, scale: f64) -> Self {
        let n = mdp.num_states();
        let mut dist = vec![usize::MAX; n];
        dist[mdp.goal()] = 0;
        // Reverse BFS over the positive-probability successor relation.
        let mut preds = vec![Vec::new(); n];
        for (s, row) in mdp.all_choices().iter().enumerate() {
            for c in row {
                for o in c.outcomes.iter().filter(|o| o.prob > 0.0) {
                    preds[o.next].push(s);
                }
            }
        }
        let mut queue = std::collections::VecDeque::from([mdp.goal()]);
        while let Some(u) = queue.pop_front() {
            for &p in &preds[u] {
                if dist[p] == usize::MAX {
                    dist[p] = dist[u] + 1;
                    queue.push_back(p);
                }
            }
        }
        let values = dist
            .iter()
            .enumerate()
            .map(|(s, &d)| {
                if s == mdp.goal() {
                    0.0
                } else if d == usize::MAX {
                    offset + scale * n as f64
                } else {
                    offset + scale * d as f64
                }
            })
            .collect();
        Self { values }
    }

    /// Seeded potential that never produces a negative shaped cost.
    ///
    /// Every outcome cost is multiplied by an independent uniform factor in
    /// `[0, 1]` and Φ is the shortest-path distance to the goal under those
    /// reduced costs, so `Φ(s) <= c + Φ(s')` on every transition. States that
    /// cannot reach the goal get the largest finite distance.
    pub fn random_consistent(mdp: &CsspMdp, seed: u64) -> Self {
        use rand::Rng;
        let n = mdp.num_states();
        let mut rng = crate::rng::SeedStream::new(seed).rng(crate::rng::Stream::Generator, 0);
        let mut edges = Vec::new();
        for (s, row) in mdp.all_choices().iter().enumerate() {
            for c in row {
                for o in c.outcomes.iter().filter(|o| o.prob > 0.0) {
                    edges.push((s, o.next, o.cost * rng.random::<f64>()));
                }
            }
        }
        // Bellman-Ford towards the goal; graphs here are small.
        let mut dist = vec![f64::INFINITY; n];
        dist[mdp.goal()] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for &(s, t, c) in &edges {
                if s != mdp.goal() && dist[t] + c < dist[s] {
                    dist[s] = dist[t] + c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let top = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        Self {
            values: dist.into_iter().map(|d| if d.is_finite() { d } else { top }).collect(),
        }
    }

    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Potential-based cost shaping: c̃(s,a,s') = c(s,a,s') + Φ(s') − Φ(s).
///
/// Constraint costs and bounds are untouched. A potential that would make any
/// shaped cost negative is rejected instead of clamped, because clamping
/// breaks the telescoping identity that preserves the policy ordering.
pub fn shape_costs(mdp: &CsspMdp, potential: &PotentialFunction) -> Result<CsspMdp> {
    if potential.values.len() != mdp.num_states() {
        return Err(Error::invalid("potential does not match the MDP state count"));
    }
    if potential.values[mdp.goal()] != 0.0 {
        return Err(Error::NonZeroGoalPotential(potential.values[mdp.goal()]));
    }
    let mut offending = None;
    let shaped = mdp.map_costs(|s, choice, o| {
        let c = o.cost + potential.values[o.next] - potential.values[s];
        if c < 0.0 && offending.is_none() {
            offending = Some(Error::NegativeShapedCost {
                state: s,
                action: choice.action,
                next: o.next,
                shaped: c,
            });
        }
        c
    });
    match offending {
        Some(err) => Err(err),
        None => Ok(shaped),
    }
}
