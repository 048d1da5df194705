use serde::{Deserialize, Serialize};

use super::{quality_of_cost, SetEvaluator};
use crate::linalg::solve_in_place;
use crate::mdp::CsspMdp;
use crate::par::map_indexed;
use crate::policy::{ContextSpec, KeySpace};
use crate::{Error, Result};

const VI_TOLERANCE: f64 = 1e-9;
const VI_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    Enumeration,
    ValueIteration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScale {
    pub value: f64,
    pub method: ScaleMethod,
}

/// Maximum obtainable quality q* of one MDP.
///
/// Policies are enumerated when their count is at most `cap`; otherwise the
/// optimal expected cost comes from value iteration. Value iteration ignores
/// constraints, so on constrained MDPs it yields an upper bound on q*.
pub fn normalize_quality_scale(mdp: &CsspMdp, cap: u128) -> Result<QualityScale> {
    let space = KeySpace::build(std::slice::from_ref(mdp), &ContextSpec::empty())?;
    match space.check_enumerable(cap) {
        Ok(_) => {
            let policies = space.enumerate(cap)?;
            let eval = SetEvaluator::new(std::slice::from_ref(mdp), &space)?;
            let estimates = map_indexed(policies.len(), |i| {
                eval.evaluate(policies[i].choices()).map(|mut v| v.remove(0))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let best = estimates.iter().map(|e| e.quality).fold(0.0, f64::max);
            if best > 0.0 {
                Ok(QualityScale { value: best, method: ScaleMethod::Enumeration })
            } else if estimates.iter().any(|e| e.proper) {
                Err(Error::NoSolutionPolicy)
            } else {
                Err(Error::NoProperPolicy)
            }
        }
        Err(Error::EnumerationCap { .. }) => Ok(QualityScale {
            value: quality_of_cost(optimal_expected_cost(mdp)?),
            method: ScaleMethod::ValueIteration,
        }),
        Err(e) => Err(e),
    }
}

/// Minimum expected total cost over proper policies, ignoring constraints.
///
/// Restricts the MDP to states from which the goal can be reached almost
/// surely and to actions that never leave that set, seeds value iteration
/// with the cost of a proper policy (an upper bound) and iterates the Bellman
/// operator downward. Starting above the optimum keeps zero-cost cycles from
/// pulling the estimate below it.
pub fn optimal_expected_cost(mdp: &CsspMdp) -> Result<f64> {
    let n = mdp.num_states();
    let goal = mdp.goal();
    if mdp.initial() == goal {
        return Ok(0.0);
    }

    // Largest set from which the goal is reachable with probability 1.
    let mut inside = vec![true; n];
    let (allowed, attractor) = loop {
        let allowed: Vec<Vec<bool>> = (0..n)
            .map(|s| {
                mdp.choices(s)
                    .iter()
                    .map(|c| inside[s] && c.outcomes.iter().all(|o| o.prob <= 0.0 || inside[o.next]))
                    .collect()
            })
            .collect();
        // Backward layering from the goal through allowed actions; the action
        // that first attaches a state forms a proper policy.
        let mut attractor: Vec<Option<usize>> = vec![None; n];
        let mut reached = vec![false; n];
        reached[goal] = true;
        let mut changed = true;
        while changed {
            changed = false;
            let snapshot = reached.clone();
            for s in 0..n {
                if reached[s] {
                    continue;
                }
                if let Some(i) = mdp.choices(s).iter().enumerate().position(|(i, c)| {
                    allowed[s][i] && c.outcomes.iter().any(|o| o.prob > 0.0 && snapshot[o.next])
                }) {
                    reached[s] = true;
                    attractor[s] = Some(i);
                    changed = true;
                }
            }
        }
        if reached == inside {
            break (allowed, attractor);
        }
        inside = reached;
    };
    if !inside[mdp.initial()] {
        return Err(Error::NoProperPolicy);
    }

    // Cost of the attractor policy on the almost-sure set.
    let states: Vec<usize> = (0..n).filter(|&s| inside[s] && s != goal).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        slot[s] = i;
    }
    let m = states.len();
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (i, &s) in states.iter().enumerate() {
        a[i * m + i] += 1.0;
        for o in &mdp.choices(s)[attractor[s].expect("attached state")].outcomes {
            b[i] += o.prob * o.cost;
            if o.next != goal && o.prob > 0.0 {
                a[i * m + slot[o.next]] -= o.prob;
            }
        }
    }
    if !solve_in_place(&mut a, &mut b, m, 1) {
        return Err(Error::invalid("singular cost system for the attractor policy"));
    }
    let mut v = vec![0.0; n];
    for (i, &s) in states.iter().enumerate() {
        v[s] = b[i].max(0.0);
    }

    for _ in 0..VI_MAX_ITERATIONS {
        let mut delta: f64 = 0.0;
        for &s in &states {
            let best = mdp
                .choices(s)
                .iter()
                .enumerate()
                .filter(|(i, _)| allowed[s][*i])
                .map(|(_, c)| c.outcomes.iter().map(|o| o.prob * (o.cost + v[o.next])).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            if best < v[s] {
                delta = delta.max(v[s] - best);
                v[s] = best;
            }
        }
        if delta < VI_TOLERANCE {
            break;
        }
    }
    Ok(v[mdp.initial()])
}
