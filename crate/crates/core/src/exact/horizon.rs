use serde::{Deserialize, Serialize};

use super::quality_of_cost;
use crate::mdp::{CsspMdp, PotentialFunction};
use crate::policy::DeterministicPolicy;
use crate::Result;

/// Expectations over trajectories cut off after `horizon` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedEvaluation {
    pub horizon: usize,
    /// Probability of having reached the goal within the horizon.
    pub goal_probability: f64,
    /// Expected cost accumulated within the horizon.
    pub expected_cost: f64,
    pub expected_constraint_costs: Vec<f64>,
    /// Expected potential of the state where unfinished trajectories stop.
    pub expected_terminal_potential: f64,
}

impl TruncatedEvaluation {
    /// Expected smoothed total: truncated trajectories are charged the
    /// potential of their last state, finished ones are not.
    pub fn smoothed_total(&self) -> f64 {
        self.expected_cost + self.expected_terminal_potential
    }

    pub fn smoothed_quality(&self) -> f64 {
        quality_of_cost(self.smoothed_total())
    }
}

/// Finite-horizon forward propagation of the state distribution under
/// `policy`. Without a potential the terminal charge is zero.
pub fn truncated_evaluation(
    mdp: &CsspMdp,
    policy: &DeterministicPolicy,
    horizon: usize,
    potential: Option<&PotentialFunction>,
) -> Result<TruncatedEvaluation> {
    let binding = policy.space().bind(mdp)?;
    let choice_of = binding.resolve(policy.choices());
    let n = mdp.num_states();
    let goal = mdp.goal();
    let k = mdp.num_constraints();

    let mut out = TruncatedEvaluation {
        horizon,
        goal_probability: 0.0,
        expected_cost: 0.0,
        expected_constraint_costs: vec![0.0; k],
        expected_terminal_potential: 0.0,
    };
    let mut mass = vec![0.0; n];
    if mdp.initial() == goal {
        out.goal_probability = 1.0;
        return Ok(out);
    }
    mass[mdp.initial()] = 1.0;
    let mut next = vec![0.0; n];
    for _ in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            let m = mass[s];
            if m == 0.0 {
                continue;
            }
            let c = choice_of[s].expect("reachable states are bound");
            for o in &mdp.choices(s)[c].outcomes {
                let w = m * o.prob;
                out.expected_cost += w * o.cost;
                for (acc, d) in out.expected_constraint_costs.iter_mut().zip(&o.constraint_costs) {
                    *acc += w * d;
                }
                if o.next == goal {
                    out.goal_probability += w;
                } else {
                    next[o.next] += w;
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    if let Some(phi) = potential {
        out.expected_terminal_potential = mass.iter().enumerate().map(|(s, m)| m * phi.value(s)).sum();
    }
    Ok(out)
}
