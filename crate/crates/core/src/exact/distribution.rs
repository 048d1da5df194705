use std::sync::Arc;

use super::SetEvaluator;
use crate::mdp::CsspMdp;
use crate::par::map_indexed;
use crate::policy::{ContextSpec, ExplicitDistribution, KeySpace, PolicyUniverse};
use crate::report::{DifficultyReport, Method};
use crate::{Error, Result};

/// Solution distribution of `mdps` over an already enumerated universe:
/// mass proportional to set quality.
pub fn solution_over(universe: &Arc<PolicyUniverse>, mdps: &[CsspMdp]) -> Result<ExplicitDistribution> {
    let eval = SetEvaluator::new(mdps, universe.space())?;
    let policies = universe.policies();
    let qualities = map_indexed(policies.len(), |i| eval.set_quality(policies[i].choices()))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    if qualities.iter().all(|&q| q == 0.0) {
        return Err(Error::NoSolutionPolicy);
    }
    ExplicitDistribution::from_weights(universe.clone(), qualities)
}

/// P*(Π) over the policy space of `mdps`.
pub fn solution_distribution(mdps: &[CsspMdp], context: &ContextSpec, cap: u128) -> Result<ExplicitDistribution> {
    let space = KeySpace::build(mdps, context)?;
    solution_over(&PolicyUniverse::enumerate(&space, cap)?, mdps)
}

/// Half the L1 distance between two distributions over the same universe.
pub fn total_variation(a: &ExplicitDistribution, b: &ExplicitDistribution) -> Result<f64> {
    if !a.same_universe(b) {
        return Err(Error::UniverseMismatch);
    }
    let l1: f64 = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

fn joint_universe(a: &[CsspMdp], b: &[CsspMdp], context: &ContextSpec, cap: u128) -> Result<Arc<PolicyUniverse>> {
    let all: Vec<CsspMdp> = a.iter().chain(b).cloned().collect();
    let space = KeySpace::build(&all, context)?;
    PolicyUniverse::enumerate(&space, cap)
}

/// TV(U, P*_train) + TV(P*_train, P*_test), with policies over the keys of
/// both sets.
pub fn exact_task_difficulty(
    train: &[CsspMdp],
    test: &[CsspMdp],
    context: &ContextSpec,
    cap: u128,
) -> Result<DifficultyReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::config("train and test sets must be nonempty"));
    }
    let universe = joint_universe(train, test, context, cap)?;
    let uniform = ExplicitDistribution::uniform(universe.clone());
    let p_train = solution_over(&universe, train)?;
    let p_test = solution_over(&universe, test)?;
    let train_term = total_variation(&uniform, &p_train)?;
    let distance_term = total_variation(&p_train, &p_test)?;
    Ok(DifficultyReport {
        method: Method::Exact,
        train_term,
        distance_term,
        total: train_term + distance_term,
        degenerate: false,
        sample_count: universe.len() as u64,
        rollouts: None,
        max_steps: None,
        seed: None,
        rescaled: None,
        warnings: Vec::new(),
    })
}

/// d(M1, M2) = TV(P*_M1, P*_M2).
pub fn exact_set_distance(m1: &[CsspMdp], m2: &[CsspMdp], context: &ContextSpec, cap: u128) -> Result<f64> {
    let universe = joint_universe(m1, m2, context, cap)?;
    total_variation(&solution_over(&universe, m1)?, &solution_over(&universe, m2)?)
}

/// Masses proportional to `d(π)^beta`. `beta = 0` gives the uniform
/// distribution over the support of `d`.
pub fn temper_distribution(d: &ExplicitDistribution, beta: f64) -> Result<ExplicitDistribution> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::config(format!("beta must be a finite nonnegative number, got {beta}")));
    }
    if beta == 1.0 {
        return Ok(d.clone());
    }
    // Work relative to the largest mass so tiny masses do not underflow first.
    let max = d.probs().iter().copied().fold(0.0, f64::max);
    let weights = d
        .probs()
        .iter()
        .map(|&p| if p > 0.0 { (beta * (p / max).ln()).exp() } else { 0.0 })
        .collect();
    ExplicitDistribution::from_weights(d.universe().clone(), weights)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;
    use crate::policy::{uniform_distribution, DEFAULT_ENUMERATION_CAP};

    /// One decision: action 0 reaches the goal in 2 steps, action 1 in 3.
    pub(crate) fn two_policy_chain() -> CsspMdp {
        MdpBuilder::new(4, 2)
            .goal(3)
            .edge(0, 0, 2, 1.0)
            .edge(0, 1, 1, 1.0)
            .edge(1, 0, 2, 1.0)
            .edge(2, 0, 3, 1.0)
            .build()
            .unwrap()
    }

    fn cap() -> u128 {
        DEFAULT_ENUMERATION_CAP
    }

    #[test]
    fn masses_follow_qualities() {
        let mdp = two_policy_chain();
        // Keys 0, 1, 2 but only key 0 has a choice; state 1 is reachable.
        let d = solution_distribution(&[mdp], &ContextSpec::empty(), cap()).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.probs()[0] - 0.6).abs() < 1e-12);
        assert!((d.probs()[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn two_policy_difficulty_is_point_one() {
        let mdp = two_policy_chain();
        let r = exact_task_difficulty(&[mdp.clone()], &[mdp], &ContextSpec::empty(), cap()).unwrap();
        assert!((r.train_term - 0.1).abs() < 1e-12);
        assert_eq!(r.distance_term, 0.0);
        assert!((r.total - 0.1).abs() < 1e-12);
    }

    #[test]
    fn no_solution_is_an_error() {
        let mdp = MdpBuilder::new(2, 1)
            .constraint_values(vec![0.0])
            .action(0, 0, vec![crate::mdp::Outcome::new(1, 1.0, 1.0).with_constraints(vec![1.0])])
            .build()
            .unwrap();
        assert!(matches!(
            solution_distribution(&[mdp], &ContextSpec::empty(), cap()),
            Err(Error::NoSolutionPolicy)
        ));
    }

    #[test]
    fn tv_examples() {
        let mdp = two_policy_chain();
        let space = KeySpace::build(&[mdp], &ContextSpec::empty()).unwrap();
        let u = PolicyUniverse::enumerate(&space, cap()).unwrap();
        let a = ExplicitDistribution::new(u.clone(), vec![0.6, 0.4]).unwrap();
        let b = ExplicitDistribution::uniform(u.clone());
        assert!((total_variation(&a, &b).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);

        let four = crate::policy::tests::four_key_space().enumerate(100).unwrap();
        let u4 = PolicyUniverse::new(four[..4].to_vec()).unwrap();
        let point = ExplicitDistribution::point_mass(u4.clone(), 0);
        let unif = ExplicitDistribution::uniform(u4);
        assert!((total_variation(&point, &unif).unwrap() - 0.75).abs() < 1e-15);

        let other = uniform_distribution(four[4..6].to_vec()).unwrap();
        assert!(matches!(total_variation(&b, &other), Err(Error::UniverseMismatch)));
    }

    #[test]
    fn disjoint_solutions_have_distance_one() {
        // Same structure; the goal-reaching action differs between the MDPs.
        let m1 = MdpBuilder::new(2, 2).edge(0, 0, 1, 1.0).edge(0, 1, 0, 1.0).build().unwrap();
        let m2 = MdpBuilder::new(2, 2).edge(0, 0, 0, 1.0).edge(0, 1, 1, 1.0).build().unwrap();
        let ctx = ContextSpec::empty();
        assert_eq!(exact_set_distance(&[m1.clone()], &[m2.clone()], &ctx, cap()).unwrap(), 1.0);
        assert_eq!(exact_set_distance(&[m2.clone()], &[m1.clone()], &ctx, cap()).unwrap(), 1.0);
        assert_eq!(exact_set_distance(&[m1.clone()], &[m1], &ctx, cap()).unwrap(), 0.0);
    }

    #[test]
    fn tempering_examples() {
        let mdp = two_policy_chain();
        let space = KeySpace::build(&[mdp], &ContextSpec::empty()).unwrap();
        let u = PolicyUniverse::enumerate(&space, cap()).unwrap();
        let d = ExplicitDistribution::new(u.clone(), vec![0.8, 0.2]).unwrap();
        let t = temper_distribution(&d, 2.0).unwrap();
        assert!((t.probs()[0] - 0.64 / 0.68).abs() < 1e-12);
        assert!((t.probs()[1] - 0.04 / 0.68).abs() < 1e-12);
        assert_eq!(temper_distribution(&d, 1.0).unwrap().probs(), d.probs());

        let three = crate::policy::tests::four_key_space().enumerate(100).unwrap();
        let u3 = PolicyUniverse::new(three[..4].to_vec()).unwrap();
        let d3 = ExplicitDistribution::new(u3, vec![0.5, 0.3, 0.0, 0.2]).unwrap();
        let flat = temper_distribution(&d3, 0.0).unwrap();
        for (p, expected) in flat.probs().iter().zip([1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]) {
            assert!((p - expected).abs() < 1e-15);
        }
        assert!(temper_distribution(&d3, -1.0).is_err());
    }
}
