//! Estimators checked against exact computations and frozen values.

use std::sync::Arc;

use sdmlab_core::exact::{exact_policy_evaluation, exact_set_distance, exact_task_difficulty, quality_on_set};
use sdmlab_core::mc::{mc_policy_quality, TaskMdp};
use sdmlab_core::mdp::{generate_random_mdp, CsspMdp, MdpBuilder, RandomMdpConfig};
use sdmlab_core::policy::{
    ContextSpec, DeterministicPolicy, ExplicitDistribution, FactorizedDistribution, KeySpace, PolicyUniverse,
};
use sdmlab_core::rng::SeedStream;
use sdmlab_core::sdm::{bayes_update_explicit, bayes_update_factorized, ScorerSpec, UpdateLimits};

/// Qualities 1/2 (action 0 at state 0) and 1/3.
fn two_policy_chain() -> CsspMdp {
    MdpBuilder::new(4, 2)
        .goal(3)
        .edge(0, 0, 2, 1.0)
        .edge(0, 1, 1, 1.0)
        .edge(1, 0, 2, 1.0)
        .edge(2, 0, 3, 1.0)
        .build()
        .unwrap()
}

fn space_of(mdps: &[CsspMdp]) -> Arc<KeySpace> {
    KeySpace::build(mdps, &ContextSpec::empty()).unwrap()
}

#[test]
fn frozen_chain_values() {
    let mdp = two_policy_chain();
    let d = exact_task_difficulty(std::slice::from_ref(&mdp), std::slice::from_ref(&mdp), &ContextSpec::empty(), 100).unwrap();
    assert!((d.total - 0.1).abs() < 1e-12, "{}", d.total);
    assert_eq!(d.distance_term, 0.0);

    let space = space_of(std::slice::from_ref(&mdp));
    let q: Vec<f64> = PolicyUniverse::enumerate(&space, 10)
        .unwrap()
        .policies()
        .iter()
        .map(|p| exact_policy_evaluation(&mdp, p).unwrap().quality)
        .collect();
    assert_eq!(q, vec![0.5, 1.0 / 3.0]);
}

#[test]
fn set_distance_is_symmetric_and_zero_on_identity() {
    let a = generate_random_mdp(&RandomMdpConfig { states: 5, seed: 11, ..Default::default() }).unwrap();
    let b = generate_random_mdp(&RandomMdpConfig { states: 5, seed: 12, ..Default::default() }).unwrap();
    let ctx = ContextSpec::empty();
    assert_eq!(exact_set_distance(std::slice::from_ref(&a), std::slice::from_ref(&a), &ctx, 1000).unwrap(), 0.0);
    let ab = exact_set_distance(std::slice::from_ref(&a), std::slice::from_ref(&b), &ctx, 1000).unwrap();
    let ba = exact_set_distance(&[b], &[a], &ctx, 1000).unwrap();
    assert!((ab - ba).abs() < 1e-15);
}

#[test]
fn mc_quality_tracks_exact_on_random_mdps() {
    let mut checked = 0;
    for seed in 0..5 {
        let mdp = generate_random_mdp(&RandomMdpConfig { states: 5, actions: 2, seed, ..Default::default() }).unwrap();
        let space = space_of(std::slice::from_ref(&mdp));
        for p in PolicyUniverse::enumerate(&space, 100).unwrap().policies() {
            let exact = exact_policy_evaluation(&mdp, p).unwrap();
            if !exact.proper {
                continue;
            }
            let task = TaskMdp::plain(std::slice::from_ref(&mdp));
            let mc = mc_policy_quality(&task, &space, p, 4000, 10_000, SeedStream::new(seed)).unwrap();
            let rel = (mc.set_quality - exact.quality).abs() / exact.quality;
            assert!(rel < 0.05, "seed {seed}: mc {} exact {}", mc.set_quality, exact.quality);
            checked += 1;
        }
    }
    assert!(checked >= 10, "{checked}");
}

#[test]
fn single_key_factorized_update_matches_explicit() {
    let mdp = MdpBuilder::new(2, 3).edge(0, 0, 1, 1.0).edge(0, 1, 1, 2.0).edge(0, 2, 1, 4.0).build().unwrap();
    let space = space_of(&[mdp]);
    let universe = PolicyUniverse::enumerate(&space, 10).unwrap();
    let lim = UpdateLimits::default();
    let mut explicit = ExplicitDistribution::uniform(universe.clone());
    let mut factorized = FactorizedDistribution::uniform(space.clone());
    let steps = [(0, 0.9, 0.5), (2, 0.1, 0.5), (1, 0.4, 0.3), (0, 0.0, 0.2), (2, 0.7, 0.0)];
    for (i, score, baseline) in steps {
        let p = &universe.policies()[i];
        explicit = bayes_update_explicit(&explicit, p, score, baseline, &lim).unwrap();
        factorized = bayes_update_factorized(&factorized, p, score, baseline, &lim).unwrap();
        for (j, q) in universe.policies().iter().enumerate() {
            let f = factorized.policy_probability(q).unwrap();
            assert!((f - explicit.probs()[j]).abs() < 1e-12, "step {i}: {f} vs {}", explicit.probs()[j]);
        }
    }
}

#[test]
fn scorers_agree_with_exact_quality() {
    let mdp = generate_random_mdp(&RandomMdpConfig { states: 5, actions: 2, seed: 4, ..Default::default() }).unwrap();
    let mdps = [mdp.clone()];
    let space = space_of(&mdps);
    let task = TaskMdp::plain(&mdps);
    let policy = DeterministicPolicy::from_choices(space.clone(), vec![0; space.len()]).unwrap();
    let exact = quality_on_set(&mdps, &policy).unwrap();
    assert!(exact > 0.0);

    let mut s = ScorerSpec::exact().build(&task, &space).unwrap();
    assert_eq!(s.score(&policy, SeedStream::new(0)).unwrap(), exact);

    let mut s = ScorerSpec::monte_carlo(20_000, 10_000).build(&task, &space).unwrap();
    let q = s.score(&policy, SeedStream::new(3)).unwrap();
    assert!((q - exact).abs() / exact < 0.03, "{q} vs {exact}");
}

#[test]
fn bootstrap_scorer_reaches_chain_fixed_point() {
    let mdp = MdpBuilder::new(3, 1).edge(0, 0, 1, 1.0).edge(1, 0, 2, 1.0).build().unwrap();
    let mdps = [mdp];
    let space = space_of(&mdps);
    let policy = DeterministicPolicy::from_choices(space.clone(), vec![0; space.len()]).unwrap();
    let mut s = ScorerSpec::bootstrap(0.5, 200, 10).build(&TaskMdp::plain(&mdps), &space).unwrap();
    let q = s.score(&policy, SeedStream::new(1)).unwrap();
    assert!((q - 0.5).abs() < 1e-6, "{q}");
}
