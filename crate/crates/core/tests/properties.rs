use std::sync::Arc;

use proptest::prelude::*;
use sdmlab_core::exact::{exact_policy_evaluation, temper_distribution, total_variation};
use sdmlab_core::mdp::{generate_random_mdp, shape_costs, CsspMdp, MdpBuilder, PotentialFunction, RandomMdpConfig};
use sdmlab_core::policy::{ContextSpec, ExplicitDistribution, KeySpace, PolicyUniverse};

fn universe(m: usize) -> Arc<PolicyUniverse> {
    let mut b = MdpBuilder::new(2, m);
    for a in 0..m {
        b = b.edge(0, a, 1, 1.0);
    }
    let space = KeySpace::build(&[b.build().unwrap()], &ContextSpec::empty()).unwrap();
    PolicyUniverse::enumerate(&space, 1000).unwrap()
}

fn dist(u: &Arc<PolicyUniverse>, w: &[f64]) -> ExplicitDistribution {
    ExplicitDistribution::from_weights(u.clone(), w.to_vec()).unwrap()
}

fn weights(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-6..10.0f64], m)
        .prop_filter("needs positive mass", |w| w.iter().any(|&x| x > 0.0))
}

fn qualities(mdp: &CsspMdp) -> Vec<f64> {
    let space = KeySpace::build(std::slice::from_ref(mdp), &ContextSpec::empty()).unwrap();
    let u = PolicyUniverse::enumerate(&space, 1000).unwrap();
    u.policies().iter().map(|p| exact_policy_evaluation(mdp, p).unwrap().quality).collect()
}

/// Sign of `a - b`, with differences below 1e-9 relative counted as ties.
fn order(a: f64, b: f64) -> i8 {
    if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) {
        0
    } else if a > b {
        1
    } else {
        -1
    }
}

proptest! {
    #[test]
    fn total_variation_is_a_metric(
        (a, b, c) in (2usize..8).prop_flat_map(|m| (weights(m), weights(m), weights(m)))
    ) {
        let u = universe(a.len());
        let (a, b, c) = (dist(&u, &a), dist(&u, &b), dist(&u, &c));
        let ab = total_variation(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(ab, total_variation(&b, &a).unwrap());
        prop_assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        let ac = total_variation(&a, &c).unwrap();
        let cb = total_variation(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn tempering_entropy_falls_with_beta(w in (2usize..10).prop_flat_map(weights), b1 in 0.0..6.0f64, b2 in 0.0..6.0f64) {
        let u = universe(w.len());
        let d = dist(&u, &w);
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let h_lo = temper_distribution(&d, lo).unwrap().entropy();
        let h_hi = temper_distribution(&d, hi).unwrap().entropy();
        prop_assert!(h_lo >= h_hi - 1e-9, "H({lo}) = {h_lo} < H({hi}) = {h_hi}");
    }

    #[test]
    fn tempering_keeps_support(w in (2usize..10).prop_flat_map(weights), beta in 0.0..6.0f64) {
        let u = universe(w.len());
        let d = dist(&u, &w);
        let t = temper_distribution(&d, beta).unwrap();
        prop_assert_eq!(t.support_size(), d.support_size());
        prop_assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shaping_preserves_policy_order(seed in 0u64..500, phi_seed in any::<u64>()) {
        let mdp = generate_random_mdp(&RandomMdpConfig { states: 5, actions: 2, seed, ..Default::default() }).unwrap();
        let shaped = shape_costs(&mdp, &PotentialFunction::random_consistent(&mdp, phi_seed)).unwrap();
        let (q, qs) = (qualities(&mdp), qualities(&shaped));
        for i in 0..q.len() {
            for j in 0..q.len() {
                prop_assert_eq!(order(q[i], q[j]), order(qs[i], qs[j]), "policies {} and {}", i, j);
            }
        }
    }
}

#[test]
fn improper_policies_have_zero_quality() {
    // Action 1 at state 0 loops forever.
    let mdp = MdpBuilder::new(2, 2).edge(0, 0, 1, 1.0).edge(0, 1, 0, 1.0).build().unwrap();
    let space = KeySpace::build(std::slice::from_ref(&mdp), &ContextSpec::empty()).unwrap();
    let u = PolicyUniverse::enumerate(&space, 10).unwrap();
    let q: Vec<f64> = u.policies().iter().map(|p| exact_policy_evaluation(&mdp, p).unwrap().quality).collect();
    assert_eq!(q, vec![1.0, 0.0]);
}
