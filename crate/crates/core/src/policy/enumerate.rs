use std::sync::Arc;

use super::{ContextSpec, DeterministicPolicy, KeySpace};
use crate::mdp::CsspMdp;
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Lexicographic iterator over every deterministic policy of a key space.
/// The first key is the most significant digit; actions count up in index
/// order.
pub struct PolicyIter {
    space: Arc<KeySpace>,
    next: Option<Vec<usize>>,
}

impl PolicyIter {
    pub fn new(space: Arc<KeySpace>) -> Self {
        // A key space never has keys with zero actions, so the all-zero
        // assignment always exists (it is the single empty policy when there
        // are no keys at all).
        let next = Some(vec![0; space.len()]);
        Self { space, next }
    }
}

impl Iterator for PolicyIter {
    type Item = DeterministicPolicy;

    fn next(&mut self) -> Option<DeterministicPolicy> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        loop {
            if k == 0 {
                break;
            }
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.space.actions(k).len() {
                self.next = Some(succ);
                break;
            }
            succ[k] = 0;
        }
        Some(DeterministicPolicy::from_choices_unchecked(
            self.space.clone(),
            current,
        ))
    }
}

impl KeySpace {
    /// Exact policy count if it does not exceed `cap`.
    pub fn check_enumerable(&self, cap: u128) -> Result<u128> {
        match self.policy_count() {
            Some(count) if count <= cap => Ok(count),
            Some(count) => Err(Error::EnumerationCap {
                count: count.to_string(),
                cap,
            }),
            None => Err(Error::EnumerationCap {
                count: format!(
                    "more than {} (product of {} per-key action counts)",
                    u128::MAX,
                    self.len()
                ),
                cap,
            }),
        }
    }

    /// All policies of this space in lexicographic order.
    pub fn enumerate(self: &Arc<Self>, cap: u128) -> Result<Vec<DeterministicPolicy>> {
        let count = self.check_enumerable(cap)?;
        let mut out = Vec::with_capacity(count as usize);
        out.extend(PolicyIter::new(self.clone()));
        Ok(out)
    }
}

/// All deterministic policies over the reachable keys of `mdps`.
pub fn enumerate_policies(
    mdps: &[CsspMdp],
    context: &ContextSpec,
    cap: u128,
) -> Result<Vec<DeterministicPolicy>> {
    KeySpace::build(mdps, context)?.enumerate(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{generate_random_mdp, MdpBuilder, RandomMdpConfig};
    use crate::policy::ContextTag;
    use proptest::prelude::*;

    #[test]
    fn two_binary_keys_give_four_policies_in_order() {
        let mdp = MdpBuilder::new(3, 2)
            .edge(0, 0, 1, 1.0)
            .edge(0, 1, 2, 1.0)
            .edge(1, 0, 2, 1.0)
            .edge(1, 1, 0, 1.0)
            .build()
            .unwrap();
        let all = enumerate_policies(&[mdp], &ContextSpec::empty(), DEFAULT_ENUMERATION_CAP).unwrap();
        let choices: Vec<_> = all.iter().map(|p| p.choices().to_vec()).collect();
        assert_eq!(choices, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn single_action_keys_give_one_policy() {
        let mdp = MdpBuilder::new(3, 1).edge(0, 0, 1, 1.0).edge(1, 0, 2, 1.0).build().unwrap();
        let all = enumerate_policies(&[mdp], &ContextSpec::empty(), 10).unwrap();
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn goal_context_gives_disjoint_union() {
        // Two 2-state-ish MDPs over the same states, goals differ.
        let m1 = MdpBuilder::new(3, 2).goal(2).edge(0, 0, 2, 1.0).edge(0, 1, 1, 1.0).edge(1, 0, 2, 1.0).edge(1, 1, 0, 1.0).build().unwrap();
        let m2 = MdpBuilder::new(3, 2).goal(1).edge(0, 0, 1, 1.0).edge(0, 1, 2, 1.0).edge(2, 0, 1, 1.0).edge(2, 1, 0, 1.0).build().unwrap();
        let ctx = ContextSpec::new(vec![ContextTag::GoalState]).unwrap();
        let all = enumerate_policies(&[m1.clone(), m2.clone()], &ctx, 100).unwrap();
        // m1 keys {0,1}, m2 keys {0,2}: 4 keys with 2 actions each.
        assert_eq!(all.len(), 16);
        let free = enumerate_policies(&[m1, m2], &ContextSpec::empty(), 100).unwrap();
        assert_eq!(free.len(), 8);
    }

    #[test]
    fn cap_reports_exact_count() {
        let mdp = MdpBuilder::new(3, 2)
            .edge(0, 0, 1, 1.0)
            .edge(0, 1, 2, 1.0)
            .edge(1, 0, 2, 1.0)
            .edge(1, 1, 0, 1.0)
            .build()
            .unwrap();
        match enumerate_policies(&[mdp], &ContextSpec::empty(), 3) {
            Err(Error::EnumerationCap { count, cap }) => {
                assert_eq!(count, "4");
                assert_eq!(cap, 3);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn count_matches_product_rule(seed in 0u64..200, states in 2usize..6, actions in 1usize..4) {
            let cfg = RandomMdpConfig { states, actions, branching: 1.min(states), seed, ..Default::default() };
            let mdp = generate_random_mdp(&cfg).unwrap();
            let space = KeySpace::build(std::slice::from_ref(&mdp), &ContextSpec::empty()).unwrap();
            let expected: u128 = (0..space.len()).map(|k| space.actions(k).len() as u128).product();
            let all = space.enumerate(DEFAULT_ENUMERATION_CAP).unwrap();
            prop_assert_eq!(all.len() as u128, expected);
            let mut sorted = all.iter().map(|p| p.choices().to_vec()).collect::<Vec<_>>();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), all.len());
        }
    }
}
