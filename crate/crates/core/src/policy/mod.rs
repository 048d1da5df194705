//! Policy spaces.
//!
//! A policy observes an [`InputKey`]: the current state plus the values of
//! the MDP elements named by the task's [`ContextSpec`]. The [`KeySpace`] of a
//! set of MDPs is the sorted union of the keys of their reachable non-goal
//! states; a [`DeterministicPolicy`] picks one applicable action per key.
//! Actions are stored as positions into the key's sorted applicable list,
//! which makes every stored action applicable by construction.

mod distribution;
mod enumerate;

pub use distribution::{
    uniform_distribution, ExplicitDistribution, ExplicitDocument, FactorizedDistribution,
    FactorizedDocument, PolicySampler, PolicyUniverse, UniformSampler,
};
pub use enumerate::{enumerate_policies, PolicyIter, DEFAULT_ENUMERATION_CAP};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mdp::{CsspMdp, MdpElement};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextTag {
    InitialState,
    GoalState,
    TransitionId,
    CostId,
    ConstraintId,
}

impl ContextTag {
    fn value(self, mdp: &CsspMdp) -> u64 {
        match self {
            ContextTag::InitialState => mdp.initial() as u64,
            ContextTag::GoalState => mdp.goal() as u64,
            ContextTag::TransitionId => mdp.element_digest(MdpElement::Transitions),
            ContextTag::CostId => mdp.element_digest(MdpElement::Costs),
            ContextTag::ConstraintId => mdp.element_digest(MdpElement::Constraints),
        }
    }
}

/// Ordered, duplicate-free list of context elements. Empty means context-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ContextTag>", into = "Vec<ContextTag>")]
pub struct ContextSpec {
    tags: Vec<ContextTag>,
}

impl ContextSpec {
    pub fn new(tags: Vec<ContextTag>) -> Result<Self> {
        for (i, t) in tags.iter().enumerate() {
            if tags[..i].contains(t) {
                return Err(Error::config(format!("context tag {t:?} listed twice")));
            }
        }
        Ok(Self { tags })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn tags(&self) -> &[ContextTag] {
        &self.tags
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Context tuple of `mdp`, in tag order.
    pub fn values(&self, mdp: &CsspMdp) -> Vec<u64> {
        self.tags.iter().map(|t| t.value(mdp)).collect()
    }
}

impl TryFrom<Vec<ContextTag>> for ContextSpec {
    type Error = Error;

    fn try_from(tags: Vec<ContextTag>) -> Result<Self> {
        Self::new(tags)
    }
}

impl From<ContextSpec> for Vec<ContextTag> {
    fn from(c: ContextSpec) -> Self {
        c.tags
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InputKey {
    pub state: usize,
    pub context: Vec<u64>,
}

impl fmt::Display for InputKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.state)?;
        for v in &self.context {
            write!(f, "|{v}")?;
        }
        Ok(())
    }
}

/// Sorted input keys of a set of MDPs with each key's applicable actions.
#[derive(Debug)]
pub struct KeySpace {
    context: ContextSpec,
    keys: Vec<InputKey>,
    actions: Vec<Vec<usize>>,
    index: HashMap<InputKey, usize>,
}

impl PartialEq for KeySpace {
    fn eq(&self, other: &Self) -> bool {
        self.context == other.context && self.keys == other.keys && self.actions == other.actions
    }
}

impl KeySpace {
    /// Union of the reachable keys of `mdps`. Two MDPs sharing a key must
    /// offer the same applicable actions at it.
    pub fn build(mdps: &[CsspMdp], context: &ContextSpec) -> Result<Arc<KeySpace>> {
        let mut map: BTreeMap<InputKey, Vec<usize>> = BTreeMap::new();
        for mdp in mdps {
            let ctx = context.values(mdp);
            for s in mdp.reachable() {
                if s == mdp.goal() {
                    continue;
                }
                let key = InputKey {
                    state: s,
                    context: ctx.clone(),
                };
                let actions: Vec<usize> = mdp.applicable(s).collect();
                match map.get(&key) {
                    Some(existing) if *existing != actions => {
                        return Err(Error::InconsistentKey {
                            key: key.to_string(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        map.insert(key, actions);
                    }
                }
            }
        }
        let (keys, actions): (Vec<_>, Vec<_>) = map.into_iter().unzip();
        let index = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Ok(Arc::new(KeySpace {
            context: context.clone(),
            keys,
            actions,
            index,
        }))
    }

    pub fn context(&self) -> &ContextSpec {
        &self.context
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[InputKey] {
        &self.keys
    }

    pub fn key(&self, k: usize) -> &InputKey {
        &self.keys[k]
    }

    /// Applicable actions of key `k`, ascending.
    pub fn actions(&self, k: usize) -> &[usize] {
        &self.actions[k]
    }

    pub fn index_of(&self, key: &InputKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Number of (key, action) elements.
    pub fn element_count(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    /// Exact size of the deterministic policy space, `None` on u128 overflow.
    pub fn policy_count(&self) -> Option<u128> {
        self.actions
            .iter()
            .try_fold(1u128, |acc, a| acc.checked_mul(a.len() as u128))
    }

    /// Maps every reachable non-goal state of `mdp` to its key.
    pub fn bind(&self, mdp: &CsspMdp) -> Result<Binding> {
        let ctx = self.context.values(mdp);
        let mut state_keys = vec![None; mdp.num_states()];
        for s in mdp.reachable() {
            if s == mdp.goal() {
                continue;
            }
            let key = InputKey {
                state: s,
                context: ctx.clone(),
            };
            let k = self.index_of(&key).ok_or(Error::UncoveredState { state: s })?;
            if !mdp.applicable(s).eq(self.actions[k].iter().copied()) {
                return Err(Error::InconsistentKey {
                    key: key.to_string(),
                });
            }
            state_keys[s] = Some(k);
        }
        Ok(Binding { state_keys })
    }
}

/// Key index of each state of one MDP within a [`KeySpace`]; `None` for the
/// goal and for unreachable states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    state_keys: Vec<Option<usize>>,
}

impl Binding {
    pub fn key(&self, state: usize) -> Option<usize> {
        self.state_keys[state]
    }

    /// Per-state choice positions under `choices` (one position per key).
    pub fn resolve(&self, choices: &[usize]) -> Vec<Option<usize>> {
        self.state_keys.iter().map(|k| k.map(|k| choices[k])).collect()
    }
}

/// Total map from the keys of a [`KeySpace`] to applicable actions.
#[derive(Clone, Debug)]
pub struct DeterministicPolicy {
    space: Arc<KeySpace>,
    choices: Vec<usize>,
}

impl DeterministicPolicy {
    /// `choices[k]` is a position into `space.actions(k)`.
    pub fn from_choices(space: Arc<KeySpace>, choices: Vec<usize>) -> Result<Self> {
        if choices.len() != space.len() {
            return Err(Error::invalid(format!(
                "policy has {} choices for {} keys",
                choices.len(),
                space.len()
            )));
        }
        for (k, &c) in choices.iter().enumerate() {
            if c >= space.actions(k).len() {
                return Err(Error::invalid(format!(
                    "choice {c} out of range at key {}",
                    space.key(k)
                )));
            }
        }
        Ok(Self { space, choices })
    }

    /// Builds a policy from action indices, one per key.
    pub fn from_actions(space: Arc<KeySpace>, actions: &[usize]) -> Result<Self> {
        if actions.len() != space.len() {
            return Err(Error::invalid("one action per key is required"));
        }
        let choices = actions
            .iter()
            .enumerate()
            .map(|(k, a)| {
                space.actions(k).iter().position(|x| x == a).ok_or_else(|| {
                    Error::invalid(format!("action {a} is not applicable at key {}", space.key(k)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, choices })
    }

    pub(crate) fn from_choices_unchecked(space: Arc<KeySpace>, choices: Vec<usize>) -> Self {
        Self { space, choices }
    }

    pub fn space(&self) -> &Arc<KeySpace> {
        &self.space
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn action(&self, k: usize) -> usize {
        self.space.actions(k)[self.choices[k]]
    }

    pub fn same_keys(&self, other: &DeterministicPolicy) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    pub fn to_document(&self) -> Vec<PolicyEntry> {
        (0..self.space.len())
            .map(|k| PolicyEntry {
                key: self.space.key(k).clone(),
                action: self.action(k),
            })
            .collect()
    }

    /// Reads a policy document against `space`; every key must be listed once.
    pub fn from_document(space: Arc<KeySpace>, entries: &[PolicyEntry]) -> Result<Self> {
        let mut actions: Vec<Option<usize>> = vec![None; space.len()];
        for e in entries {
            let k = space
                .index_of(&e.key)
                .ok_or_else(|| Error::invalid(format!("policy key {} is not in the task", e.key)))?;
            if actions[k].replace(e.action).is_some() {
                return Err(Error::invalid(format!("policy key {} listed twice", e.key)));
            }
        }
        let missing: Vec<String> = actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_none())
            .map(|(k, _)| space.key(k).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::invalid(format!("policy misses keys: {}", missing.join(", "))));
        }
        let actions: Vec<usize> = actions.into_iter().flatten().collect();
        Self::from_actions(space, &actions)
    }
}

impl PartialEq for DeterministicPolicy {
    fn eq(&self, other: &Self) -> bool {
        self.choices == other.choices && self.same_keys(other)
    }
}

impl Eq for DeterministicPolicy {}

impl Hash for DeterministicPolicy {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.choices.hash(state);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub key: InputKey,
    pub action: usize,
}

/// Fraction of keys on which the two policies choose the same action.
pub fn similarity(a: &DeterministicPolicy, b: &DeterministicPolicy) -> Result<f64> {
    if !a.same_keys(b) {
        return Err(Error::KeySetMismatch);
    }
    if a.choices.is_empty() {
        return Ok(1.0);
    }
    let agree = a
        .choices
        .iter()
        .zip(&b.choices)
        .filter(|(x, y)| x == y)
        .count();
    Ok(agree as f64 / a.choices.len() as f64)
}
