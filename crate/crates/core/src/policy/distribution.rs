use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DeterministicPolicy, InputKey, KeySpace, PolicyEntry};
use crate::rng::SdmRng;
use crate::{Error, Result};

/// Tolerance on the total mass of an explicit distribution.
const MASS_TOLERANCE: f64 = 1e-9;

/// Anything that can draw a deterministic policy.
pub trait PolicySampler {
    fn key_space(&self) -> &Arc<KeySpace>;
    fn sample_policy(&self, rng: &mut SdmRng) -> DeterministicPolicy;
}

/// Index of the bucket hit by `u` in `[0, total)` over nonnegative `weights`.
fn pick(weights: &[f64], total: f64, rng: &mut SdmRng) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // Rounding can leave u marginally above the last bucket.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// A fixed, duplicate-free list of policies over one key space.
#[derive(Debug)]
pub struct PolicyUniverse {
    space: Arc<KeySpace>,
    policies: Vec<DeterministicPolicy>,
    index: HashMap<Vec<usize>, usize>,
}

impl PolicyUniverse {
    pub fn new(policies: Vec<DeterministicPolicy>) -> Result<Arc<Self>> {
        let first = policies
            .first()
            .ok_or_else(|| Error::invalid("a policy universe needs at least one policy"))?;
        let space = first.space().clone();
        let mut index = HashMap::with_capacity(policies.len());
        for (i, p) in policies.iter().enumerate() {
            if !Arc::ptr_eq(p.space(), &space) && **p.space() != *space {
                return Err(Error::KeySetMismatch);
            }
            if index.insert(p.choices().to_vec(), i).is_some() {
                return Err(Error::invalid("policy listed twice in a distribution"));
            }
        }
        Ok(Arc::new(Self {
            space,
            policies,
            index,
        }))
    }

    /// Every policy of `space`, subject to the enumeration cap.
    pub fn enumerate(space: &Arc<KeySpace>, cap: u128) -> Result<Arc<Self>> {
        Self::new(space.enumerate(cap)?)
    }

    pub fn space(&self) -> &Arc<KeySpace> {
        &self.space
    }

    pub fn policies(&self) -> &[DeterministicPolicy] {
        &self.policies
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn position(&self, policy: &DeterministicPolicy) -> Option<usize> {
        if !policy.same_keys(&self.policies[0]) {
            return None;
        }
        self.index.get(policy.choices()).copied()
    }

    fn same_as(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
            || (self.policies.len() == other.policies.len()
                && self.policies.iter().zip(&other.policies).all(|(a, b)| a == b))
    }
}

/// Probability mass over an enumerated list of policies.
#[derive(Clone, Debug)]
pub struct ExplicitDistribution {
    universe: Arc<PolicyUniverse>,
    probs: Vec<f64>,
}

impl ExplicitDistribution {
    /// Checks that `probs` is a distribution (nonnegative, sums to 1 within
    /// 1e-9) aligned with the universe.
    pub fn new(universe: Arc<PolicyUniverse>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != universe.len() {
            return Err(Error::invalid(format!(
                "{} probabilities for {} policies",
                probs.len(),
                universe.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { universe, probs })
    }

    /// Normalizes nonnegative `weights`; all-zero weights are an error.
    pub fn from_weights(universe: Arc<PolicyUniverse>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != universe.len() {
            return Err(Error::invalid("weights do not match the policy universe"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights have zero total mass"));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { universe, probs })
    }

    pub fn uniform(universe: Arc<PolicyUniverse>) -> Self {
        let n = universe.len();
        Self {
            probs: vec![1.0 / n as f64; n],
            universe,
        }
    }

    pub fn point_mass(universe: Arc<PolicyUniverse>, index: usize) -> Self {
        let mut probs = vec![0.0; universe.len()];
        probs[index] = 1.0;
        Self { universe, probs }
    }

    pub fn universe(&self) -> &Arc<PolicyUniverse> {
        &self.universe
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn policies(&self) -> &[DeterministicPolicy] {
        self.universe.policies()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Mass of `policy`; zero for policies outside the universe.
    pub fn prob_of(&self, policy: &DeterministicPolicy) -> f64 {
        self.universe.position(policy).map_or(0.0, |i| self.probs[i])
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn same_universe(&self, other: &ExplicitDistribution) -> bool {
        self.universe.same_as(&other.universe)
    }

    pub fn sample_index(&self, rng: &mut SdmRng) -> usize {
        pick(&self.probs, 1.0, rng)
    }

    pub fn to_document(&self) -> ExplicitDocument {
        ExplicitDocument {
            policies: self.policies().iter().map(DeterministicPolicy::to_document).collect(),
            probs: self.probs.clone(),
        }
    }

    pub fn from_document(space: Arc<KeySpace>, doc: &ExplicitDocument) -> Result<Self> {
        let policies = doc
            .policies
            .iter()
            .map(|entries| DeterministicPolicy::from_document(space.clone(), entries))
            .collect::<Result<Vec<_>>>()?;
        Self::new(PolicyUniverse::new(policies)?, doc.probs.clone())
    }
}

impl PolicySampler for ExplicitDistribution {
    fn key_space(&self) -> &Arc<KeySpace> {
        self.universe.space()
    }

    fn sample_policy(&self, rng: &mut SdmRng) -> DeterministicPolicy {
        self.universe.policies[self.sample_index(rng)].clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitDocument {
    pub policies: Vec<Vec<PolicyEntry>>,
    pub probs: Vec<f64>,
}

/// Equal mass on each listed policy.
pub fn uniform_distribution(policies: Vec<DeterministicPolicy>) -> Result<ExplicitDistribution> {
    Ok(ExplicitDistribution::uniform(PolicyUniverse::new(policies)?))
}

/// Per-key action weights; a policy's probability is the product over keys
/// of the normalized weight of its chosen action.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedDistribution {
    space: Arc<KeySpace>,
    weights: Vec<Vec<f64>>,
}

impl FactorizedDistribution {
    /// `weights[k]` is aligned with `space.actions(k)`; every weight must be
    /// strictly positive and finite.
    pub fn new(space: Arc<KeySpace>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::invalid(format!(
                "{} weight rows for {} keys",
                weights.len(),
                space.len()
            )));
        }
        for (k, row) in weights.iter().enumerate() {
            if row.len() != space.actions(k).len() {
                return Err(Error::invalid(format!(
                    "key {} has {} weights for {} applicable actions",
                    space.key(k),
                    row.len(),
                    space.actions(k).len()
                )));
            }
            if let Some(w) = row.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(Error::invalid(format!(
                    "weight {w} at key {} is not strictly positive and finite",
                    space.key(k)
                )));
            }
        }
        Ok(Self { space, weights })
    }

    pub fn uniform(space: Arc<KeySpace>) -> Self {
        let weights = (0..space.len())
            .map(|k| vec![1.0; space.actions(k).len()])
            .collect();
        Self { space, weights }
    }

    pub fn space(&self) -> &Arc<KeySpace> {
        &self.space
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn all_weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.weights[k]
    }

    /// Normalized action distribution at key `k`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let row = &self.weights[k];
        let total: f64 = row.iter().sum();
        row.iter().map(|w| w / total).collect()
    }

    pub fn prob(&self, k: usize, choice: usize) -> f64 {
        let row = &self.weights[k];
        row[choice] / row.iter().sum::<f64>()
    }

    /// Stored weight entries, the logical memory of the representation.
    pub fn entry_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    pub fn policy_probability(&self, policy: &DeterministicPolicy) -> Result<f64> {
        if !(Arc::ptr_eq(policy.space(), &self.space) || **policy.space() == *self.space) {
            return Err(Error::KeySetMismatch);
        }
        Ok(policy
            .choices()
            .iter()
            .enumerate()
            .map(|(k, &c)| self.prob(k, c))
            .product())
    }

    pub fn sample_choice(&self, k: usize, rng: &mut SdmRng) -> usize {
        let row = &self.weights[k];
        pick(row, row.iter().sum(), rng)
    }

    /// Most likely action at every key, lowest action index on ties.
    pub fn greedy(&self) -> DeterministicPolicy {
        let choices = self
            .weights
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, &w) in row.iter().enumerate() {
                    if w > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect();
        DeterministicPolicy::from_choices_unchecked(self.space.clone(), choices)
    }

    /// Largest absolute change of any normalized per-key marginal.
    pub fn max_marginal_drift(&self, other: &FactorizedDistribution) -> f64 {
        (0..self.weights.len())
            .flat_map(|k| {
                let a = self.marginal(k);
                let b = other.marginal(k);
                a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_document(&self) -> FactorizedDocument {
        FactorizedDocument {
            keys: self.space.keys().to_vec(),
            weights: self.weights.clone(),
        }
    }

    /// Reads weights for `space` from a document; keys may appear in any
    /// order, every key of `space` must be present.
    pub fn from_document(space: Arc<KeySpace>, doc: &FactorizedDocument) -> Result<Self> {
        if doc.keys.len() != doc.weights.len() {
            return Err(Error::invalid("factorized document has mismatched keys and weights"));
        }
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; space.len()];
        for (key, row) in doc.keys.iter().zip(&doc.weights) {
            let k = space
                .index_of(key)
                .ok_or_else(|| Error::invalid(format!("distribution key {key} is not in the task")))?;
            if rows[k].replace(row.clone()).is_some() {
                return Err(Error::invalid(format!("distribution key {key} listed twice")));
            }
        }
        let missing: Vec<String> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_none())
            .map(|(k, _)| space.key(k).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingPriorKeys(missing));
        }
        Self::new(space, rows.into_iter().flatten().collect())
    }
}

impl PolicySampler for FactorizedDistribution {
    fn key_space(&self) -> &Arc<KeySpace> {
        &self.space
    }

    fn sample_policy(&self, rng: &mut SdmRng) -> DeterministicPolicy {
        let choices = (0..self.weights.len())
            .map(|k| self.sample_choice(k, rng))
            .collect();
        DeterministicPolicy::from_choices_unchecked(self.space.clone(), choices)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizedDocument {
    pub keys: Vec<InputKey>,
    pub weights: Vec<Vec<f64>>,
}

/// Uniform draws over a key space without materializing weights: one
/// uniformly random applicable action per key.
#[derive(Clone, Debug)]
pub struct UniformSampler {
    space: Arc<KeySpace>,
}

impl UniformSampler {
    pub fn new(space: Arc<KeySpace>) -> Self {
        Self { space }
    }
}

impl PolicySampler for UniformSampler {
    fn key_space(&self) -> &Arc<KeySpace> {
        &self.space
    }

    fn sample_policy(&self, rng: &mut SdmRng) -> DeterministicPolicy {
        let choices = (0..self.space.len())
            .map(|k| rng.random_range(0..self.space.actions(k).len()))
            .collect();
        DeterministicPolicy::from_choices_unchecked(self.space.clone(), choices)
    }
}
