//! The general sample, score and update loop.
//!
//! The estimate is a [`FactorizedDistribution`]. After scoring a sampled
//! policy with `q̂`, the weight of the policy's action at every key is
//! multiplied by `f = q̂ / baseline`, where the baseline is the mean of recent
//! scores. Every policy sharing (key, action) elements with the sampled one
//! moves with it, which is how an update propagates by similarity.

mod scorer;
mod solver;

pub use scorer::{
    BootstrapScorer, ExactScorer, MonteCarloScorer, NoisyScorer, ScoreClock, Scorer, ScorerKind,
    ScorerSpec,
};
pub use solver::{
    init_estimate, measure_online, run_general_sdm, IterationRecord, OfflineStats, OnlineStats,
    PriorSpec, SolverConfig, SolverTrace, StopReason, TargetSpec,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::policy::{DeterministicPolicy, ExplicitDistribution, FactorizedDistribution};
use crate::{Error, Result};

/// Safeguards applied by every update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateLimits {
    /// Smallest probability (explicit) or per-key marginal (factorized)
    /// left after an update.
    pub weight_floor: f64,
    /// Upper bound on the factor `q̂ / baseline`.
    pub factor_cap: f64,
}

impl Default for UpdateLimits {
    fn default() -> Self {
        Self { weight_floor: 1e-9, factor_cap: 1e3 }
    }
}

impl UpdateLimits {
    pub fn check(&self) -> Result<()> {
        if !(self.weight_floor > 0.0 && self.weight_floor < 1.0) {
            return Err(Error::config("weight_floor must lie in (0, 1)"));
        }
        if !(self.factor_cap >= 1.0 && self.factor_cap.is_finite()) {
            return Err(Error::config("factor_cap must be a finite number >= 1"));
        }
        Ok(())
    }

    /// `q̂ / baseline`, capped. A zero baseline with a zero score carries no
    /// information and gives 1.
    pub fn factor(&self, score: f64, baseline: f64) -> f64 {
        if baseline > 0.0 {
            (score / baseline).min(self.factor_cap)
        } else if score > 0.0 {
            self.factor_cap
        } else {
            1.0
        }
    }
}

/// Scales `probs[i]` by `f`, then raises every entry to at least `floor`
/// after normalization.
fn reweight(probs: &mut [f64], i: usize, f: f64, floor: f64) {
    probs[i] *= f;
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    if probs.iter().any(|&p| p < floor) {
        probs.iter_mut().for_each(|p| *p = p.max(floor));
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
    }
}

/// `P̂(π | q̂) ∝ f · P̂(π)` for the sampled policy, renormalized.
pub fn bayes_update_explicit(
    est: &ExplicitDistribution,
    policy: &DeterministicPolicy,
    score: f64,
    baseline: f64,
    limits: &UpdateLimits,
) -> Result<ExplicitDistribution> {
    check_score(score, baseline)?;
    let i = est
        .universe()
        .position(policy)
        .ok_or_else(|| Error::invalid("updated policy is not in the distribution's universe"))?;
    let mut probs = est.probs().to_vec();
    reweight(&mut probs, i, limits.factor(score, baseline), limits.weight_floor);
    ExplicitDistribution::new(est.universe().clone(), probs)
}

/// Multiplies the weight of the policy's action at every key by `f`. Rows
/// are kept normalized, which leaves the implied distribution unchanged.
pub fn bayes_update_factorized(
    est: &FactorizedDistribution,
    policy: &DeterministicPolicy,
    score: f64,
    baseline: f64,
    limits: &UpdateLimits,
) -> Result<FactorizedDistribution> {
    let mut out = est.clone();
    bayes_update_factorized_in_place(&mut out, policy, score, baseline, limits)?;
    Ok(out)
}

pub(crate) fn bayes_update_factorized_in_place(
    est: &mut FactorizedDistribution,
    policy: &DeterministicPolicy,
    score: f64,
    baseline: f64,
    limits: &UpdateLimits,
) -> Result<f64> {
    check_score(score, baseline)?;
    if !(Arc::ptr_eq(policy.space(), est.space()) || **policy.space() == **est.space()) {
        return Err(Error::KeySetMismatch);
    }
    let f = limits.factor(score, baseline);
    if f == 1.0 {
        return Ok(f);
    }
    for (k, &c) in policy.choices().iter().enumerate() {
        reweight(est.weights_mut(k), c, f, limits.weight_floor);
    }
    Ok(f)
}

fn check_score(score: f64, baseline: f64) -> Result<()> {
    if !(score.is_finite() && score >= 0.0) {
        return Err(Error::config(format!("score must be finite and nonnegative, got {score}")));
    }
    if !(baseline.is_finite() && baseline >= 0.0) {
        return Err(Error::config(format!("baseline must be finite and nonnegative, got {baseline}")));
    }
    Ok(())
}
