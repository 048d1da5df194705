//! Monte Carlo estimators.
//!
//! Every estimator is a deterministic function of its inputs and seed.
//! Sampled policy `i` draws from its own sub-stream and owns a rollout
//! sub-stream; train and test rollouts of the same policy reuse it, which
//! makes the train/test difference term vanish exactly when the sets agree.
//! Policies are evaluated in parallel and reduced in sample order.
//!
//! Smoothing: an MDP may carry a potential Φ. A trajectory that has not
//! reached the goal after `max_steps` is then charged Φ of the state it
//! stopped in instead of making the policy worthless. Finished trajectories
//! are unaffected, so the qualities of proper policies do not change.

mod difficulty;
mod knowledge;

pub use difficulty::{estimate_prior_difficulty, estimate_task_difficulty, PriorDifficulty};
pub use knowledge::{
    estimate_q_score, estimate_q_sim, ConstantSimilarity, ElementOverlap, KnowledgeConfig,
    KnowledgeReport, OracleSimilarity, QScoreReport, QSimReport, ReferenceMethod, ScoreRuntime,
    Similarity, KNOWLEDGE_CAP,
};

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{normalize_quality_scale, QualityEstimate, SetEvaluator};
use crate::mdp::{CsspMdp, Outcome, PotentialFunction};
use crate::policy::{Binding, DeterministicPolicy, FactorizedDistribution, KeySpace, DEFAULT_ENUMERATION_CAP};
use crate::rng::{SdmRng, SeedStream, Stream};
use crate::{Error, Result};

/// An MDP of a task together with its optional smoothing potential.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskMdp {
    pub mdp: CsspMdp,
    pub potential: Option<PotentialFunction>,
}

impl TaskMdp {
    pub fn plain(mdps: &[CsspMdp]) -> Vec<TaskMdp> {
        mdps.iter().cloned().map(TaskMdp::from).collect()
    }

    pub fn mdps(set: &[TaskMdp]) -> Vec<CsspMdp> {
        set.iter().map(|t| t.mdp.clone()).collect()
    }
}

impl From<CsspMdp> for TaskMdp {
    fn from(mdp: CsspMdp) -> Self {
        Self { mdp, potential: None }
    }
}

/// Picks an applicable action (as a position into the key's action list).
pub trait ActionSource {
    fn choose(&self, key: usize, rng: &mut SdmRng) -> usize;
    fn key_space(&self) -> &Arc<KeySpace>;
    /// Logical size of the stored representation.
    fn stored_entries(&self) -> usize;
}

impl ActionSource for DeterministicPolicy {
    fn choose(&self, key: usize, _rng: &mut SdmRng) -> usize {
        self.choices()[key]
    }

    fn key_space(&self) -> &Arc<KeySpace> {
        self.space()
    }

    fn stored_entries(&self) -> usize {
        self.choices().len()
    }
}

impl ActionSource for FactorizedDistribution {
    fn choose(&self, key: usize, rng: &mut SdmRng) -> usize {
        self.sample_choice(key, rng)
    }

    fn key_space(&self) -> &Arc<KeySpace> {
        self.space()
    }

    fn stored_entries(&self) -> usize {
        self.entry_count()
    }
}

/// Shared Monte Carlo settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    /// Sampled policies (or policy pairs).
    pub samples: usize,
    /// Trajectories per policy and MDP.
    pub rollouts: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Divide every per-MDP quality by that MDP's q*.
    pub rescale: bool,
    /// Reuse each policy's rollout stream for its train and test rollouts.
    pub pair_seeds: bool,
    pub enumeration_cap: u128,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            rollouts: 10,
            max_steps: 1000,
            seed: 0,
            rescale: true,
            pair_seeds: true,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl McConfig {
    pub fn check(&self) -> Result<()> {
        if self.samples == 0 || self.rollouts == 0 || self.max_steps == 0 {
            return Err(Error::config("samples, rollouts and max_steps must all be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub total_cost: f64,
    pub constraint_totals: Vec<f64>,
    pub reached_goal: bool,
    pub steps: usize,
    pub final_state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub max_steps: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

pub(crate) fn sample_outcome<'a>(outcomes: &'a [Outcome], rng: &mut SdmRng) -> &'a Outcome {
    if outcomes.len() == 1 {
        return &outcomes[0];
    }
    let mut u = rng.random::<f64>();
    for o in outcomes {
        if u < o.prob {
            return o;
        }
        u -= o.prob;
    }
    outcomes.iter().rev().find(|o| o.prob > 0.0).unwrap_or(&outcomes[0])
}

/// One trajectory from the initial state, at most `max_steps` long.
pub fn rollout(
    mdp: &CsspMdp,
    binding: &Binding,
    source: &dyn ActionSource,
    max_steps: usize,
    rng: &mut SdmRng,
) -> Trajectory {
    let goal = mdp.goal();
    let mut s = mdp.initial();
    let mut t = Trajectory {
        total_cost: 0.0,
        constraint_totals: vec![0.0; mdp.num_constraints()],
        reached_goal: s == goal,
        steps: 0,
        final_state: s,
    };
    while !t.reached_goal && t.steps < max_steps {
        let key = binding.key(s).expect("rollouts only visit reachable states");
        let choice = &mdp.choices(s)[source.choose(key, rng)];
        let o = sample_outcome(&choice.outcomes, rng);
        t.total_cost += o.cost;
        for (acc, d) in t.constraint_totals.iter_mut().zip(&o.constraint_costs) {
            *acc += d;
        }
        t.steps += 1;
        s = o.next;
        t.reached_goal = s == goal;
    }
    t.final_state = s;
    t
}

pub fn rollout_batch(
    mdp: &CsspMdp,
    binding: &Binding,
    source: &dyn ActionSource,
    n: usize,
    max_steps: usize,
    rng: &mut SdmRng,
) -> TrajectoryBatch {
    TrajectoryBatch {
        max_steps,
        trajectories: (0..n).map(|_| rollout(mdp, binding, source, max_steps, rng)).collect(),
    }
}

/// Quality estimate from sample means. Without a potential a single
/// unfinished trajectory makes the policy improper with quality 0; with one,
/// unfinished trajectories are charged the potential of their final state.
pub fn batch_quality(mdp: &CsspMdp, batch: &TrajectoryBatch, potential: Option<&PotentialFunction>) -> QualityEstimate {
    let k = mdp.num_constraints();
    let all_finished = batch.trajectories.iter().all(|t| t.reached_goal);
    if batch.is_empty() || (!all_finished && potential.is_none()) {
        return QualityEstimate::improper(k);
    }
    let n = batch.len() as f64;
    let mut cost = 0.0;
    let mut d = vec![0.0; k];
    for t in &batch.trajectories {
        cost += t.total_cost;
        if !t.reached_goal {
            cost += potential.map_or(0.0, |p| p.value(t.final_state));
        }
        for (acc, x) in d.iter_mut().zip(&t.constraint_totals) {
            *acc += x;
        }
    }
    let mut q = QualityEstimate::from_totals(cost / n, d.into_iter().map(|x| x / n).collect(), mdp.constraint_values());
    q.proper = all_finished;
    q
}

/// Per-MDP estimates plus their product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McQuality {
    pub per_mdp: Vec<QualityEstimate>,
    /// Per-MDP qualities after division by q* (equal to the raw ones when
    /// rescaling is off).
    pub rescaled: Vec<f64>,
    pub set_quality: f64,
    pub rescaled_set_quality: f64,
}

/// A set of MDPs bound into one key space, with cached quality scales.
#[derive(Clone, Debug)]
pub struct EvalSet {
    members: Vec<TaskMdp>,
    plain: Vec<CsspMdp>,
    bindings: Vec<Binding>,
    scales: Vec<f64>,
}

impl EvalSet {
    pub fn new(members: &[TaskMdp], space: &KeySpace, rescale: bool, cap: u128) -> Result<Self> {
        let bindings = members.iter().map(|m| space.bind(&m.mdp)).collect::<Result<Vec<_>>>()?;
        let scales = if rescale {
            members
                .iter()
                .map(|m| normalize_quality_scale(&m.mdp, cap).map(|s| s.value))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![1.0; members.len()]
        };
        Ok(Self {
            plain: TaskMdp::mdps(members),
            members: members.to_vec(),
            bindings,
            scales,
        })
    }

    pub fn members(&self) -> &[TaskMdp] {
        &self.members
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Monte Carlo quality; MDP `j` rolls out with `seeds.rng(Rollouts, j)`.
    /// Without smoothing, rollouts on an MDP stop at the first unfinished
    /// trajectory since the verdict can no longer change.
    pub fn mc_quality(&self, source: &dyn ActionSource, rollouts: usize, max_steps: usize, seeds: SeedStream) -> McQuality {
        let mut per_mdp = Vec::with_capacity(self.len());
        for (j, (m, b)) in self.members.iter().zip(&self.bindings).enumerate() {
            let mut rng = seeds.rng(Stream::Rollouts, j as u64);
            let mut batch = TrajectoryBatch {
                max_steps,
                trajectories: Vec::with_capacity(rollouts),
            };
            for _ in 0..rollouts {
                let t = rollout(&m.mdp, b, source, max_steps, &mut rng);
                let failed = !t.reached_goal && m.potential.is_none();
                batch.trajectories.push(t);
                if failed {
                    break;
                }
            }
            per_mdp.push(batch_quality(&m.mdp, &batch, m.potential.as_ref()));
        }
        self.combine(per_mdp)
    }

    /// Exact quality of a deterministic policy (potentials play no role for
    /// infinite-horizon evaluation).
    pub fn exact_quality(&self, policy: &DeterministicPolicy) -> Result<McQuality> {
        let per_mdp = SetEvaluator::new(&self.plain, policy.space())?.evaluate(policy.choices())?;
        Ok(self.combine(per_mdp))
    }

    fn combine(&self, per_mdp: Vec<QualityEstimate>) -> McQuality {
        let rescaled: Vec<f64> = per_mdp.iter().zip(&self.scales).map(|(q, s)| q.quality / s).collect();
        McQuality {
            set_quality: per_mdp.iter().map(|q| q.quality).product(),
            rescaled_set_quality: rescaled.iter().product(),
            per_mdp,
            rescaled,
        }
    }
}

/// Monte Carlo quality of a deterministic policy or a stochastic
/// (factorized) policy on a set of MDPs, over the policy's key space.
pub fn mc_policy_quality(
    mdps: &[TaskMdp],
    space: &KeySpace,
    source: &dyn ActionSource,
    rollouts: usize,
    max_steps: usize,
    seeds: SeedStream,
) -> Result<McQuality> {
    if rollouts == 0 || max_steps == 0 {
        return Err(Error::config("rollouts and max_steps must be at least 1"));
    }
    Ok(EvalSet::new(mdps, space, false, 0)?.mc_quality(source, rollouts, max_steps, seeds))
}

/// Set quality of the final output on the test MDPs.
pub fn evaluate_final_policy(
    test: &[TaskMdp],
    space: &KeySpace,
    source: &dyn ActionSource,
    rollouts: usize,
    max_steps: usize,
    seed: u64,
) -> Result<McQuality> {
    mc_policy_quality(test, space, source, rollouts, max_steps, SeedStream::new(seed).child(Stream::Reference, 0))
}

/// `1 / mean`, infinite when the mean is zero.
pub(crate) fn inverse_mean(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let inv = if mean > 0.0 { 1.0 / mean } else { f64::INFINITY };
    (mean, inv)
}
