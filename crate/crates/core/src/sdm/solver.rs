use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use web_time::Instant;

use super::{bayes_update_factorized_in_place, ScoreClock, ScorerKind, ScorerSpec, UpdateLimits};
use crate::exact::{normalize_quality_scale, SetEvaluator};
use crate::mc::{sample_outcome, ActionSource, TaskMdp};
use crate::mdp::CsspMdp;
use crate::policy::{
    ContextSpec, DeterministicPolicy, FactorizedDistribution, FactorizedDocument, KeySpace,
    PolicyEntry, PolicySampler,
};
use crate::rng::{SeedStream, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    #[default]
    Uniform,
    Factorized(FactorizedDocument),
}

/// Stop as soon as the greedy policy's exact training quality reaches
/// `fraction` of the optimum. Used to measure iterations-to-threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub prior: PriorSpec,
    pub scorer: ScorerSpec,
    /// Number of recent scores averaged into the update baseline.
    pub baseline_window: usize,
    /// Iteration budget; 0 returns the prior unchanged.
    pub budget: usize,
    /// Stop when the marginals moved less than this over `drift_window`
    /// iterations.
    pub epsilon: f64,
    pub drift_window: usize,
    pub seed: u64,
    pub limits: UpdateLimits,
    pub target: Option<TargetSpec>,
    /// Steps of the online probe run.
    pub probe_steps: usize,
    /// Keep one record per iteration in the trace.
    pub record_iterations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::Uniform,
            scorer: ScorerSpec::default(),
            baseline_window: 5,
            budget: 1000,
            epsilon: 1e-4,
            drift_window: 500,
            seed: 0,
            limits: UpdateLimits::default(),
            target: None,
            probe_steps: 100,
            record_iterations: true,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        self.scorer.check()?;
        self.limits.check()?;
        if self.baseline_window == 0 || self.drift_window == 0 {
            return Err(Error::config("baseline_window and drift_window must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        if self.probe_steps == 0 {
            return Err(Error::config("probe_steps must be at least 1"));
        }
        if let Some(t) = &self.target {
            if !(t.fraction > 0.0 && t.fraction <= 1.0) {
                return Err(Error::config("target fraction must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// First 16 hex digits of the SHA-256 of the sampled choices.
    pub policy: String,
    pub score: f64,
    pub baseline: f64,
    pub factor: f64,
    /// Largest change of any per-key marginal in this update.
    pub drift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    Converged,
    TargetReached,
    /// Budget 0: the prior is returned as is.
    PriorReturned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineTiming {
    pub wall_clock_seconds: f64,
    pub scorer_seconds: f64,
    pub peak_resident_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineStats {
    pub iterations: usize,
    pub scorer_calls: u64,
    /// Trajectories the scorer was allowed per call, summed over calls.
    pub nominal_rollouts: u64,
    /// Largest number of stored weight-table entries.
    pub peak_entries: usize,
    pub runtime: OfflineTiming,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineTiming {
    pub mean_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineStats {
    pub probe_steps: usize,
    pub episodes_completed: usize,
    pub memory_entries: usize,
    /// Actions selected during the probe, in order.
    pub actions: Vec<usize>,
    pub runtime: OnlineTiming,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverTrace {
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub convergence_test: &'static str,
    pub target_threshold: Option<f64>,
    /// Iterations after which the greedy policy first met the target.
    pub target_reached_at: Option<usize>,
    pub greedy: Vec<PolicyEntry>,
    /// Exact set quality of the greedy policy on the training MDPs.
    pub greedy_train_quality: f64,
    pub estimate: FactorizedDocument,
    pub offline: OfflineStats,
    pub online: OnlineStats,
    pub records: Vec<IterationRecord>,
    #[serde(skip)]
    pub final_estimate: FactorizedDistribution,
    #[serde(skip)]
    pub greedy_policy: DeterministicPolicy,
}

impl SolverTrace {
    /// `iter,score,factor,drift` lines for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,score,factor,drift\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.iteration, r.score, r.factor, r.drift));
        }
        out
    }
}

/// Starting estimate: uniform weights or a validated copy of the prior.
pub fn init_estimate(config: &SolverConfig, space: &Arc<KeySpace>) -> Result<FactorizedDistribution> {
    if space.is_empty() {
        return Err(Error::config("the task has no decision keys"));
    }
    match &config.prior {
        PriorSpec::Uniform => Ok(FactorizedDistribution::uniform(space.clone())),
        PriorSpec::Factorized(doc) => FactorizedDistribution::from_document(space.clone(), doc),
    }
}

fn digest(choices: &[usize]) -> String {
    let mut h = Sha256::new();
    for c in choices {
        h.update((*c as u64).to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Runs the loop on `train` and returns the trace with the final estimate.
pub fn run_general_sdm(train: &[TaskMdp], context: &ContextSpec, config: &SolverConfig) -> Result<SolverTrace> {
    config.check()?;
    if train.is_empty() {
        return Err(Error::config("the training set is empty"));
    }
    let start = Instant::now();
    let plain = TaskMdp::mdps(train);
    let space = KeySpace::build(&plain, context)?;
    let mut est = init_estimate(config, &space)?;
    let mut scorer = config.scorer.build(train, &space)?;
    let evaluator = SetEvaluator::new(&plain, &space)?;
    let seeds = SeedStream::new(config.seed);

    let threshold = match &config.target {
        Some(t) => {
            let mut optimum = 1.0;
            for m in &plain {
                optimum *= normalize_quality_scale(m, config.scorer.enumeration_cap)?.value;
            }
            Some(t.fraction * optimum)
        }
        None => None,
    };
    let reached = |est: &FactorizedDistribution| -> Result<bool> {
        Ok(match threshold {
            Some(th) => evaluator.set_quality(est.greedy().choices())? >= th * (1.0 - 1e-12),
            None => false,
        })
    };

    let mut clock = ScoreClock::default();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(config.baseline_window);
    let mut records = Vec::new();
    let mut snapshot = est.clone();
    let mut target_reached_at = None;
    let mut stop = if config.budget == 0 { StopReason::PriorReturned } else { StopReason::BudgetExhausted };
    let mut iterations = 0;
    // Whether any update in the current drift window carried information;
    // a window of uninformative updates is not evidence of convergence.
    let mut informed = false;

    if config.budget > 0 && reached(&est)? {
        target_reached_at = Some(0);
        stop = StopReason::TargetReached;
    }
    while stop == StopReason::BudgetExhausted && iterations < config.budget {
        let t = iterations;
        let policy = est.sample_policy(&mut seeds.rng(Stream::PolicySampling, t as u64));
        let score = clock.time(scorer.as_mut(), &policy, seeds.child(Stream::Scorer, t as u64))?;
        let baseline = if window.is_empty() {
            score
        } else {
            window.iter().sum::<f64>() / window.len() as f64
        };
        let before = est.clone();
        let factor = bayes_update_factorized_in_place(&mut est, &policy, score, baseline, &config.limits)?;
        if window.len() == config.baseline_window {
            window.pop_front();
        }
        window.push_back(score);
        iterations += 1;
        if config.record_iterations {
            records.push(IterationRecord {
                iteration: iterations,
                policy: digest(policy.choices()),
                score,
                baseline,
                factor,
                drift: before.max_marginal_drift(&est),
            });
        }
        informed |= factor != 1.0;
        if factor != 1.0 && reached(&est)? {
            target_reached_at = Some(iterations);
            stop = StopReason::TargetReached;
        } else if iterations % config.drift_window == 0 {
            if informed && snapshot.max_marginal_drift(&est) < config.epsilon {
                stop = StopReason::Converged;
            }
            snapshot = est.clone();
            informed = false;
        }
    }

    let per_call = match config.scorer.kind {
        ScorerKind::MonteCarlo => config.scorer.rollouts,
        ScorerKind::Bootstrap => config.scorer.sweeps,
        ScorerKind::Exact => 0,
    } as u64;
    let greedy = est.greedy();
    let online = measure_online(&est, &plain[0], config.probe_steps, config.seed)?;
    Ok(SolverTrace {
        iterations,
        stop_reason: stop,
        convergence_test: "max-norm drift of per-key marginals over drift_window iterations",
        target_threshold: threshold,
        target_reached_at,
        greedy: greedy.to_document(),
        greedy_train_quality: evaluator.set_quality(greedy.choices())?,
        estimate: est.to_document(),
        offline: OfflineStats {
            iterations,
            scorer_calls: clock.calls,
            nominal_rollouts: clock.calls * per_call * plain.len() as u64,
            peak_entries: est.entry_count(),
            runtime: OfflineTiming {
                wall_clock_seconds: start.elapsed().as_secs_f64(),
                scorer_seconds: clock.total_seconds,
                peak_resident_bytes: peak_resident_bytes(),
            },
        },
        online,
        records,
        final_estimate: est,
        greedy_policy: greedy,
    })
}

/// Times action selection over a probe run on `mdp`, restarting from the
/// initial state whenever the goal is reached.
pub fn measure_online(source: &dyn ActionSource, mdp: &CsspMdp, probe_steps: usize, seed: u64) -> Result<OnlineStats> {
    if probe_steps == 0 {
        return Err(Error::config("probe_steps must be at least 1"));
    }
    let space = source.key_space();
    let binding = space.bind(mdp)?;
    let mut rng = SeedStream::new(seed).rng(Stream::Probe, 0);
    let mut s = mdp.initial();
    let mut actions = Vec::with_capacity(probe_steps);
    let mut episodes = 0;
    let (mut total, mut max) = (0.0f64, 0.0f64);
    for _ in 0..probe_steps {
        if s == mdp.goal() {
            s = mdp.initial();
            if s == mdp.goal() {
                break;
            }
        }
        let key = binding.key(s).expect("probe only visits reachable states");
        let t0 = Instant::now();
        let c = source.choose(key, &mut rng);
        let dt = t0.elapsed().as_secs_f64();
        total += dt;
        max = max.max(dt);
        actions.push(space.actions(key)[c]);
        s = sample_outcome(&mdp.choices(s)[c].outcomes, &mut rng).next;
        if s == mdp.goal() {
            episodes += 1;
        }
    }
    Ok(OnlineStats {
        probe_steps,
        episodes_completed: episodes,
        memory_entries: source.stored_entries(),
        runtime: OnlineTiming {
            mean_seconds: if actions.is_empty() { 0.0 } else { total / actions.len() as f64 },
            max_seconds: max,
        },
        actions,
    })
}

#[cfg(target_os = "linux")]
fn peak_resident_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(not(target_os = "linux"))]
fn peak_resident_bytes() -> Option<u64> {
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{gridworld, GridworldConfig, MdpBuilder};

    fn one_key_task() -> Vec<TaskMdp> {
        // Three actions to the goal with costs 1, 2, 4.
        let mdp = MdpBuilder::new(2, 3)
            .edge(0, 0, 1, 2.0)
            .edge(0, 1, 1, 1.0)
            .edge(0, 2, 1, 4.0)
            .build()
            .unwrap();
        TaskMdp::plain(&[mdp])
    }

    #[test]
    fn single_decision_converges_to_best_action() {
        let cfg = SolverConfig {
            scorer: ScorerSpec::monte_carlo(1, 10),
            budget: 100,
            baseline_window: 10,
            ..Default::default()
        };
        let trace = run_general_sdm(&one_key_task(), &ContextSpec::empty(), &cfg).unwrap();
        assert_eq!(trace.greedy_policy.action(0), 1);
        let m = trace.final_estimate.marginal(0);
        assert!(m[1] > 0.9, "{m:?}");
    }

    #[test]
    fn zero_budget_returns_prior() {
        let cfg = SolverConfig { budget: 0, ..Default::default() };
        let trace = run_general_sdm(&one_key_task(), &ContextSpec::empty(), &cfg).unwrap();
        assert_eq!(trace.stop_reason, StopReason::PriorReturned);
        assert_eq!(trace.iterations, 0);
        assert_eq!(trace.final_estimate, FactorizedDistribution::uniform(trace.final_estimate.space().clone()));
    }

    #[test]
    fn supplied_prior_is_copied() {
        let task = one_key_task();
        let space = KeySpace::build(&TaskMdp::mdps(&task), &ContextSpec::empty()).unwrap();
        let prior = FactorizedDistribution::new(space.clone(), vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let cfg = SolverConfig { prior: PriorSpec::Factorized(prior.to_document()), ..Default::default() };
        assert_eq!(init_estimate(&cfg, &space).unwrap(), prior);
        let bad = FactorizedDocument { keys: vec![], weights: vec![] };
        let cfg = SolverConfig { prior: PriorSpec::Factorized(bad), ..Default::default() };
        assert!(matches!(init_estimate(&cfg, &space), Err(Error::MissingPriorKeys(_))));
    }

    #[test]
    fn runs_are_reproducible() {
        let mdp = gridworld(&GridworldConfig { width: 3, height: 3, seed: 4, ..Default::default() }).unwrap();
        let cfg = SolverConfig { scorer: ScorerSpec::monte_carlo(2, 50), budget: 300, ..Default::default() };
        let a = run_general_sdm(&TaskMdp::plain(&[mdp.clone()]), &ContextSpec::empty(), &cfg).unwrap();
        let b = run_general_sdm(&TaskMdp::plain(&[mdp]), &ContextSpec::empty(), &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.online.actions, b.online.actions);
        assert!(a.iterations <= cfg.budget);
    }

    #[test]
    fn online_memory_counts_entries() {
        let task = one_key_task();
        let space = KeySpace::build(&TaskMdp::mdps(&task), &ContextSpec::empty()).unwrap();
        let d = FactorizedDistribution::uniform(space.clone());
        let p = d.greedy();
        let a = measure_online(&d, &task[0].mdp, 20, 1).unwrap();
        let b = measure_online(&d, &task[0].mdp, 20, 1).unwrap();
        assert_eq!(a.memory_entries, 3);
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.episodes_completed, 20);
        assert_eq!(measure_online(&p, &task[0].mdp, 5, 1).unwrap().memory_entries, 1);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cfg = SolverConfig { scorer: ScorerSpec::monte_carlo(1, 10), budget: 5, ..Default::default() };
        let trace = run_general_sdm(&one_key_task(), &ContextSpec::empty(), &cfg).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("iter,score,factor,drift\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
