use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::exact::QUALITY_CAP;
use crate::mc::{EvalSet, TaskMdp};
use crate::mdp::CsspMdp;
use crate::policy::{Binding, DeterministicPolicy, KeySpace, DEFAULT_ENUMERATION_CAP};
use crate::rng::{SeedStream, Stream};
use crate::{Error, Result};

/// A scoring function: one (possibly noisy) quality estimate per call.
/// Scorers may keep state between calls.
pub trait Scorer: Send {
    fn score(&mut self, policy: &DeterministicPolicy, seeds: SeedStream) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    MonteCarlo,
    Bootstrap,
    Exact,
}

/// Scorer description as read from JSON, e.g.
/// `{"kind": "monte_carlo", "rollouts": 5, "max_steps": 100}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    /// Trajectories per MDP (monte_carlo).
    pub rollouts: usize,
    pub max_steps: usize,
    /// TD learning rate (bootstrap).
    pub alpha: f64,
    /// TD trajectories per MDP and call (bootstrap).
    pub sweeps: usize,
    /// Standard deviation of additive Gaussian noise on every score.
    pub noise: f64,
    /// Report q / q* per MDP instead of the raw quality.
    pub rescale: bool,
    pub enumeration_cap: u128,
}

impl Default for ScorerSpec {
    fn default() -> Self {
        Self {
            kind: ScorerKind::MonteCarlo,
            rollouts: 5,
            max_steps: 1000,
            alpha: 0.5,
            sweeps: 1,
            noise: 0.0,
            rescale: false,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl ScorerSpec {
    pub fn monte_carlo(rollouts: usize, max_steps: usize) -> Self {
        Self { kind: ScorerKind::MonteCarlo, rollouts, max_steps, ..Default::default() }
    }

    pub fn exact() -> Self {
        Self { kind: ScorerKind::Exact, ..Default::default() }
    }

    pub fn bootstrap(alpha: f64, sweeps: usize, max_steps: usize) -> Self {
        Self { kind: ScorerKind::Bootstrap, alpha, sweeps, max_steps, ..Default::default() }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise = sigma;
        self
    }

    pub fn with_rescale(mut self, rescale: bool) -> Self {
        self.rescale = rescale;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::config("scorer max_steps must be at least 1"));
        }
        match self.kind {
            ScorerKind::MonteCarlo if self.rollouts == 0 => {
                Err(Error::config("monte_carlo scorer needs rollouts >= 1"))
            }
            ScorerKind::Bootstrap if !(self.alpha > 0.0 && self.alpha <= 1.0) => {
                Err(Error::config(format!("bootstrap alpha must lie in (0, 1], got {}", self.alpha)))
            }
            _ if !(self.noise.is_finite() && self.noise >= 0.0) => {
                Err(Error::config("scorer noise must be a finite nonnegative number"))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, mdps: &[TaskMdp], space: &KeySpace) -> Result<Box<dyn Scorer>> {
        self.check()?;
        let set = EvalSet::new(mdps, space, self.rescale, self.enumeration_cap)?;
        let inner: Box<dyn Scorer> = match self.kind {
            ScorerKind::MonteCarlo => Box::new(MonteCarloScorer {
                set,
                rollouts: self.rollouts,
                max_steps: self.max_steps,
                rescale: self.rescale,
            }),
            ScorerKind::Exact => Box::new(ExactScorer { set, rescale: self.rescale }),
            ScorerKind::Bootstrap => Box::new(BootstrapScorer::new(mdps, space, self, set.scales().to_vec())?),
        };
        Ok(if self.noise > 0.0 {
            Box::new(NoisyScorer { inner, sigma: self.noise })
        } else {
            inner
        })
    }
}

/// Set quality from the mean totals of `rollouts` trajectories per MDP.
pub struct MonteCarloScorer {
    set: EvalSet,
    rollouts: usize,
    max_steps: usize,
    rescale: bool,
}

impl Scorer for MonteCarloScorer {
    fn score(&mut self, policy: &DeterministicPolicy, seeds: SeedStream) -> Result<f64> {
        let q = self.set.mc_quality(policy, self.rollouts, self.max_steps, seeds);
        Ok(if self.rescale { q.rescaled_set_quality } else { q.set_quality })
    }
}

/// Exact set quality, identical to [`crate::exact::quality_on_set`].
pub struct ExactScorer {
    set: EvalSet,
    rescale: bool,
}

impl Scorer for ExactScorer {
    fn score(&mut self, policy: &DeterministicPolicy, _seeds: SeedStream) -> Result<f64> {
        let q = self.set.exact_quality(policy)?;
        Ok(if self.rescale { q.rescaled_set_quality } else { q.set_quality })
    }
}

/// Temporal-difference scorer. Keeps a cost-to-goal table per MDP state
/// across calls, initialized pessimistically to `max_steps`.
pub struct BootstrapScorer {
    mdps: Vec<CsspMdp>,
    bindings: Vec<Binding>,
    scales: Vec<f64>,
    values: Vec<Vec<f64>>,
    alpha: f64,
    sweeps: usize,
    max_steps: usize,
}

impl BootstrapScorer {
    fn new(mdps: &[TaskMdp], space: &KeySpace, spec: &ScorerSpec, scales: Vec<f64>) -> Result<Self> {
        let plain = TaskMdp::mdps(mdps);
        let bindings = plain.iter().map(|m| space.bind(m)).collect::<Result<_>>()?;
        let values = plain
            .iter()
            .map(|m| {
                let mut v = vec![spec.max_steps as f64; m.num_states()];
                v[m.goal()] = 0.0;
                v
            })
            .collect();
        Ok(Self {
            mdps: plain,
            bindings,
            scales,
            values,
            alpha: spec.alpha,
            sweeps: spec.sweeps,
            max_steps: spec.max_steps,
        })
    }

    pub fn values(&self, mdp: usize) -> &[f64] {
        &self.values[mdp]
    }
}

impl Scorer for BootstrapScorer {
    fn score(&mut self, policy: &DeterministicPolicy, seeds: SeedStream) -> Result<f64> {
        let mut total = 1.0;
        for (j, mdp) in self.mdps.iter().enumerate() {
            let mut rng = seeds.rng(Stream::Rollouts, j as u64);
            let v = &mut self.values[j];
            let goal = mdp.goal();
            for _ in 0..self.sweeps {
                let mut s = mdp.initial();
                let mut steps = 0;
                while s != goal && steps < self.max_steps {
                    let key = self.bindings[j].key(s).expect("rollouts only visit reachable states");
                    let choice = &mdp.choices(s)[policy.choices()[key]];
                    let o = crate::mc::sample_outcome(&choice.outcomes, &mut rng);
                    v[s] = (1.0 - self.alpha) * v[s] + self.alpha * (o.cost + v[o.next]);
                    s = o.next;
                    steps += 1;
                }
                if s != goal {
                    return Ok(0.0);
                }
            }
            let q = 1.0 / v[mdp.initial()].max(1.0 / QUALITY_CAP);
            total *= q / self.scales[j];
        }
        Ok(total)
    }
}

/// Adds `N(0, sigma^2)` to another scorer's output, clamped at zero.
pub struct NoisyScorer {
    inner: Box<dyn Scorer>,
    sigma: f64,
}

impl NoisyScorer {
    pub fn new(inner: Box<dyn Scorer>, sigma: f64) -> Self {
        Self { inner, sigma }
    }
}

impl Scorer for NoisyScorer {
    fn score(&mut self, policy: &DeterministicPolicy, seeds: SeedStream) -> Result<f64> {
        let q = self.inner.score(policy, seeds)?;
        let eps: f64 = seeds.rng(Stream::Noise, 0).sample(StandardNormal);
        Ok((q + self.sigma * eps).max(0.0))
    }
}

/// Wall-clock accumulator for scorer calls.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreClock {
    pub calls: u64,
    pub total_seconds: f64,
}

impl ScoreClock {
    pub fn time(&mut self, scorer: &mut dyn Scorer, policy: &DeterministicPolicy, seeds: SeedStream) -> Result<f64> {
        let start = Instant::now();
        let q = scorer.score(policy, seeds);
        self.total_seconds += start.elapsed().as_secs_f64();
        self.calls += 1;
        q
    }

    pub fn mean_seconds(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.total_seconds / self.calls as f64
        }
    }
}
