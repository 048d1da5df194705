use serde::{Deserialize, Serialize};

use super::{EvalSet, PriorDifficulty, TaskMdp};
use crate::exact::QUALITY_CAP;
use crate::par::map_indexed;
use crate::policy::{similarity, ContextSpec, DeterministicPolicy, KeySpace, PolicySampler, UniformSampler, DEFAULT_ENUMERATION_CAP};
use crate::report::inf_f64;
use crate::rng::{SeedStream, Stream};
use crate::sdm::{ScoreClock, Scorer};
use crate::{Error, Result};

/// Value reported in place of an infinite inverse deviation.
pub const KNOWLEDGE_CAP: f64 = QUALITY_CAP;

/// A similarity function over deterministic policies.
pub trait Similarity: Sync {
    fn similarity(&self, a: &DeterministicPolicy, b: &DeterministicPolicy) -> Result<f64>;
}

/// Fraction of keys on which the two policies pick the same action.
#[derive(Clone, Copy, Debug, Default)]
pub struct ElementOverlap;

impl Similarity for ElementOverlap {
    fn similarity(&self, a: &DeterministicPolicy, b: &DeterministicPolicy) -> Result<f64> {
        similarity(a, b)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantSimilarity(pub f64);

impl Similarity for ConstantSimilarity {
    fn similarity(&self, _a: &DeterministicPolicy, _b: &DeterministicPolicy) -> Result<f64> {
        Ok(self.0)
    }
}

/// `1 - |q1 - q2|` with exact (optionally rescaled) set qualities.
#[derive(Clone, Debug)]
pub struct OracleSimilarity {
    set: EvalSet,
    rescale: bool,
}

impl OracleSimilarity {
    pub fn new(train: &[TaskMdp], space: &KeySpace, rescale: bool, cap: u128) -> Result<Self> {
        Ok(Self { set: EvalSet::new(train, space, rescale, cap)?, rescale })
    }
}

impl Similarity for OracleSimilarity {
    fn similarity(&self, a: &DeterministicPolicy, b: &DeterministicPolicy) -> Result<f64> {
        let q = |p| {
            self.set
                .exact_quality(p)
                .map(|q| if self.rescale { q.rescaled_set_quality } else { q.set_quality })
        };
        Ok(1.0 - (q(a)? - q(b)?).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    /// Sampled policy pairs.
    pub pairs: usize,
    /// Trajectories per reference estimate when the policy space is too
    /// large for exact reference qualities.
    pub reference_rollouts: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub rescale: bool,
    pub enumeration_cap: u128,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            pairs: 1000,
            reference_rollouts: 1000,
            max_steps: 1000,
            seed: 0,
            rescale: true,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl KnowledgeConfig {
    pub fn check(&self) -> Result<()> {
        if self.pairs == 0 || self.reference_rollouts == 0 || self.max_steps == 0 {
            return Err(Error::config("pairs, reference_rollouts and max_steps must all be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRuntime {
    pub clock: ScoreClock,
    pub mean_seconds_per_call: f64,
    /// `q_score` divided by the mean seconds per scorer call.
    #[serde(with = "inf_f64")]
    pub time_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QScoreReport {
    pub pairs: usize,
    pub evaluated_pairs: usize,
    /// Pairs with a zero quality sum or a zero score sum.
    pub skipped_pairs: usize,
    pub reference: ReferenceMethod,
    pub mean_deviation: f64,
    /// Inverse mean deviation; "inf" when the deviation is zero.
    #[serde(with = "inf_f64")]
    pub raw: f64,
    /// `raw` capped at [`KNOWLEDGE_CAP`].
    pub q_score: f64,
    pub degenerate: bool,
    pub seed: u64,
    pub rescaled: bool,
    pub runtime: ScoreRuntime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSimReport {
    pub pairs: usize,
    pub reference: ReferenceMethod,
    pub mean_deviation: f64,
    #[serde(with = "inf_f64")]
    pub raw: f64,
    pub q_sim: f64,
    pub degenerate: bool,
    pub seed: u64,
    pub rescaled: bool,
}

/// Whichever knowledge quantities were requested.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorDifficulty>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<QScoreReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<QSimReport>,
}

struct PairSample {
    policies: Vec<(DeterministicPolicy, DeterministicPolicy)>,
    qualities: Vec<(f64, f64)>,
    reference: ReferenceMethod,
}

/// Uniform policy pairs with reference qualities: exact when the policy
/// space is enumerable, high-rollout Monte Carlo otherwise.
fn sample_pairs(train: &[TaskMdp], context: &ContextSpec, cfg: &KnowledgeConfig) -> Result<PairSample> {
    cfg.check()?;
    if train.is_empty() {
        return Err(Error::config("the training set is empty"));
    }
    let space = KeySpace::build(&TaskMdp::mdps(train), context)?;
    let set = EvalSet::new(train, &space, cfg.rescale, cfg.enumeration_cap)?;
    let reference = match space.policy_count() {
        Some(n) if n <= cfg.enumeration_cap => ReferenceMethod::Exact,
        _ => ReferenceMethod::MonteCarlo,
    };
    let seeds = SeedStream::new(cfg.seed);
    let sampler = UniformSampler::new(space);
    let policies: Vec<_> = (0..cfg.pairs as u64)
        .map(|i| {
            let mut rng = seeds.rng(Stream::PairSampling, i);
            (sampler.sample_policy(&mut rng), sampler.sample_policy(&mut rng))
        })
        .collect();
    let pick = |q: super::McQuality| if cfg.rescale { q.rescaled_set_quality } else { q.set_quality };
    let quality = |p: &DeterministicPolicy, ordinal: u64| -> Result<f64> {
        match reference {
            ReferenceMethod::Exact => set.exact_quality(p).map(pick),
            ReferenceMethod::MonteCarlo => Ok(pick(set.mc_quality(
                p,
                cfg.reference_rollouts,
                cfg.max_steps,
                seeds.child(Stream::Reference, ordinal),
            ))),
        }
    };
    let qualities = map_indexed(policies.len(), |i| {
        let (a, b) = &policies[i];
        Ok((quality(a, 2 * i as u64)?, quality(b, 2 * i as u64 + 1)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(PairSample { policies, qualities, reference })
}

fn invert(mean: f64) -> (f64, f64) {
    let raw = if mean > 0.0 { 1.0 / mean } else { f64::INFINITY };
    (raw, raw.min(KNOWLEDGE_CAP))
}

/// Knowledge in a scoring function: the inverse mean gap between relative
/// quality differences and relative score differences over random pairs.
pub fn estimate_q_score(
    train: &[TaskMdp],
    scorer: &mut dyn Scorer,
    context: &ContextSpec,
    cfg: &KnowledgeConfig,
) -> Result<QScoreReport> {
    let sample = sample_pairs(train, context, cfg)?;
    let seeds = SeedStream::new(cfg.seed);
    let mut clock = ScoreClock::default();
    let mut total = 0.0;
    let mut skipped = 0;
    for (i, ((a, b), &(q1, q2))) in sample.policies.iter().zip(&sample.qualities).enumerate() {
        let s1 = clock.time(scorer, a, seeds.child(Stream::Scorer, 2 * i as u64))?;
        let s2 = clock.time(scorer, b, seeds.child(Stream::Scorer, 2 * i as u64 + 1))?;
        if q1 + q2 == 0.0 || s1 + s2 == 0.0 {
            skipped += 1;
            continue;
        }
        total += ((q1 - q2) / (q1 + q2) - (s1 - s2) / (s1 + s2)).abs();
    }
    let evaluated = cfg.pairs - skipped;
    if evaluated == 0 {
        return Err(Error::invalid(
            "every sampled pair had a zero quality sum or a zero score sum",
        ));
    }
    let mean = total / evaluated as f64;
    let (raw, q_score) = invert(mean);
    let per_call = clock.mean_seconds();
    Ok(QScoreReport {
        pairs: cfg.pairs,
        evaluated_pairs: evaluated,
        skipped_pairs: skipped,
        reference: sample.reference,
        mean_deviation: mean,
        raw,
        q_score,
        degenerate: raw.is_infinite(),
        seed: cfg.seed,
        rescaled: cfg.rescale,
        runtime: ScoreRuntime {
            time_normalized: if per_call > 0.0 { q_score / per_call } else { f64::INFINITY },
            mean_seconds_per_call: per_call,
            clock,
        },
    })
}

/// Knowledge in a similarity function: the inverse mean gap between
/// `|q1 - q2|` and `1 - similarity` over random pairs.
pub fn estimate_q_sim(
    train: &[TaskMdp],
    sim: &dyn Similarity,
    context: &ContextSpec,
    cfg: &KnowledgeConfig,
) -> Result<QSimReport> {
    let sample = sample_pairs(train, context, cfg)?;
    let mut total = 0.0;
    for ((a, b), &(q1, q2)) in sample.policies.iter().zip(&sample.qualities) {
        total += ((q1 - q2).abs() - (1.0 - sim.similarity(a, b)?)).abs();
    }
    let mean = total / cfg.pairs as f64;
    let (raw, q_sim) = invert(mean);
    Ok(QSimReport {
        pairs: cfg.pairs,
        reference: sample.reference,
        mean_deviation: mean,
        raw,
        q_sim,
        degenerate: raw.is_infinite(),
        seed: cfg.seed,
        rescaled: cfg.rescale,
    })
}
