use serde::{Deserialize, Serialize};

use super::{inverse_mean, EvalSet, McConfig, TaskMdp};
use crate::par::map_indexed;
use crate::policy::{ContextSpec, KeySpace, PolicySampler, UniformSampler};
use crate::report::{inf_f64, DifficultyReport, Method};
use crate::rng::{SeedStream, Stream};
use crate::{Error, Result};

/// Monte Carlo task difficulty: `(mean q_train)^-1 + mean (q_train - q_test)^2`
/// over uniformly sampled policies.
pub fn estimate_task_difficulty(
    train: &[TaskMdp],
    test: &[TaskMdp],
    context: &ContextSpec,
    cfg: &McConfig,
) -> Result<DifficultyReport> {
    cfg.check()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::config("train and test sets must be nonempty"));
    }
    let all: Vec<_> = train.iter().chain(test).map(|t| t.mdp.clone()).collect();
    let space = KeySpace::build(&all, context)?;
    let train_set = EvalSet::new(train, &space, cfg.rescale, cfg.enumeration_cap)?;
    let test_set = EvalSet::new(test, &space, cfg.rescale, cfg.enumeration_cap)?;
    let sampler = UniformSampler::new(space);
    let seeds = SeedStream::new(cfg.seed);

    let pairs = map_indexed(cfg.samples, |i| {
        let i = i as u64;
        let policy = sampler.sample_policy(&mut seeds.rng(Stream::PolicySampling, i));
        let train_seeds = seeds.child(Stream::Rollouts, i);
        let test_seeds = if cfg.pair_seeds { train_seeds } else { seeds.child(Stream::Reference, i) };
        let q_train = train_set.mc_quality(&policy, cfg.rollouts, cfg.max_steps, train_seeds);
        let q_test = test_set.mc_quality(&policy, cfg.rollouts, cfg.max_steps, test_seeds);
        (q_train.rescaled_set_quality, q_test.rescaled_set_quality)
    });

    let q_train: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (_, train_term) = inverse_mean(&q_train);
    let distance_term = pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pairs.len() as f64;
    let degenerate = train_term.is_infinite();
    let mut warnings = Vec::new();
    if degenerate {
        warnings.push(format!(
            "none of the {} sampled policies obtained a nonzero training quality",
            cfg.samples
        ));
    }
    Ok(DifficultyReport {
        method: Method::MonteCarlo,
        train_term,
        distance_term,
        total: train_term + distance_term,
        degenerate,
        sample_count: cfg.samples as u64,
        rollouts: Some(cfg.rollouts),
        max_steps: Some(cfg.max_steps),
        seed: Some(cfg.seed),
        rescaled: Some(cfg.rescale),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorDifficulty {
    /// D_{M, P0} = (mean q)^-1 under policies drawn from the prior.
    #[serde(with = "inf_f64")]
    pub difficulty: f64,
    /// Knowledge in the prior, inversely proportional to the difficulty.
    pub q_prior: f64,
    pub mean_quality: f64,
    pub degenerate: bool,
    pub samples: usize,
    pub rollouts: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub rescaled: bool,
}

/// Like the first difficulty term, but sampling from `prior` instead of
/// the uniform distribution. The prior's key space must cover `train`.
pub fn estimate_prior_difficulty(
    train: &[TaskMdp],
    prior: &(dyn PolicySampler + Sync),
    cfg: &McConfig,
) -> Result<PriorDifficulty> {
    cfg.check()?;
    let train_set = EvalSet::new(train, prior.key_space(), cfg.rescale, cfg.enumeration_cap)?;
    let seeds = SeedStream::new(cfg.seed);
    let qualities = map_indexed(cfg.samples, |i| {
        let i = i as u64;
        let policy = prior.sample_policy(&mut seeds.rng(Stream::PolicySampling, i));
        train_set
            .mc_quality(&policy, cfg.rollouts, cfg.max_steps, seeds.child(Stream::Rollouts, i))
            .rescaled_set_quality
    });
    let (mean, difficulty) = inverse_mean(&qualities);
    Ok(PriorDifficulty {
        difficulty,
        q_prior: if difficulty.is_finite() { 1.0 / difficulty } else { 0.0 },
        mean_quality: mean,
        degenerate: difficulty.is_infinite(),
        samples: cfg.samples,
        rollouts: cfg.rollouts,
        max_steps: cfg.max_steps,
        seed: cfg.seed,
        rescaled: cfg.rescale,
    })
}
