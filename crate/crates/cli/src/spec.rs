//! Short command-line forms for scorers and similarity functions.
//!
//! `exact`, `mc:n=5,steps=100,noise=0.1`, `bootstrap:alpha=0.5,sweeps=2`, or
//! a path to a JSON scorer document. Similarities are `overlap`, `oracle` or
//! `constant:<value>`.

use std::path::Path;

use serde::Serialize;
use sdmlab_core::sdm::{ScorerKind, ScorerSpec};

/// Splits `kind:k=v,k=v` into the kind and its parameters.
fn split(s: &str) -> Result<(&str, Vec<(&str, &str)>), String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let params = rest
        .split(',')
        .filter(|p| !p.is_empty())
        .map(|p| p.split_once('=').ok_or_else(|| format!("expected key=value, got {p:?}")))
        .collect::<Result<_, _>>()?;
    Ok((kind, params))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("bad value {v:?} for {key}"))
}

/// Parses a scorer. Parameters not listed keep their values from `base`.
pub fn parse_scorer(s: &str, base: &ScorerSpec) -> Result<ScorerSpec, String> {
    if s.ends_with(".json") {
        let text = std::fs::read_to_string(Path::new(s)).map_err(|e| format!("{s}: {e}"))?;
        return serde_json::from_str(&text).map_err(|e| format!("{s}: {e}"));
    }
    let (kind, params) = split(s)?;
    let mut spec = base.clone();
    spec.kind = match kind {
        "exact" => ScorerKind::Exact,
        "mc" | "monte_carlo" => ScorerKind::MonteCarlo,
        "bootstrap" | "td" => ScorerKind::Bootstrap,
        other => return Err(format!("unknown scorer {other:?}")),
    };
    for (k, v) in params {
        match k {
            "n" | "rollouts" => spec.rollouts = num(k, v)?,
            "steps" | "max_steps" => spec.max_steps = num(k, v)?,
            "alpha" => spec.alpha = num(k, v)?,
            "sweeps" => spec.sweeps = num(k, v)?,
            "noise" => spec.noise = num(k, v)?,
            "rescale" => spec.rescale = num(k, v)?,
            other => return Err(format!("unknown scorer parameter {other:?}")),
        }
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum SimSpec {
    Overlap,
    Oracle,
    Constant(f64),
}

pub fn parse_sim(s: &str) -> Result<SimSpec, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match (kind, rest) {
        ("overlap", "") => Ok(SimSpec::Overlap),
        ("oracle", "") => Ok(SimSpec::Oracle),
        ("constant", v) => {
            let c: f64 = num("constant", v)?;
            if (0.0..=1.0).contains(&c) {
                Ok(SimSpec::Constant(c))
            } else {
                Err(format!("constant similarity must lie in [0, 1], got {c}"))
            }
        }
        _ => Err(format!("unknown similarity {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_forms() {
        let base = ScorerSpec::default();
        assert_eq!(parse_scorer("exact", &base).unwrap().kind, ScorerKind::Exact);
        let mc = parse_scorer("mc:n=1,noise=0.5", &base).unwrap();
        assert_eq!((mc.kind, mc.rollouts, mc.noise), (ScorerKind::MonteCarlo, 1, 0.5));
        assert!(parse_scorer("mc:n", &base).is_err());
        assert!(parse_scorer("oracle", &base).is_err());
    }

    #[test]
    fn similarity_forms() {
        assert_eq!(parse_sim("constant:0.5").unwrap(), SimSpec::Constant(0.5));
        assert_eq!(parse_sim("overlap").unwrap(), SimSpec::Overlap);
        assert!(parse_sim("constant:2").is_err());
    }
}
