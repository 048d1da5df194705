//! Report envelopes and JSON conventions.
//!
//! Infinite values serialize as the string `"inf"` and are paired with a
//! `degenerate: true` flag by the structs that can carry them. Timing and
//! thread counts live under a `runtime` key; [`canonical_json`] strips every
//! such key so that reports can be compared byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Serde helpers for `f64` fields that may be `+inf`.
pub mod inf_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(D::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// Same as [`inf_f64`] for vectors.
pub mod inf_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, serde::Deserialize)]
    struct Wrap(#[serde(with = "super::inf_f64")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&Wrap(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "mc" | "monte_carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::config(format!("unknown method {other:?}, expected exact or mc"))),
        }
    }
}

/// Task difficulty: computational term plus generalization term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyReport {
    pub method: Method,
    #[serde(with = "inf_f64")]
    pub train_term: f64,
    pub distance_term: f64,
    #[serde(with = "inf_f64")]
    pub total: f64,
    pub degenerate: bool,
    /// Enumerated policies (exact) or sampled policies (Monte Carlo).
    pub sample_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollouts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescaled: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// sha256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Non-canonical execution facts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub wall_clock_seconds: f64,
    pub threads: usize,
}

/// Envelope written by every CLI command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub result: Value,
    pub runtime: Runtime,
}

impl RunReport {
    pub fn canonical(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        strip_runtime(&mut v);
        v
    }
}

fn strip_runtime(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("runtime");
            map.values_mut().for_each(strip_runtime);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

/// Pretty JSON with every `runtime` object removed, recursively.
pub fn canonical_json(v: &Value) -> String {
    let mut v = v.clone();
    strip_runtime(&mut v);
    serde_json::to_string_pretty(&v).expect("values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Probe {
        #[serde(with = "inf_f64")]
        x: f64,
        #[serde(with = "inf_vec")]
        v: Vec<f64>,
    }

    #[test]
    fn infinity_round_trips_as_string() {
        let p = Probe { x: f64::INFINITY, v: vec![1.5, f64::INFINITY] };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"x":"inf","v":[1.5,"inf"]}"#);
        assert_eq!(serde_json::from_str::<Probe>(&s).unwrap(), p);
    }

    #[test]
    fn canonical_form_drops_runtime_everywhere() {
        let v = serde_json::json!({"a": 1, "runtime": {"t": 2}, "b": [{"runtime": 3, "c": 4}]});
        let c: Value = serde_json::from_str(&canonical_json(&v)).unwrap();
        assert_eq!(c, serde_json::json!({"a": 1, "b": [{"c": 4}]}));
    }
}
