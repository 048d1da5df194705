use std::path::PathBuf;

use crate::mdp::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid MDP: {} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidMdp(Vec<Violation>),

    #[error("no proper policy exists")]
    NoProperPolicy,

    #[error("no solution policy exists: every enumerated policy has zero quality")]
    NoSolutionPolicy,

    #[error("policy space has {count} policies, above the enumeration cap of {cap}")]
    EnumerationCap { count: String, cap: u128 },

    #[error("shaped cost {shaped} is negative on transition ({state}, {action}, {next})")]
    NegativeShapedCost {
        state: usize,
        action: usize,
        next: usize,
        shaped: f64,
    },

    #[error("potential must be zero at the goal state, got {0}")]
    NonZeroGoalPotential(f64),

    #[error("policies are defined over different key sets")]
    KeySetMismatch,

    #[error("distributions are defined over different policy universes")]
    UniverseMismatch,

    #[error("input key {key} has inconsistent applicable actions across MDPs")]
    InconsistentKey { key: String },

    #[error("reachable state {state} has no entry in the policy key space")]
    UncoveredState { state: usize },

    #[error("prior does not cover {} key(s): {}", .0.len(), .0.join(", "))]
    MissingPriorKeys(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
