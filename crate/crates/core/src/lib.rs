//! Probabilistic analysis of sequential decision making tasks.
//!
//! Tasks are sets of constrained stochastic shortest path MDPs. Their
//! solutions are treated as probability distributions over the space of
//! deterministic (optionally context-aware) policies, where each policy's
//! mass is proportional to its quality. On top of that view the crate
//! provides:
//!
//! * [`mdp`]: the MDP model, validation, JSON I/O, classical-planning
//!   encodings, potential-based cost shaping and seeded generators.
//! * [`policy`]: input keys, deterministic policies, enumeration, similarity
//!   and explicit/factorized distributions over policies.
//! * [`exact`]: exact policy evaluation and exact solution distributions,
//!   total variation, task difficulty, set distance and tempering.
//! * [`mc`]: Monte Carlo estimators for difficulty and knowledge quantities.
//! * [`sdm`]: the general sample/score/update loop over a factorized estimate.
//! * [`report`] and [`bundle`]: report envelopes and task bundle files.

pub mod bundle;
pub mod error;
pub mod exact;
mod linalg;
pub mod mc;
pub mod mdp;
mod par;
pub mod policy;
pub mod report;
pub mod rng;
pub mod sdm;

pub use error::{Error, Result};

/// Library version recorded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
