//! Task bundle files.
//!
//! ```json
//! {
//!   "train": ["a.json", {"path": "b.json", "potential": {"goal_distance": {"offset": 1, "scale": 1}}}],
//!   "test": [{"path": "c.json", "potential": [2.0, 1.0, 0.0]}],
//!   "context": ["goal_state"],
//!   "rescale": true
//! }
//! ```
//!
//! Paths are relative to the bundle file. `test` defaults to the training
//! set. Potentials are all-or-none: either every referenced MDP carries one
//! or none does, so every compared set receives the same kind of quality
//! transformation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mc::TaskMdp;
use crate::mdp::io::{parse_json, read_text};
use crate::mdp::{load_mdp, CsspMdp, PotentialFunction};
use crate::policy::ContextSpec;
use crate::report::{file_digest, InputDigest};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MdpRef {
    Path(PathBuf),
    Shaped {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<PotentialSpec>,
    },
}

impl MdpRef {
    pub fn path(&self) -> &Path {
        match self {
            MdpRef::Path(p) | MdpRef::Shaped { path: p, .. } => p,
        }
    }

    pub fn potential(&self) -> Option<&PotentialSpec> {
        match self {
            MdpRef::Path(_) => None,
            MdpRef::Shaped { potential, .. } => potential.as_ref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSpec {
    /// See [`PotentialFunction::goal_distance`].
    GoalDistance { offset: f64, scale: f64 },
    #[serde(untagged)]
    Values(Vec<f64>),
}

impl PotentialSpec {
    pub fn build(&self, mdp: &CsspMdp) -> Result<PotentialFunction> {
        match self {
            PotentialSpec::GoalDistance { offset, scale } => {
                if !(offset.is_finite() && scale.is_finite()) {
                    return Err(Error::config("goal_distance offset and scale must be finite"));
                }
                Ok(PotentialFunction::goal_distance(mdp, *offset, *scale))
            }
            PotentialSpec::Values(v) => PotentialFunction::new(mdp, v.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBundle {
    pub train: Vec<MdpRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Vec<MdpRef>>,
    #[serde(default)]
    pub context: ContextSpec,
    #[serde(default = "default_rescale")]
    pub rescale: bool,
}

fn default_rescale() -> bool {
    true
}

/// A bundle with every MDP loaded and checked.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub train: Vec<TaskMdp>,
    pub test: Vec<TaskMdp>,
    pub context: ContextSpec,
    pub rescale: bool,
    /// The bundle file first, then every distinct referenced file.
    pub inputs: Vec<InputDigest>,
}

impl LoadedBundle {
    pub fn smoothed(&self) -> bool {
        self.train.iter().chain(&self.test).any(|t| t.potential.is_some())
    }

    pub fn train_mdps(&self) -> Vec<CsspMdp> {
        TaskMdp::mdps(&self.train)
    }

    pub fn test_mdps(&self) -> Vec<CsspMdp> {
        TaskMdp::mdps(&self.test)
    }
}

impl TaskBundle {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bundle: TaskBundle = parse_json(text, origin)?;
        if bundle.train.is_empty() {
            return Err(Error::config("bundle train set is empty"));
        }
        if bundle.test.as_ref().is_some_and(|t| t.is_empty()) {
            return Err(Error::config("bundle test set is empty; omit it to reuse the training set"));
        }
        let refs: Vec<&MdpRef> = bundle.refs().collect();
        let shaped = refs.iter().filter(|r| r.potential().is_some()).count();
        if shaped != 0 && shaped != refs.len() {
            return Err(Error::config(format!(
                "{shaped} of {} MDP references carry a potential; use potentials on all of them or none",
                refs.len()
            )));
        }
        Ok(bundle)
    }

    pub fn refs(&self) -> impl Iterator<Item = &MdpRef> {
        self.train.iter().chain(self.test.iter().flatten())
    }

    /// Loads the bundle and every MDP it references.
    pub fn load(path: &Path) -> Result<LoadedBundle> {
        let bundle = Self::parse(&read_text(path)?, path)?;
        bundle.resolve(path)
    }

    /// Every referenced path, resolved against the bundle file's directory.
    pub fn resolved_paths(&self, bundle_path: &Path) -> Vec<PathBuf> {
        let dir = bundle_path.parent().unwrap_or(Path::new(""));
        self.refs().map(|r| dir.join(r.path())).collect()
    }

    pub fn resolve(&self, bundle_path: &Path) -> Result<LoadedBundle> {
        let dir = bundle_path.parent().unwrap_or(Path::new(""));
        let load = |refs: &[MdpRef]| -> Result<Vec<TaskMdp>> {
            refs.iter()
                .map(|r| {
                    let mdp = load_mdp(&dir.join(r.path()))?;
                    let potential = r.potential().map(|p| p.build(&mdp)).transpose()?;
                    Ok(TaskMdp { mdp, potential })
                })
                .collect()
        };
        let train = load(&self.train)?;
        let test = match &self.test {
            Some(t) => load(t)?,
            None => train.clone(),
        };
        let mut inputs = vec![digest(bundle_path)?];
        for p in self.resolved_paths(bundle_path) {
            let d = digest(&p)?;
            if !inputs.contains(&d) {
                inputs.push(d);
            }
        }
        Ok(LoadedBundle {
            train,
            test,
            context: self.context.clone(),
            rescale: self.rescale,
            inputs,
        })
    }
}

fn digest(path: &Path) -> Result<InputDigest> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: file_digest(path)?,
    })
}
