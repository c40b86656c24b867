//! Run configuration shared by the command-line front end and experiment
//! drivers. Every field is optional so a config file and command-line flags
//! can be layered; [`RunConfig::merge`] lets the later source win.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::Horizon;
use crate::linalg::Tolerances;
use crate::metrics::{MetricKind, SingularPolicy};
use crate::selection::Algorithm;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub system: Option<PathBuf>,
    #[serde(default)]
    pub candidates: Option<PathBuf>,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub weight: Option<PathBuf>,
    #[serde(default)]
    pub metric: Option<MetricKind>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub horizon: Option<Horizon>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    #[serde(default)]
    pub singular_policy: Option<SingularPolicy>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = crate::io::from_json_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.trials == Some(0) {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.n == Some(0) {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if let Some(h) = &self.horizon {
            h.validate()?;
        }
        if let Some(t) = &self.tolerances {
            t.validate()?;
        }
        Ok(())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: RunConfig) -> RunConfig {
        RunConfig {
            command: other.command.or(self.command),
            system: other.system.or(self.system),
            candidates: other.candidates.or(self.candidates),
            input: other.input.or(self.input),
            weight: other.weight.or(self.weight),
            metric: other.metric.or(self.metric),
            k: other.k.or(self.k),
            algorithm: other.algorithm.or(self.algorithm),
            horizon: other.horizon.or(self.horizon),
            tolerances: other.tolerances.or(self.tolerances),
            singular_policy: other.singular_policy.or(self.singular_policy),
            seed: other.seed.or(self.seed),
            trials: other.trials.or(self.trials),
            n: other.n.or(self.n),
            out: other.out.or(self.out),
            workers: other.workers.or(self.workers),
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_default()
    }

    /// The seed, or an error naming the command that needs one.
    pub fn require_seed(&self, what: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidConfig(format!("{what} is randomized and requires an explicit seed")))
    }
}
