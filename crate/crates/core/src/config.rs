//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bc::DEFAULT_RIDGE;
use crate::discriminator::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::expert::ExpertRule;
use crate::highway::EnvConfig;
use crate::persist::read_to_string;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub ridge: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 100,
            seed: 0,
        }
    }
}

/// Default file locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub demos: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub disc: DiscriminatorConfig,
    pub expert: ExpertRule,
    pub bc: BcConfig,
    pub paths: PathsConfig,
    pub eval: EvalConfig,
    /// Expert episodes recorded by `gen-expert` when no count is given.
    pub demo_episodes: usize,
    /// Write measured iteration times to the training log. Off by default
    /// so that logs of identical runs are byte-identical.
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            disc: DiscriminatorConfig::default(),
            expert: ExpertRule::default(),
            bc: BcConfig::default(),
            paths: PathsConfig::default(),
            eval: EvalConfig::default(),
            demo_episodes: 50,
            record_wall_time: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        self.disc.validate()?;
        self.expert.validate()?;
        if !(self.bc.ridge >= 0.0 && self.bc.ridge.is_finite()) {
            return Err(Error::Config("bc.ridge must be finite and >= 0".into()));
        }
        if self.eval.episodes == 0 || self.demo_episodes == 0 {
            return Err(Error::Config(
                "eval.episodes and demo_episodes must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        Self::from_json(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
