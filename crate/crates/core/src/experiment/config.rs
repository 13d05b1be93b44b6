use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::federation::{FedConfig, RunPlan};

/// Top-level experiment configuration. Every key is optional; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub federation: FedConfig,
    pub agent: AgentConfig,
    /// Greedy episodes per evaluation.
    pub eval_episodes: usize,
    /// Master seed.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            federation: FedConfig::default(),
            agent: AgentConfig::default(),
            eval_episodes: 5,
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate_with_prefix("env.")?;
        self.federation.validate()?;
        self.agent.validate()?;
        if self.eval_episodes == 0 {
            return Err(Error::validation("eval_episodes", "must be at least 1"));
        }
        Ok(())
    }

    pub fn plan<'a>(&'a self, checkpoint_dir: Option<&'a Path>) -> RunPlan<'a> {
        RunPlan {
            env: &self.env,
            fed: &self.federation,
            agent: &self.agent,
            eval_episodes: self.eval_episodes,
            seed: self.seed,
            checkpoint_dir,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Writes the effective configuration as `config.json` under `dir`.
pub fn write_config(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
