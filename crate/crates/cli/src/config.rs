//! Run configuration: an optional JSON file merged with command-line flags.
//! Flags win over the file, the file wins over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sail_core::baselines::BcConfig;
use sail_core::env::EnvName;
use sail_core::sail::SailConfig;
use sail_core::{Error, Result};

/// What `train` and `sweep` fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Agent {
    #[default]
    Sail,
    /// Generator and discriminator switched off.
    SailNoAdversarial,
    /// Behavioural cloning on the teacher's recorded actions.
    Bc,
}

impl Agent {
    pub fn label(self) -> &'static str {
        match self {
            Agent::Sail => "SAIL",
            Agent::SailNoAdversarial => "SAIL (no adversarial)",
            Agent::Bc => "BC",
        }
    }
}

/// Everything a run needs. The same shape is accepted as a config file and
/// echoed into each run manifest, so a manifest's `config` reproduces it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: Option<EnvName>,
    pub seeds: Option<Vec<u64>>,
    pub teacher: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub agent: Agent,
    pub eval_episodes: Option<usize>,
    pub sail: SailConfig,
    pub bc: BcConfig,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub env: Option<EnvName>,
    pub seeds: Vec<u64>,
    pub teacher: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub ablation: bool,
    pub agent: Option<Agent>,
    pub eval_episodes: Option<usize>,
}

pub const DEFAULT_EVAL_EPISODES: usize = 100;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn merge(mut self, o: Overrides) -> Self {
        self.env = o.env.or(self.env);
        if !o.seeds.is_empty() {
            self.seeds = Some(o.seeds);
        }
        self.teacher = o.teacher.or(self.teacher);
        self.out = o.out.or(self.out);
        if let Some(e) = o.epochs {
            self.sail.epochs = e;
        }
        if let Some(a) = o.agent {
            self.agent = a;
        }
        if o.ablation {
            self.agent = Agent::SailNoAdversarial;
        }
        self.eval_episodes = o.eval_episodes.or(self.eval_episodes);
        self
    }

    /// Checks everything that does not need the file system.
    pub fn resolve(&self) -> Result<Resolved> {
        let env = self.env.ok_or_else(|| missing("env"))?;
        let teacher = self.teacher.clone().ok_or_else(|| missing("teacher"))?;
        let out = self.out.clone().ok_or_else(|| missing("out"))?;
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![self.sail.seed]);
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let eval_episodes = self.eval_episodes.unwrap_or(DEFAULT_EVAL_EPISODES);
        if eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        self.sail.validate()?;
        Ok(Resolved {
            env,
            teacher,
            out,
            seeds,
            eval_episodes,
        })
    }

    pub fn sail_for(&self, seed: u64) -> SailConfig {
        let c = SailConfig {
            seed,
            ..self.sail.clone()
        };
        match self.agent {
            Agent::SailNoAdversarial => c.ablation(),
            _ => c,
        }
    }

    pub fn bc_for(&self, seed: u64) -> BcConfig {
        BcConfig {
            seed,
            ..self.bc.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub env: EnvName,
    pub teacher: PathBuf,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
}

fn missing(what: &str) -> Error {
    Error::Config(format!(
        "`{what}` must be given as a flag or in the config file"
    ))
}
