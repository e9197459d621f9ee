//! Experiment configuration: JSON with profile defaults and validated overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use resetless::envs::{make_domain, ArenaConfig, Family, ManipEnv};
use resetless::orchestrator::{build_trainer, Algorithm, RndConfig, Trainer, TrainerConfig};
use resetless::sac::SacConfig;
use resetless::taskgraph::GraphThresholds;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Paper,
    Desk,
}

impl Profile {
    pub fn sac(self) -> SacConfig {
        match self {
            Profile::Paper => SacConfig::paper(),
            Profile::Desk => SacConfig::desk(),
        }
    }
}

fn default_profile() -> Profile {
    Profile::Desk
}

fn default_period() -> usize {
    100
}

fn default_eval_every() -> u64 {
    10_000
}

fn default_eval_episodes() -> usize {
    50
}

fn default_eval_horizon() -> usize {
    200
}

fn default_checkpoint_every() -> u64 {
    10_000
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

/// One training run. `sac` holds overrides applied on top of the profile's
/// SAC settings; `arena`, `graph`, and `rnd` fill unspecified keys with defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: String,
    pub algorithm: Algorithm,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub seed: u64,
    pub budget: u64,
    #[serde(default = "default_period")]
    pub switch_period: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_eval_horizon")]
    pub eval_horizon: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sac: serde_json::Map<String, Value>,
    #[serde(default)]
    pub arena: ArenaConfig,
    #[serde(default)]
    pub graph: GraphThresholds,
    #[serde(default)]
    pub rnd: RndConfig,
}

/// A parsed configuration with its SAC settings resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub family: Family,
    pub sac: SacConfig,
}

impl Resolved {
    pub fn trainer_config(&self) -> TrainerConfig {
        let c = &self.config;
        TrainerConfig {
            switch_period: c.switch_period,
            eval_every: c.eval_every,
            eval_episodes: c.eval_episodes,
            eval_horizon: c.eval_horizon,
            rnd: c.rnd.clone(),
            ..TrainerConfig::default()
        }
    }

    pub fn build(&self) -> Result<Trainer<ManipEnv>, CliError> {
        let c = &self.config;
        let domain = make_domain(&c.domain, c.arena.clone(), c.seed)?;
        Ok(build_trainer(domain, c.algorithm, &self.sac, self.trainer_config(), c.graph.clone(), c.seed)?)
    }

    /// The configuration written into checkpoints: the SAC section holds every
    /// resolved value, so the echo stands alone.
    pub fn echo(&self) -> String {
        let mut c = self.config.clone();
        c.sac = match serde_json::to_value(&self.sac) {
            Ok(Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        serde_json::to_string_pretty(&c).expect("configuration serialises")
    }
}

fn invalid(origin: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("invalid config {origin}: {msg}"))
}

/// Parses and validates configuration text. Syntax and schema errors carry
/// the line and column of the offending token.
pub fn parse(text: &str, origin: &str) -> Result<Resolved, CliError> {
    let config: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Invalid(format!("invalid config {origin}:{}:{}: {e}", e.line(), e.column())))?;
    resolve(config, origin)
}

pub fn load(path: &Path) -> Result<Resolved, CliError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| invalid(&origin, e))?;
    parse(&text, &origin)
}

pub fn resolve(config: ExperimentConfig, origin: &str) -> Result<Resolved, CliError> {
    let family: Family = config.domain.parse().map_err(|e| invalid(origin, e))?;
    let mut sac_value = serde_json::to_value(config.profile.sac()).expect("profile serialises");
    if let Value::Object(base) = &mut sac_value {
        for (k, v) in &config.sac {
            base.insert(k.clone(), v.clone());
        }
    }
    let sac: SacConfig = serde_json::from_value(sac_value).map_err(|e| invalid(origin, format!("in \"sac\": {e}")))?;
    sac.validate().map_err(|e| invalid(origin, e))?;
    config.arena.validate().map_err(|e| invalid(origin, e))?;
    config.graph.validate().map_err(|e| invalid(origin, e))?;
    let resolved = Resolved { config, family, sac };
    resolved.trainer_config().validate().map_err(|e| invalid(origin, e))?;
    let c = &resolved.config;
    if !c.budget.is_multiple_of(c.switch_period as u64) {
        return Err(invalid(
            origin,
            format!("budget {} is not a multiple of switch_period {}", c.budget, c.switch_period),
        ));
    }
    if !c.checkpoint_every.is_multiple_of(c.switch_period as u64) {
        return Err(invalid(origin, "checkpoint_every must be a multiple of switch_period"));
    }
    Ok(resolved)
}
