//! Run configuration: one TOML file covering scenario, episode rules,
//! avoidance parameters, network shape, training, and evaluation.
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::astg::AstgConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::orca::OrcaParams;
use crate::sim::{EpisodeConfig, ScenarioKind, ScenarioSpec};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every random stream in a run derives from it.
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub episode: EpisodeConfig,
    pub orca: OrcaParams,
    pub network: AstgConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            scenario: default_scenario(),
            episode: EpisodeConfig::default(),
            orca: OrcaParams::default(),
            network: AstgConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Five crossing humans plus two static bystanders, the standard
/// training environment.
fn default_scenario() -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::ScatteredStatic,
        n_dynamic: 5,
        n_static: 2,
        ..ScenarioSpec::default()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        if self.eval.cases == 0 {
            return Err(Error::Config("eval.cases must be positive".into()));
        }
        if self.network.history_len == 0 {
            return Err(Error::Config("network.history_len must be positive".into()));
        }
        if self.episode.dt <= 0.0 || self.episode.time_limit <= 0.0 {
            return Err(Error::Config(
                "episode.dt and episode.time_limit must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Full serialization, defaults included, for echoing the resolved
    /// configuration next to run outputs.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}
