use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agent::{AblationMode, AgentConfig};
use crate::error::ConfigError;
use crate::landmark::SelectionConfig;
use crate::reward::RewardConfig;
use crate::topo_graph::DEFAULT_TAU_SIM;
use crate::world::{ScenarioKind, ScenarioParams};

/// Everything a benchmark run needs. The TOML form is flat: every
/// sub-config key sits at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioKind,
    pub size: i32,
    pub seeds: Vec<u64>,
    /// Learning episodes per seed.
    pub train_episodes: u32,
    /// Greedy episodes per seed after training.
    pub eval_episodes: u32,
    pub ablation: AblationMode,
    pub tau_sim: f64,
    #[serde(flatten)]
    pub world: ScenarioParams,
    #[serde(flatten)]
    pub agent: AgentConfig,
    #[serde(flatten)]
    pub reward: RewardConfig,
    #[serde(flatten)]
    pub selection: SelectionConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::ComplexTerrain,
            size: 20,
            seeds: vec![0],
            train_episodes: 200,
            eval_episodes: 20,
            ablation: AblationMode::Full,
            tau_sim: DEFAULT_TAU_SIM,
            world: ScenarioParams::default(),
            agent: AgentConfig::default(),
            reward: RewardConfig::default(),
            selection: SelectionConfig::default(),
        }
    }
}

fn range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl BenchmarkConfig {
    /// Every key the document format accepts.
    pub fn known_keys() -> BTreeSet<String> {
        let t = toml::Table::try_from(BenchmarkConfig::default()).expect("default config serializes");
        t.keys().cloned().collect()
    }

    /// Parses a TOML document. Missing keys take their defaults.
    pub fn parse(doc: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = doc.parse().map_err(|e: toml::de::Error| parse_error(doc, &e))?;
        let known = Self::known_keys();
        if let Some(k) = table.keys().find(|k| !known.contains(*k)) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let cfg: BenchmarkConfig = toml::from_str(doc).map_err(|e| {
            // flattened sub-configs hide the key; retry each key alone
            let culprit = table.iter().find(|(k, v)| {
                let mut one = toml::Table::new();
                one.insert((*k).clone(), (*v).clone());
                one.try_into::<BenchmarkConfig>().is_err()
            });
            match culprit {
                Some((key, _)) => ConfigError::Type {
                    key: key.clone(),
                    message: e.message().to_string(),
                },
                None => parse_error(doc, &e),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.size < 10 {
            return Err(range("size", "must be >= 10"));
        }
        if self.seeds.is_empty() {
            return Err(range("seeds", "must be nonempty"));
        }
        if self.eval_episodes == 0 {
            return Err(range("eval_episodes", "must be >= 1"));
        }
        if !(self.tau_sim > 0.0 && self.tau_sim <= 1.0) {
            return Err(range("tau_sim", "must be in (0, 1]"));
        }
        let w = &self.world;
        if !(0.0..1.0).contains(&w.obstacle_density) {
            return Err(range("obstacle_density", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&w.landmark_density) {
            return Err(range("landmark_density", "must be in [0, 1]"));
        }
        if w.feature_dim == 0 {
            return Err(range("feature_dim", "must be >= 1"));
        }
        if !(w.detection_range > 0.0) {
            return Err(range("detection_range", "must be > 0"));
        }
        if !(0.0..1.0).contains(&w.slip_prob) {
            return Err(range("slip_prob", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&w.detection_miss_prob) {
            return Err(range("detection_miss_prob", "must be in [0, 1]"));
        }
        self.agent.validate().map_err(|(k, r)| range(k, r))?;
        self.reward.validate().map_err(|(k, r)| range(k, r))?;
        self.selection.validate().map_err(|(k, r)| range(k, r))?;
        Ok(())
    }
}

fn parse_error(doc: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &doc[..span.start.min(doc.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}
