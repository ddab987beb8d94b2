//! Two-level tabular Q-learning agent.
//!
//! The meta-controller picks map nodes as subgoals; sub-controllers emit
//! primitive moves toward the current subgoal. Each level keeps its own
//! replay buffer.

mod episode;
mod policy;
mod qfunction;
mod replay;

use serde::{Deserialize, Serialize};

pub use episode::{synthesize_virtual, Agent, EpisodeResult, StepTrace, Subgoal};
pub use policy::{
    select_action, select_subgoal, ControllerKey, EpsilonSchedule, HierarchicalPolicy, LearningParams,
    MetaChoice, MetaController, MetaEntry, PolicySnapshot, SubController, SubEntry, SubState,
};
pub use qfunction::{q_update, QFunction, Transition};
pub use replay::ReplayBuffer;

/// Which parts of the full system are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    /// Subgoal is always the global goal; the map is still built and logged.
    NoTopoMap,
    /// One flat Q-learner on primitive actions, no meta-controller.
    NoHierarchy,
    /// Full system with the intrinsic mixing weight forced to zero.
    NoIntrinsic,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Full,
        AblationMode::NoTopoMap,
        AblationMode::NoHierarchy,
        AblationMode::NoIntrinsic,
    ];

    pub fn uses_subgoals(self) -> bool {
        matches!(self, AblationMode::Full | AblationMode::NoIntrinsic)
    }

    pub fn has_meta(self) -> bool {
        self != AblationMode::NoHierarchy
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoTopoMap => "no_topo_map",
            AblationMode::NoHierarchy => "no_hierarchy",
            AblationMode::NoIntrinsic => "no_intrinsic",
        }
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AblationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown ablation `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    /// Subgoal synthesis distance, in cells.
    pub d_thresh: f64,
    pub max_steps_episode: u32,
    pub max_steps_subgoal: u32,
    pub batch_size: usize,
    pub discount: f64,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    /// Train the meta-controller on extrinsic reward only.
    pub meta_extrinsic_only: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 20_000,
            d_thresh: 5.0,
            max_steps_episode: 400,
            max_steps_subgoal: 50,
            batch_size: 32,
            discount: 0.95,
            learning_rate: 0.1,
            buffer_capacity: 10_000,
            meta_extrinsic_only: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return Err(("epsilon_start", "must be in [0, 1]".into()));
        }
        if !(self.epsilon_end >= 0.0 && self.epsilon_end <= self.epsilon_start) {
            return Err(("epsilon_end", "must satisfy 0 <= epsilon_end <= epsilon_start".into()));
        }
        if !(self.d_thresh > 0.0) {
            return Err(("d_thresh", "must be > 0".into()));
        }
        if self.max_steps_episode == 0 {
            return Err(("max_steps_episode", "must be >= 1".into()));
        }
        if self.max_steps_subgoal == 0 {
            return Err(("max_steps_subgoal", "must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(("batch_size", "must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(("discount", "must be in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(("learning_rate", "must be in (0, 1]".into()));
        }
        if self.buffer_capacity == 0 {
            return Err(("buffer_capacity", "must be >= 1".into()));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }

    pub fn learning(&self) -> LearningParams {
        LearningParams {
            learning_rate: self.learning_rate,
            discount: self.discount,
            buffer_capacity: self.buffer_capacity,
            batch_size: self.batch_size,
        }
    }
}
