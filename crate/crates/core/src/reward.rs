//! Composite reward: sparse extrinsic terms, five intrinsic terms and four
//! penalties mixed by `alpha`, `beta` and `gamma_pen`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topo_graph::descriptor_similarity;
use crate::world::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_pen: f64,
    pub r_goal: f64,
    pub r_milestone: f64,
    pub r_obstacle: f64,
    pub lambda_fe: f64,
    pub lambda_ep: f64,
    pub lambda_ue: f64,
    pub lambda_p: f64,
    pub lambda_sd: f64,
    pub lambda_te: f64,
    pub r_sg_bonus: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.3,
            gamma_pen: 0.3,
            r_goal: 100.0,
            r_milestone: 10.0,
            r_obstacle: -1.0,
            lambda_fe: 1.0,
            lambda_ep: 1.0,
            lambda_ue: 1.0,
            lambda_p: 0.1,
            lambda_sd: 0.5,
            lambda_te: 0.01,
            r_sg_bonus: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.r_goal > 0.0) {
            return Err(("r_goal", "must be > 0".into()));
        }
        if !(self.r_milestone > 0.0) {
            return Err(("r_milestone", "must be > 0".into()));
        }
        if !(self.r_obstacle < 0.0) {
            return Err(("r_obstacle", "must be < 0".into()));
        }
        let lambdas = [
            ("lambda_fe", self.lambda_fe),
            ("lambda_ep", self.lambda_ep),
            ("lambda_ue", self.lambda_ue),
            ("lambda_p", self.lambda_p),
            ("lambda_sd", self.lambda_sd),
            ("lambda_te", self.lambda_te),
            ("r_sg_bonus", self.r_sg_bonus),
        ];
        for (k, v) in lambdas {
            if !(v >= 0.0) {
                return Err((k, "must be >= 0".into()));
            }
        }
        for (k, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma_pen", self.gamma_pen)] {
            if !v.is_finite() {
                return Err((k, "must be finite".into()));
            }
        }
        Ok(())
    }

    /// Upper bound on |total reward| for a single step of an episode capped
    /// at `max_steps` steps.
    pub fn max_step_magnitude(&self, max_steps: u32) -> f64 {
        let steps = f64::from(max_steps);
        let ex = self.r_goal.max(self.r_milestone);
        let intr = 1.0 + self.r_sg_bonus + self.lambda_fe + self.lambda_ep + self.lambda_ue;
        let pen = self.lambda_p * steps.sqrt() + self.lambda_sd + self.lambda_te * steps - self.r_obstacle;
        self.alpha.abs() * ex + self.beta.abs() * intr + self.gamma_pen.abs() * pen
    }
}

/// Per-episode counters feeding the intrinsic and penalty terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplorationState {
    pub state_visits: HashMap<Cell, u32>,
    pub subgoal_history: Vec<Vec<f64>>,
    pub t_last_exp: u32,
    pub explored_area: u32,
    pub total_area: u32,
    /// Explored-area increase on the latest step.
    pub area_delta: u32,
    pub frontier_new: u32,
    pub node_total: u32,
}

impl ExplorationState {
    pub fn new(total_area: u32) -> Self {
        Self {
            total_area,
            ..Self::default()
        }
    }

    pub fn visits(&self, s: Cell) -> u32 {
        self.state_visits.get(&s).copied().unwrap_or(0)
    }

    /// Counts an arrival at `s` and updates the area tally. Returns N(s)
    /// after the increment.
    pub fn arrive(&mut self, s: Cell) -> u32 {
        let n = self.state_visits.entry(s).or_insert(0);
        *n += 1;
        if *n == 1 {
            self.explored_area = (self.explored_area + 1).min(self.total_area);
            self.area_delta = 1;
        } else {
            self.area_delta = 0;
        }
        *n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEvents {
    pub reached_goal: bool,
    pub reached_milestone: bool,
    pub new_subgoal_discovered: bool,
    pub hit_obstacle: bool,
    pub uncertainty: f64,
}

/// Count-based uncertainty `1 / (1 + N(s))`.
pub fn count_uncertainty(visits: u32) -> f64 {
    1.0 / (1.0 + f64::from(visits))
}

pub fn extrinsic_reward(events: &StepEvents, cfg: &RewardConfig) -> f64 {
    if events.reached_goal {
        cfg.r_goal
    } else if events.reached_milestone {
        cfg.r_milestone
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntrinsicTerms {
    pub r_in: f64,
    pub r_sg: f64,
    pub r_fe: f64,
    pub r_ep: f64,
    pub r_ue: f64,
}

impl IntrinsicTerms {
    pub fn sum(&self) -> f64 {
        self.r_in + self.r_sg + self.r_fe + self.r_ep + self.r_ue
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenaltyTerms {
    pub r_p: f64,
    pub r_sd: f64,
    pub r_te: f64,
    pub r_ob: f64,
}

impl PenaltyTerms {
    pub fn sum(&self) -> f64 {
        self.r_p + self.r_sd + self.r_te + self.r_ob
    }
}

fn arrived_visits(state: Cell, expl: &ExplorationState) -> Result<f64> {
    match expl.visits(state) {
        0 => Err(Error::Invalid(format!("state {state} has not been counted on arrival"))),
        n => Ok(f64::from(n)),
    }
}

pub fn intrinsic_reward(
    state: Cell,
    events: &StepEvents,
    expl: &ExplorationState,
    cfg: &RewardConfig,
) -> Result<IntrinsicTerms> {
    let n = arrived_visits(state, expl)?;
    if expl.node_total == 0 && expl.frontier_new > 0 {
        return Err(Error::EmptyMapFrontier {
            frontier_new: expl.frontier_new,
        });
    }
    let r_fe = if expl.node_total == 0 {
        0.0
    } else {
        cfg.lambda_fe * f64::from(expl.frontier_new) / f64::from(expl.node_total)
    };
    let r_ep = if expl.total_area == 0 {
        0.0
    } else {
        cfg.lambda_ep * f64::from(expl.area_delta) / f64::from(expl.total_area)
    };
    Ok(IntrinsicTerms {
        r_in: 1.0 / n.sqrt(),
        r_sg: if events.new_subgoal_discovered { cfg.r_sg_bonus } else { 0.0 },
        r_fe,
        r_ep,
        r_ue: cfg.lambda_ue * events.uncertainty,
    })
}

pub fn penalty_reward(
    state: Cell,
    subgoal_feature: Option<&[f64]>,
    t: u32,
    events: &StepEvents,
    expl: &ExplorationState,
    cfg: &RewardConfig,
) -> Result<PenaltyTerms> {
    let n = arrived_visits(state, expl)?;
    if t < expl.t_last_exp {
        return Err(Error::Invalid(format!(
            "timestep {t} precedes last exploration step {}",
            expl.t_last_exp
        )));
    }
    let mut max_sim = 0.0f64;
    if let Some(f) = subgoal_feature {
        for h in &expl.subgoal_history {
            max_sim = max_sim.max(descriptor_similarity(f, h)?);
        }
    }
    Ok(PenaltyTerms {
        r_p: -cfg.lambda_p * (n - 1.0) / n.sqrt(),
        r_sd: -cfg.lambda_sd * max_sim,
        r_te: -cfg.lambda_te * f64::from(t - expl.t_last_exp),
        r_ob: if events.hit_obstacle { cfg.r_obstacle } else { 0.0 },
    })
}

/// Itemized reward of one step, in the flat layout used by episode logs.
/// Each term is stored as its weighted contribution to `total`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_ex: f64,
    pub r_in: f64,
    pub r_sg: f64,
    pub r_fe: f64,
    pub r_ep: f64,
    pub r_ue: f64,
    pub r_p: f64,
    pub r_sd: f64,
    pub r_te: f64,
    pub r_ob: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn intrinsic(&self) -> f64 {
        self.r_in + self.r_sg + self.r_fe + self.r_ep + self.r_ue
    }

    pub fn penalty(&self) -> f64 {
        self.r_p + self.r_sd + self.r_te + self.r_ob
    }

    pub fn accumulate(&mut self, o: &RewardBreakdown) {
        self.r_ex += o.r_ex;
        self.r_in += o.r_in;
        self.r_sg += o.r_sg;
        self.r_fe += o.r_fe;
        self.r_ep += o.r_ep;
        self.r_ue += o.r_ue;
        self.r_p += o.r_p;
        self.r_sd += o.r_sd;
        self.r_te += o.r_te;
        self.r_ob += o.r_ob;
        self.total += o.total;
    }
}

/// `alpha * r_ex + beta * intrinsic + gamma_pen * penalty`, itemized.
pub fn total_reward(
    r_ex: f64,
    intrinsic: &IntrinsicTerms,
    penalty: &PenaltyTerms,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let (b, g) = (cfg.beta, cfg.gamma_pen);
    RewardBreakdown {
        r_ex: cfg.alpha * r_ex,
        r_in: b * intrinsic.r_in,
        r_sg: b * intrinsic.r_sg,
        r_fe: b * intrinsic.r_fe,
        r_ep: b * intrinsic.r_ep,
        r_ue: b * intrinsic.r_ue,
        r_p: g * penalty.r_p,
        r_sd: g * penalty.r_sd,
        r_te: g * penalty.r_te,
        r_ob: g * penalty.r_ob,
        total: cfg.alpha * r_ex + b * intrinsic.sum() + g * penalty.sum(),
    }
}
