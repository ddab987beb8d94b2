//! Landmark scoring and subgoal choice.

use serde::{Deserialize, Serialize};

use crate::topo_graph::Position;

/// A detectable world feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    pub position: Position,
    pub feature: Vec<f64>,
    #[serde(default)]
    pub visits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub lambda_decay: f64,
    pub w_n: f64,
    pub w_gd: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            lambda_decay: 0.5,
            w_n: 0.4,
            w_gd: 0.6,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.lambda_decay > 0.0) {
            return Err(("lambda_decay", "must be > 0".into()));
        }
        if !(self.w_n >= 0.0) {
            return Err(("w_n", "must be >= 0".into()));
        }
        if !(self.w_gd >= 0.0) {
            return Err(("w_gd", "must be >= 0".into()));
        }
        if !(self.w_n + self.w_gd > 0.0) {
            return Err(("w_gd", "w_n + w_gd must be > 0".into()));
        }
        Ok(())
    }
}

/// Novelty factor `exp(-lambda * visits)`.
pub fn novelty(visits: u32, lambda_decay: f64) -> f64 {
    (-lambda_decay * f64::from(visits)).exp()
}

/// Cosine between the robot->landmark and robot->goal directions; 0 when
/// either direction has zero length.
pub fn goal_directedness(robot: Position, landmark: Position, goal: Position) -> f64 {
    let vl = [landmark[0] - robot[0], landmark[1] - robot[1]];
    let vg = [goal[0] - robot[0], goal[1] - robot[1]];
    let nl = vl[0].hypot(vl[1]);
    let ng = vg[0].hypot(vg[1]);
    if nl == 0.0 || ng == 0.0 {
        return 0.0;
    }
    ((vl[0] * vg[0] + vl[1] * vg[1]) / (nl * ng)).clamp(-1.0, 1.0)
}

pub fn score(l: &Landmark, robot: Position, goal: Position, cfg: &SelectionConfig) -> f64 {
    cfg.w_n * novelty(l.visits, cfg.lambda_decay)
        + cfg.w_gd * goal_directedness(robot, l.position, goal)
}

/// Highest-scoring landmark; the lowest id wins ties.
pub fn select_landmark<'a>(
    detected: &'a [Landmark],
    robot: Position,
    goal: Position,
    cfg: &SelectionConfig,
) -> Option<&'a Landmark> {
    let mut best: Option<(&Landmark, f64)> = None;
    for l in detected {
        let s = score(l, robot, goal, cfg);
        best = match best {
            None => Some((l, s)),
            Some((b, bs)) if s > bs || (s == bs && l.id < b.id) => Some((l, s)),
            keep => keep,
        };
    }
    best.map(|(l, _)| l)
}
