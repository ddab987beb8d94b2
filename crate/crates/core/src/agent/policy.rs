//! Two-level policy: a meta Q-function over (cell, map node) and a family
//! of sub-controller Q-functions over (state, primitive action).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::qfunction::{QFunction, Transition};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::topo_graph::{NodeId, TopoMap};
use crate::world::{Action, Cell};

/// Which sub-controller table a subgoal is pursued with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKey {
    /// The global goal.
    Global,
    Node(NodeId),
    /// Shared controller for synthesized (virtual) subgoals.
    Pursuit,
}

impl fmt::Display for ControllerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerKey::Global => f.write_str("global"),
            ControllerKey::Node(n) => write!(f, "node:{n}"),
            ControllerKey::Pursuit => f.write_str("pursuit"),
        }
    }
}

impl FromStr for ControllerKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(ControllerKey::Global),
            "pursuit" => Ok(ControllerKey::Pursuit),
            other => other
                .strip_prefix("node:")
                .and_then(|n| n.parse().ok())
                .map(ControllerKey::Node)
                .ok_or_else(|| Error::Invalid(format!("bad controller key `{other}`"))),
        }
    }
}

/// Sub-controller state. Cell-keyed tables serve fixed targets; the
/// pursuit controller sees only the sign of the offset to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubState {
    Cell(Cell),
    Relative { dx: i8, dy: i8 },
}

impl SubState {
    pub fn relative(s: Cell, target: Cell) -> Self {
        SubState::Relative {
            dx: (target.x - s.x).signum() as i8,
            dy: (target.y - s.y).signum() as i8,
        }
    }
}

/// Linear epsilon decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubController {
    pub q: QFunction<SubState>,
    pub buffer: ReplayBuffer<Transition<SubState>>,
}

/// A meta-level option: head for the global goal or for a map node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaChoice {
    Goal,
    Node(NodeId),
}

/// Meta-level values: `q` holds Q(cell, node), `goal` holds Q(cell, goal)
/// under choice 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaController {
    pub q: QFunction<Cell>,
    pub goal: QFunction<Cell>,
    pub buffer: ReplayBuffer<Transition<Cell, MetaChoice>>,
}

impl MetaController {
    fn new(p: LearningParams) -> Self {
        Self {
            q: QFunction::new(p.learning_rate, p.discount),
            goal: QFunction::new(p.learning_rate, p.discount),
            buffer: ReplayBuffer::new(p.buffer_capacity),
        }
    }

    pub fn value(&self, s: &Cell, c: MetaChoice) -> f64 {
        match c {
            MetaChoice::Goal => self.goal.value(s, 0),
            MetaChoice::Node(n) => self.q.value(s, n),
        }
    }

    fn best_value(&self, s: &Cell, n_nodes: usize) -> f64 {
        let g = self.goal.value(s, 0);
        if n_nodes == 0 {
            g
        } else {
            g.max(self.q.max_value(s, n_nodes))
        }
    }

    /// Semi-Markov Q-learning over goal and node options in batch order.
    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = &'a Transition<Cell, MetaChoice>>, n_nodes: usize) {
        for tr in batch {
            let target = if tr.terminal {
                tr.r
            } else {
                tr.r + self.q.discount().powi(tr.steps as i32) * self.best_value(&tr.s_next, n_nodes)
            };
            let (table, idx) = match tr.choice {
                MetaChoice::Goal => (&mut self.goal, 0),
                MetaChoice::Node(n) => (&mut self.q, n),
            };
            let v = table.value(&tr.s, idx);
            table.set(tr.s, idx, v + table.learning_rate() * (target - v));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalPolicy {
    meta: Option<MetaController>,
    subs: BTreeMap<ControllerKey, SubController>,
    params: LearningParams,
}

/// Uniformly random node with probability `epsilon`, otherwise the greedy
/// node (lowest id on ties).
pub fn select_subgoal<R: Rng + ?Sized>(
    q_meta: &QFunction<Cell>,
    s: Cell,
    map: &TopoMap,
    epsilon: f64,
    rng: &mut R,
) -> Result<NodeId> {
    if map.is_empty() {
        return Err(Error::EmptyMap);
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..map.len()));
    }
    Ok(q_meta.greedy(&s, map.node_ids()).expect("map is nonempty"))
}

/// Epsilon-greedy over the four primitive actions; ties resolve N < E < S < W.
pub fn select_action<R: Rng + ?Sized>(
    q_sub: &QFunction<SubState>,
    s: &SubState,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Action::ALL[rng.gen_range(0..4)];
    }
    let i = q_sub.greedy(s, 0..4).expect("four actions");
    Action::ALL[i]
}

impl HierarchicalPolicy {
    pub fn new(params: LearningParams, with_meta: bool) -> Self {
        Self {
            meta: with_meta.then(|| MetaController::new(params)),
            subs: BTreeMap::new(),
            params,
        }
    }

    pub fn params(&self) -> LearningParams {
        self.params
    }

    pub fn meta(&self) -> Option<&MetaController> {
        self.meta.as_ref()
    }

    pub fn has_meta(&self) -> bool {
        self.meta.is_some()
    }

    pub fn controller(&self, key: ControllerKey) -> Option<&SubController> {
        self.subs.get(&key)
    }

    pub fn controllers(&self) -> impl Iterator<Item = (&ControllerKey, &SubController)> {
        self.subs.iter()
    }

    /// Sub-controller for `key`, created on first use.
    pub fn controller_mut(&mut self, key: ControllerKey) -> &mut SubController {
        let p = self.params;
        self.subs.entry(key).or_insert_with(|| SubController {
            q: QFunction::new(p.learning_rate, p.discount),
            buffer: ReplayBuffer::new(p.buffer_capacity),
        })
    }

    pub fn choose_action<R: Rng + ?Sized>(
        &self,
        key: ControllerKey,
        s: &SubState,
        epsilon: f64,
        rng: &mut R,
    ) -> Action {
        match self.subs.get(&key) {
            Some(c) => select_action(&c.q, s, epsilon, rng),
            None => {
                if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                    Action::ALL[rng.gen_range(0..4)]
                } else {
                    Action::N
                }
            }
        }
    }

    pub fn greedy_action(&self, key: ControllerKey, s: &SubState) -> Action {
        self.subs
            .get(&key)
            .and_then(|c| c.q.greedy(s, 0..4))
            .map_or(Action::N, |i| Action::ALL[i])
    }

    /// Epsilon-greedy meta choice over the goal and every map node. The
    /// goal wins ties with the best node.
    pub fn choose_subgoal<R: Rng + ?Sized>(
        &self,
        s: Cell,
        map: &TopoMap,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<MetaChoice> {
        let meta = self
            .meta
            .as_ref()
            .ok_or_else(|| Error::Invalid("policy has no meta-controller".into()))?;
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            let i = rng.gen_range(0..=map.len());
            return Ok(if i == map.len() { MetaChoice::Goal } else { MetaChoice::Node(i) });
        }
        if map.is_empty() {
            return Ok(MetaChoice::Goal);
        }
        let node = select_subgoal(&meta.q, s, map, 0.0, rng)?;
        if meta.goal.value(&s, 0) >= meta.q.value(&s, node) {
            Ok(MetaChoice::Goal)
        } else {
            Ok(MetaChoice::Node(node))
        }
    }

    /// Stores `tr` and replays a batch made of it plus uniformly drawn
    /// older transitions.
    pub fn learn_sub<R: Rng + ?Sized>(&mut self, key: ControllerKey, tr: Transition<SubState>, rng: &mut R) {
        let batch_size = self.params.batch_size;
        let c = self.controller_mut(key);
        c.buffer.push(tr.clone());
        let SubController { q, buffer } = c;
        q.update(std::iter::once(&tr).chain(buffer.sample(batch_size.saturating_sub(1), rng)), 4);
    }

    pub fn learn_meta<R: Rng + ?Sized>(&mut self, tr: Transition<Cell, MetaChoice>, n_nodes: usize, rng: &mut R) {
        let batch_size = self.params.batch_size;
        if let Some(meta) = self.meta.as_mut() {
            meta.buffer.push(tr.clone());
            let batch: Vec<Transition<Cell, MetaChoice>> = std::iter::once(tr)
                .chain(meta.buffer.sample(batch_size.saturating_sub(1), rng).into_iter().cloned())
                .collect();
            meta.update(&batch, n_nodes);
        }
    }

    /// Largest |Q| across every table.
    pub fn max_abs_value(&self) -> f64 {
        let sub = self.subs.values().map(|c| c.q.max_abs()).fold(0.0, f64::max);
        let meta = self.meta.as_ref().map_or(0.0, |m| m.q.max_abs().max(m.goal.max_abs()));
        sub.max(meta)
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        let meta = self.meta.as_ref().map(|m| {
            let goal = m.goal.entries().map(|(s, _, value)| MetaEntry {
                state: *s,
                choice: MetaChoice::Goal,
                value,
            });
            let mut v: Vec<MetaEntry> = m
                .q
                .entries()
                .map(|(s, c, value)| MetaEntry {
                    state: *s,
                    choice: MetaChoice::Node(c),
                    value,
                })
                .chain(goal)
                .collect();
            v.sort_by_key(|e| (e.state, e.choice));
            v
        });
        let sub = self
            .subs
            .iter()
            .map(|(k, c)| {
                let mut v: Vec<SubEntry> = c
                    .q
                    .entries()
                    .map(|(s, a, value)| SubEntry {
                        state: *s,
                        choice: Action::from_index(a).expect("four actions"),
                        value,
                    })
                    .collect();
                v.sort_by_key(|e| (e.state, e.choice));
                (k.to_string(), v)
            })
            .collect();
        PolicySnapshot { meta, sub }
    }

    /// Rebuilds a policy from a snapshot. Replay buffers start empty.
    pub fn from_snapshot(snap: &PolicySnapshot, params: LearningParams) -> Result<Self> {
        let mut policy = HierarchicalPolicy::new(params, snap.meta.is_some());
        if let (Some(entries), Some(meta)) = (&snap.meta, policy.meta.as_mut()) {
            for e in entries {
                match e.choice {
                    MetaChoice::Goal => meta.goal.set(e.state, 0, e.value),
                    MetaChoice::Node(n) => meta.q.set(e.state, n, e.value),
                }
            }
        }
        for (k, entries) in &snap.sub {
            let key: ControllerKey = k.parse()?;
            let c = policy.controller_mut(key);
            for e in entries {
                c.q.set(e.state, e.choice.index(), e.value);
            }
        }
        Ok(policy)
    }
}

/// Export form of a trained policy: level -> table entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySnapshot {
    pub meta: Option<Vec<MetaEntry>>,
    pub sub: BTreeMap<String, Vec<SubEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEntry {
    pub state: Cell,
    pub choice: MetaChoice,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubEntry {
    pub state: SubState,
    pub choice: Action,
    pub value: f64,
}

impl PolicySnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
