//! Monte Carlo check of the path-composition bound: if each edge of a
//! k-edge path succeeds with probability 1 - e_i, the path succeeds with
//! probability prod(1 - e_i) >= 1 - k max e_i.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ControllerKey, HierarchicalPolicy, SubState, Transition};
use crate::error::{Error, Result};
use crate::topo_graph::{NodeId, TopoMap};
use crate::world::{Action, Cell, GridWorld};

/// Allowed gap between the empirical path success and the edge product.
pub const EMPIRICAL_TOLERANCE: f64 = 0.05;

/// Low-level behavior used to traverse one edge.
pub trait EdgePolicy {
    fn act(&self, world: &GridWorld, s: Cell, target: NodeId, target_cell: Cell) -> Action;
}

impl<F: Fn(Cell, Cell) -> Action> EdgePolicy for F {
    fn act(&self, _world: &GridWorld, s: Cell, _target: NodeId, target_cell: Cell) -> Action {
        self(s, target_cell)
    }
}

/// Greedy action of the target node's sub-controller.
impl EdgePolicy for HierarchicalPolicy {
    fn act(&self, _world: &GridWorld, s: Cell, target: NodeId, _target_cell: Cell) -> Action {
        self.greedy_action(ControllerKey::Node(target), &SubState::Cell(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub a: NodeId,
    pub b: NodeId,
    pub success: f64,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub edges: Vec<EdgeEstimate>,
    pub k: usize,
    pub max_failure: f64,
    pub product: f64,
    pub bound: f64,
    pub empirical: f64,
    pub path_trials: u32,
    pub product_ge_bound: bool,
    pub within_tolerance: bool,
    pub satisfied: bool,
}

fn node_cell(map: &TopoMap, id: NodeId) -> Result<Cell> {
    Ok(Cell::from_position(map.node(id)?.position))
}

fn traverse<P: EdgePolicy + ?Sized, R: Rng + ?Sized>(
    world: &GridWorld,
    policy: &P,
    from: Cell,
    target: NodeId,
    to: Cell,
    max_steps: u32,
    rng: &mut R,
) -> Result<bool> {
    let mut s = from;
    for _ in 0..max_steps {
        if s == to {
            return Ok(true);
        }
        s = world.step(s, policy.act(world, s, target, to), rng)?.next_state;
    }
    Ok(s == to)
}

/// Fraction of `trials` in which `policy`, started on node `a`, reaches
/// node `b` within `max_steps` steps.
pub fn estimate_edge_success<P: EdgePolicy + ?Sized, R: Rng + ?Sized>(
    world: &GridWorld,
    map: &TopoMap,
    policy: &P,
    edge: (NodeId, NodeId),
    trials: u32,
    max_steps: u32,
    rng: &mut R,
) -> Result<EdgeEstimate> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be >= 1".into()));
    }
    let (a, b) = edge;
    let (from, to) = (node_cell(map, a)?, node_cell(map, b)?);
    let mut ok = 0u32;
    for _ in 0..trials {
        if traverse(world, policy, from, b, to, max_steps, rng)? {
            ok += 1;
        }
    }
    Ok(EdgeEstimate {
        a,
        b,
        success: f64::from(ok) / f64::from(trials),
        trials,
    })
}

/// Fraction of trials that traverse every edge of `path` in order, each
/// edge under its own `max_steps` budget.
pub fn estimate_path_success<P: EdgePolicy + ?Sized, R: Rng + ?Sized>(
    world: &GridWorld,
    map: &TopoMap,
    policy: &P,
    path: &[NodeId],
    trials: u32,
    max_steps: u32,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be >= 1".into()));
    }
    if path.len() < 2 {
        return Err(Error::Invalid("path needs at least two nodes".into()));
    }
    let cells: Vec<Cell> = path.iter().map(|n| node_cell(map, *n)).collect::<Result<_>>()?;
    let mut ok = 0u32;
    'trial: for _ in 0..trials {
        for i in 1..path.len() {
            if !traverse(world, policy, cells[i - 1], path[i], cells[i], max_steps, rng)? {
                continue 'trial;
            }
        }
        ok += 1;
    }
    Ok(f64::from(ok) / f64::from(trials))
}

/// Combines per-edge estimates with an empirical path success figure.
pub fn check_reachability_bound(edges: &[EdgeEstimate], empirical: f64, path_trials: u32) -> ReachabilityReport {
    let k = edges.len();
    let max_failure = edges.iter().map(|e| 1.0 - e.success).fold(0.0, f64::max);
    let product: f64 = edges.iter().map(|e| e.success).product();
    let bound = 1.0 - k as f64 * max_failure;
    // prod(1 - x_i) >= 1 - sum x_i >= 1 - k max x_i; slack for rounding
    let product_ge_bound = product >= bound - 1e-12;
    assert!(product_ge_bound, "product {product} below bound {bound}");
    let within_tolerance = (empirical - product).abs() <= EMPIRICAL_TOLERANCE;
    ReachabilityReport {
        edges: edges.to_vec(),
        k,
        max_failure,
        product,
        bound,
        empirical,
        path_trials,
        product_ge_bound,
        within_tolerance,
        satisfied: product_ge_bound && within_tolerance,
    }
}

/// Settings for [`train_edge_controller`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTraining {
    pub episodes: u32,
    pub epsilon: f64,
    pub max_steps: u32,
    pub step_cost: f64,
    pub arrival_reward: f64,
}

impl Default for EdgeTraining {
    fn default() -> Self {
        Self {
            episodes: 3000,
            epsilon: 0.2,
            max_steps: 100,
            step_cost: -1.0,
            arrival_reward: 10.0,
        }
    }
}

/// Q-learning for the sub-controller of node `target`, with exploring
/// starts drawn uniformly from the free cells that can reach it.
pub fn train_edge_controller<R: Rng + ?Sized>(
    world: &GridWorld,
    map: &TopoMap,
    policy: &mut HierarchicalPolicy,
    target: NodeId,
    params: &EdgeTraining,
    rng: &mut R,
) -> Result<()> {
    let goal = node_cell(map, target)?;
    if !world.is_free(goal) {
        return Err(Error::BlockedCell { x: goal.x, y: goal.y });
    }
    let dist = world.bfs_distances(goal);
    let starts: Vec<Cell> = world
        .cells()
        .filter(|c| *c != goal && GridWorld::distance_at(&dist, world, *c).is_some())
        .collect();
    if starts.is_empty() {
        return Ok(());
    }
    let key = ControllerKey::Node(target);
    for _ in 0..params.episodes {
        let mut s = starts[rng.gen_range(0..starts.len())];
        for _ in 0..params.max_steps {
            let st = SubState::Cell(s);
            let a = policy.choose_action(key, &st, params.epsilon, rng);
            let s2 = world.step(s, a, rng)?.next_state;
            let done = s2 == goal;
            let r = params.step_cost + if done { params.arrival_reward } else { 0.0 };
            policy.learn_sub(key, Transition::new(st, a.index(), r, SubState::Cell(s2), done), rng);
            s = s2;
            if done {
                break;
            }
        }
    }
    Ok(())
}
