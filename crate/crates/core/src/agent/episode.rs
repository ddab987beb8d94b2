//! The map-and-navigate loop.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{ControllerKey, HierarchicalPolicy, MetaChoice, PolicySnapshot, SubState};
use super::qfunction::Transition;
use super::{AblationMode, AgentConfig};
use crate::error::Result;
use crate::landmark::{select_landmark, Landmark, SelectionConfig};
use crate::reward::{
    count_uncertainty, extrinsic_reward, intrinsic_reward, penalty_reward, total_reward, ExplorationState,
    RewardBreakdown, RewardConfig, StepEvents,
};
use crate::topo_graph::{euclidean, NodeId, TopoMap};
use crate::world::{Action, Cell, GridWorld};

/// Current navigation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgoal {
    Global,
    Node(NodeId),
    /// Synthesized point along the robot->goal ray.
    Virtual(Cell),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u32,
    pub cell: Cell,
    /// Subgoal the action was chosen for.
    pub subgoal: Subgoal,
    /// Steps already spent on this pursuit before the action.
    pub pursuit_steps: u32,
    pub action: Action,
    pub next_cell: Cell,
    /// Subgoal in force once the step has been processed.
    pub subgoal_after: Subgoal,
    pub reward: f64,
}

/// Per-episode outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: u32,
    pub trajectory_length: u32,
    pub coverage: f64,
    pub reward: RewardBreakdown,
    pub map_nodes: usize,
    pub map_edges: usize,
    pub subgoals_reached: u32,
    pub overflows: u32,
    pub meta_selections: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<StepTrace>,
}

/// Meta-level bookkeeping for the option in force.
#[derive(Debug, Clone)]
struct OptionRun {
    choice: MetaChoice,
    start: Cell,
    steps: u32,
    reward: f64,
    weight: f64,
}

impl OptionRun {
    fn new(choice: MetaChoice, start: Cell) -> Self {
        Self {
            choice,
            start,
            steps: 0,
            reward: 0.0,
            weight: 1.0,
        }
    }

    fn accrue(&mut self, r: f64, discount: f64) {
        self.reward += self.weight * r;
        self.weight *= discount;
        self.steps += 1;
    }
}

/// Point at distance `d_thresh` along the ray from `s` toward `goal`,
/// pulled back toward the robot until it lands on a free cell. `None` when
/// the goal is within `d_thresh` or no free cell lies on the ray.
pub fn synthesize_virtual(world: &GridWorld, s: Cell, goal: Cell, d_thresh: f64) -> Option<Cell> {
    let dx = f64::from(goal.x - s.x);
    let dy = f64::from(goal.y - s.y);
    let len = dx.hypot(dy);
    if len <= d_thresh {
        return None;
    }
    let mut dist = d_thresh;
    while dist >= 1.0 {
        let c = Cell::from_position([f64::from(s.x) + dist * dx / len, f64::from(s.y) + dist * dy / len]);
        if c != s && world.is_free(c) {
            return Some(c);
        }
        dist -= 1.0;
    }
    None
}

/// Agent state that persists across episodes: policy tables, the
/// topological map and the landmark registry.
#[derive(Debug, Clone)]
pub struct Agent {
    mode: AblationMode,
    cfg: AgentConfig,
    reward: RewardConfig,
    selection: SelectionConfig,
    policy: HierarchicalPolicy,
    map: TopoMap,
    landmark_nodes: HashMap<usize, NodeId>,
    node_cells: HashMap<Cell, NodeId>,
    node_cell: Vec<Cell>,
    total_steps: u64,
    trace: bool,
}

impl Agent {
    pub fn new(
        mode: AblationMode,
        cfg: AgentConfig,
        reward: RewardConfig,
        selection: SelectionConfig,
        map: TopoMap,
    ) -> Self {
        let reward = if mode == AblationMode::NoIntrinsic {
            RewardConfig { beta: 0.0, ..reward }
        } else {
            reward
        };
        let node_cell: Vec<Cell> = map.nodes().iter().map(|n| Cell::from_position(n.position)).collect();
        let node_cells = node_cell.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Self {
            mode,
            cfg,
            reward,
            selection,
            policy: HierarchicalPolicy::new(cfg.learning(), mode.has_meta()),
            map,
            landmark_nodes: HashMap::new(),
            node_cells,
            node_cell,
            total_steps: 0,
            trace: false,
        }
    }

    pub fn mode(&self) -> AblationMode {
        self.mode
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    /// Reward weights in effect (intrinsic weight zeroed for `no_intrinsic`).
    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn policy(&self) -> &HierarchicalPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut HierarchicalPolicy {
        &mut self.policy
    }

    pub fn map(&self) -> &TopoMap {
        &self.map
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn set_trace(&mut self, on: bool) {
        self.trace = on;
    }

    pub fn load_snapshot(&mut self, snap: &PolicySnapshot) -> Result<()> {
        self.policy = HierarchicalPolicy::from_snapshot(snap, self.cfg.learning())?;
        if !self.mode.has_meta() && self.policy.has_meta() {
            let mut stripped = snap.clone();
            stripped.meta = None;
            self.policy = HierarchicalPolicy::from_snapshot(&stripped, self.cfg.learning())?;
        }
        Ok(())
    }

    /// Q-value magnitude every table must stay under.
    pub fn value_bound(&self) -> f64 {
        self.reward.max_step_magnitude(self.cfg.max_steps_episode) / (1.0 - self.cfg.discount)
    }

    fn landmark_visits(&self, landmark: usize) -> u32 {
        self.landmark_nodes
            .get(&landmark)
            .and_then(|n| self.map.node(*n).ok())
            .map_or(0, |n| n.visits)
    }

    fn target_cell(&self, g: Subgoal, world: &GridWorld) -> Cell {
        match g {
            Subgoal::Global => world.goal(),
            Subgoal::Node(n) => self.node_cell[n],
            Subgoal::Virtual(c) => c,
        }
    }

    fn controller_for(&self, g: Subgoal, s: Cell) -> (ControllerKey, SubState) {
        match g {
            Subgoal::Global => (ControllerKey::Global, SubState::Cell(s)),
            Subgoal::Node(n) => (ControllerKey::Node(n), SubState::Cell(s)),
            Subgoal::Virtual(v) => (ControllerKey::Pursuit, SubState::relative(s, v)),
        }
    }

    fn add_node_cell(&mut self, id: NodeId) {
        debug_assert_eq!(id, self.node_cell.len());
        let c = Cell::from_position(self.map.nodes()[id].position);
        self.node_cell.push(c);
        self.node_cells.entry(c).or_insert(id);
    }

    /// Ends the running option and, when learning, stores its meta
    /// transition; then starts `next` from `s`.
    fn switch_option<R: Rng + ?Sized>(
        &mut self,
        run: &mut OptionRun,
        next: MetaChoice,
        s: Cell,
        learn: bool,
        rng: &mut R,
    ) {
        self.close_option(run, s, false, learn, rng);
        *run = OptionRun::new(next, s);
    }

    fn close_option<R: Rng + ?Sized>(&mut self, run: &OptionRun, end: Cell, terminal: bool, learn: bool, rng: &mut R) {
        if learn && run.steps > 0 && self.mode.uses_subgoals() {
            let tr = Transition {
                s: run.start,
                choice: run.choice,
                r: run.reward,
                s_next: end,
                terminal,
                steps: run.steps,
            };
            let n_nodes = self.map.len();
            self.policy.learn_meta(tr, n_nodes, rng);
        }
    }

    /// Runs one episode from the world's start cell. With `learn` off the
    /// policy is greedy and no table is updated; the map still grows.
    pub fn run_episode<R: Rng + ?Sized>(&mut self, world: &GridWorld, learn: bool, rng: &mut R) -> Result<EpisodeResult> {
        let cfg = self.cfg;
        let schedule = cfg.epsilon();
        let uses_subgoals = self.mode.uses_subgoals();
        let goal = world.goal();
        let free = world.free_cell_count() as u32;

        let mut expl = ExplorationState::new(free);
        let mut s = world.start();
        expl.arrive(s);
        let mut anchor: Option<NodeId> = self.node_cells.get(&s).copied();
        if let Some(n) = anchor {
            self.map.mark_explored(n)?;
        }
        let mut option = OptionRun::new(MetaChoice::Goal, s);
        let mut subgoal = Subgoal::Global;
        let mut sub_steps = 0u32;
        let mut hold_global = 0u32;
        let mut detected = world.observe(s, rng);

        let mut totals = RewardBreakdown::default();
        let mut trace = Vec::new();
        let mut success = false;
        let mut steps = 0u32;
        let mut trajectory = 0u32;
        let mut subgoals_reached = 0u32;
        let mut overflows = 0u32;
        let mut meta_selections = 0u32;

        for t in 1..=cfg.max_steps_episode {
            let eps = if learn { schedule.value(self.total_steps) } else { 0.0 };

            // perception: grow the map, maybe adopt a new landmark as subgoal
            let mut adopted = false;
            let mut inserted_any = false;
            if !detected.is_empty() {
                let candidates: Vec<Landmark> = detected
                    .iter()
                    .map(|l| Landmark {
                        visits: self.landmark_visits(l.id),
                        ..l.clone()
                    })
                    .collect();
                let best = select_landmark(&candidates, s.position(), goal.position(), &self.selection).map(|l| l.id);
                let mut best_new = None;
                for l in &detected {
                    let (nid, inserted) = self.map.match_or_insert(&l.feature, l.position)?;
                    self.landmark_nodes.insert(l.id, nid);
                    if inserted {
                        inserted_any = true;
                        self.add_node_cell(nid);
                        if let Some(a) = anchor {
                            self.map.add_edge(a, nid)?;
                        }
                        if Some(l.id) == best {
                            best_new = Some(nid);
                        }
                    }
                }
                if let Some(nid) = best_new.filter(|n| uses_subgoals && self.node_cell[*n] != s) {
                    self.switch_option(&mut option, MetaChoice::Node(nid), s, learn, rng);
                    subgoal = Subgoal::Node(nid);
                    sub_steps = 0;
                    adopted = true;
                }
            }

            if uses_subgoals && sub_steps >= cfg.max_steps_subgoal {
                overflows += 1;
                let next = if self.policy.has_meta() {
                    meta_selections += 1;
                    self.policy.choose_subgoal(s, &self.map, eps, rng)?
                } else {
                    MetaChoice::Goal
                };
                self.switch_option(&mut option, next, s, learn, rng);
                subgoal = match next {
                    MetaChoice::Goal => {
                        hold_global = cfg.max_steps_subgoal;
                        Subgoal::Global
                    }
                    MetaChoice::Node(n) => Subgoal::Node(n),
                };
                sub_steps = 0;
            }

            if uses_subgoals && !adopted && hold_global == 0 && !matches!(subgoal, Subgoal::Node(_)) {
                let target = self.target_cell(subgoal, world);
                if euclidean(s.position(), target.position()) > cfg.d_thresh {
                    if let Some(v) = synthesize_virtual(world, s, goal, cfg.d_thresh) {
                        if subgoal != Subgoal::Virtual(v) {
                            subgoal = Subgoal::Virtual(v);
                            sub_steps = 0;
                        }
                    }
                }
            }
            hold_global = hold_global.saturating_sub(1);

            // act
            let used = subgoal;
            let pursuit_steps = sub_steps;
            let (key, sub_s) = self.controller_for(used, s);
            let action = self.policy.choose_action(key, &sub_s, eps, rng);
            let out = world.step(s, action, rng)?;
            let s2 = out.next_state;
            if s2 != s {
                trajectory += 1;
            }

            // bookkeeping for the reward terms
            let n_visits = expl.arrive(s2);
            expl.frontier_new = 0;
            if let Some(&nid) = self.node_cells.get(&s2) {
                let node = self.map.node_mut(nid)?;
                if !node.explored {
                    node.explored = true;
                    expl.frontier_new = 1;
                }
                if let Some(a) = anchor.filter(|a| *a != nid) {
                    self.map.add_edge(a, nid)?;
                }
                anchor = Some(nid);
            }
            expl.node_total = self.map.len() as u32;
            if expl.area_delta > 0 || inserted_any {
                expl.t_last_exp = t;
            }

            let reached_sub = used != Subgoal::Global && s2 == self.target_cell(used, world);
            let events = StepEvents {
                reached_goal: out.events.reached_goal,
                reached_milestone: reached_sub,
                new_subgoal_discovered: adopted,
                hit_obstacle: out.events.hit_obstacle,
                uncertainty: count_uncertainty(n_visits),
            };
            let feature = match used {
                Subgoal::Node(n) => Some(self.map.node(n)?.feature.clone()),
                _ => None,
            };
            let r_ex = extrinsic_reward(&events, &self.reward);
            let intr = intrinsic_reward(s2, &events, &expl, &self.reward)?;
            let pen = penalty_reward(s2, feature.as_deref(), t, &events, &expl, &self.reward)?;
            let rb = total_reward(r_ex, &intr, &pen, &self.reward);
            totals.accumulate(&rb);

            let done = events.reached_goal;
            if learn {
                let (_, sub_next) = self.controller_for(used, s2);
                let tr = Transition::new(sub_s, action.index(), rb.total, sub_next, reached_sub || done);
                self.policy.learn_sub(key, tr, rng);
                self.total_steps += 1;
            }
            let meta_r = if cfg.meta_extrinsic_only {
                self.reward.alpha * r_ex
            } else {
                rb.total
            };
            option.accrue(meta_r, cfg.discount);
            sub_steps += 1;

            if reached_sub {
                subgoals_reached += 1;
                if let (Subgoal::Node(n), Some(f)) = (used, feature) {
                    self.map.node_mut(n)?.visits += 1;
                    expl.subgoal_history.push(f);
                    if !done {
                        self.switch_option(&mut option, MetaChoice::Goal, s2, learn, rng);
                    }
                }
                subgoal = Subgoal::Global;
                sub_steps = 0;
            }

            if self.trace {
                trace.push(StepTrace {
                    t,
                    cell: s,
                    subgoal: used,
                    pursuit_steps,
                    action,
                    next_cell: s2,
                    subgoal_after: subgoal,
                    reward: rb.total,
                });
            }

            s = s2;
            steps = t;
            detected = out.detected;
            if done {
                success = true;
                break;
            }
        }
        self.close_option(&option, s, success, learn, rng);

        Ok(EpisodeResult {
            success,
            steps,
            trajectory_length: trajectory,
            coverage: f64::from(expl.explored_area) / f64::from(free),
            reward: totals,
            map_nodes: self.map.len(),
            map_edges: self.map.edges().len(),
            subgoals_reached,
            overflows,
            meta_selections,
            trace,
        })
    }

    /// Greedy episode on a scratch copy; the agent itself is untouched.
    pub fn evaluate<R: Rng + ?Sized>(&self, world: &GridWorld, rng: &mut R) -> Result<EpisodeResult> {
        self.clone().run_episode(world, false, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{SubEntry, SubState};
    use crate::world::{make_scenario, ScenarioKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn agent(mode: AblationMode, cfg: AgentConfig) -> Agent {
        Agent::new(mode, cfg, RewardConfig::default(), SelectionConfig::default(), TopoMap::default())
    }

    #[test]
    fn adjacent_goal_one_step() {
        let world = GridWorld::new(2, 1, [], vec![], Cell::new(0, 0), Cell::new(1, 0), 2.0, 0.0).unwrap();
        let mut a = agent(AblationMode::Full, AgentConfig::default());
        let mut sub = BTreeMap::new();
        sub.insert(
            "global".to_string(),
            vec![SubEntry {
                state: SubState::Cell(Cell::new(0, 0)),
                choice: Action::E,
                value: 1.0,
            }],
        );
        a.load_snapshot(&PolicySnapshot { meta: None, sub }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = a.evaluate(&world, &mut rng).unwrap();
        assert!(r.success);
        assert_eq!(r.steps, 1);
        assert_eq!(r.trajectory_length, 1);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn first_virtual_subgoal_on_goal_ray() {
        let world = GridWorld::new(12, 3, [], vec![], Cell::new(0, 1), Cell::new(10, 1), 2.0, 0.0).unwrap();
        let cfg = AgentConfig {
            d_thresh: 3.0,
            ..AgentConfig::default()
        };
        let mut a = agent(AblationMode::Full, cfg);
        a.set_trace(true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = a.run_episode(&world, true, &mut rng).unwrap();
        assert_eq!(r.trace[0].subgoal, Subgoal::Virtual(Cell::new(3, 1)));

        // diagonal goal: subgoal within half a cell of the exact ray point
        let world = GridWorld::new(12, 12, [], vec![], Cell::new(0, 0), Cell::new(6, 8), 2.0, 0.0).unwrap();
        let mut a = agent(AblationMode::Full, cfg);
        a.set_trace(true);
        let r = a.run_episode(&world, true, &mut rng).unwrap();
        let Subgoal::Virtual(v) = r.trace[0].subgoal else {
            panic!("expected a virtual subgoal, got {:?}", r.trace[0].subgoal)
        };
        let exact = [3.0 * 0.6, 3.0 * 0.8];
        assert!((f64::from(v.x) - exact[0]).abs() <= 0.5 && (f64::from(v.y) - exact[1]).abs() <= 0.5);
    }

    #[test]
    fn reaching_subgoal_retargets_global() {
        let world = GridWorld::new(12, 3, [], vec![], Cell::new(0, 1), Cell::new(10, 1), 2.0, 0.0).unwrap();
        let cfg = AgentConfig {
            d_thresh: 3.0,
            ..AgentConfig::default()
        };
        let mut a = agent(AblationMode::Full, cfg);
        a.set_trace(true);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = 0;
        for _ in 0..5 {
            let r = a.run_episode(&world, true, &mut rng).unwrap();
            for st in &r.trace {
                if matches!(st.subgoal, Subgoal::Virtual(v) if v == st.next_cell) {
                    assert_eq!(st.subgoal_after, Subgoal::Global);
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn overflow_triggers_meta_choice() {
        // landmark walled off behind obstacles: node subgoal is unreachable
        let mut obstacles = vec![];
        for (x, y) in [(4, 3), (6, 3), (5, 2), (5, 4)] {
            obstacles.push(Cell::new(x, y));
        }
        let lm = Landmark {
            id: 0,
            position: [5.0, 3.0],
            feature: vec![1.0; 8],
            visits: 0,
        };
        let world = GridWorld::new(10, 10, obstacles, vec![lm], Cell::new(2, 3), Cell::new(9, 9), 4.0, 0.0).unwrap();
        let cfg = AgentConfig {
            max_steps_subgoal: 5,
            max_steps_episode: 60,
            epsilon_start: 0.0,
            epsilon_end: 0.0,
            ..AgentConfig::default()
        };
        let mut a = agent(AblationMode::Full, cfg);
        a.set_trace(true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = a.run_episode(&world, true, &mut rng).unwrap();
        assert!(r.overflows > 0);
        assert_eq!(r.overflows, r.meta_selections);
        // no pursuit outlives max_steps_subgoal
        assert!(r.trace.iter().all(|st| st.pursuit_steps < cfg.max_steps_subgoal));
        assert!(r.trace.iter().any(|st| matches!(st.subgoal, Subgoal::Node(_))));
    }

    #[test]
    fn no_hierarchy_never_builds_meta() {
        let world = make_scenario(ScenarioKind::ComplexTerrain, 12, 0).unwrap();
        let mut a = agent(AblationMode::NoHierarchy, AgentConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..3 {
            a.run_episode(&world, true, &mut rng).unwrap();
        }
        assert!(!a.policy().has_meta());
        assert!(a.policy().controllers().all(|(k, _)| *k == ControllerKey::Global));
    }

    #[test]
    fn no_intrinsic_zeroes_beta() {
        let a = agent(AblationMode::NoIntrinsic, AgentConfig::default());
        assert_eq!(a.reward_config().beta, 0.0);
    }

    #[test]
    fn values_stay_bounded_and_map_stays_valid() {
        for kind in [ScenarioKind::FeatureBased, ScenarioKind::ComplexTerrain] {
            let world = make_scenario(kind, 14, 7).unwrap();
            let mut a = agent(AblationMode::Full, AgentConfig::default());
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..15 {
                a.run_episode(&world, true, &mut rng).unwrap();
                assert!(a.policy().max_abs_value() <= a.value_bound());
            }
            a.map().audit().unwrap();
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let world = make_scenario(ScenarioKind::ComplexTerrain, 12, 3).unwrap();
        let run = || {
            let mut a = agent(AblationMode::Full, AgentConfig::default());
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut out = vec![];
            for _ in 0..5 {
                out.push(a.run_episode(&world, true, &mut rng).unwrap());
            }
            (out, a.map().to_json(), a.policy().snapshot().to_json())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn virtual_synthesis_edge_cases() {
        let world = GridWorld::new(10, 1, [Cell::new(4, 0)], vec![], Cell::new(0, 0), Cell::new(3, 0), 2.0, 0.0).unwrap();
        assert_eq!(synthesize_virtual(&world, Cell::new(0, 0), Cell::new(3, 0), 5.0), None);
        let world = GridWorld::new(10, 1, [], vec![], Cell::new(0, 0), Cell::new(9, 0), 2.0, 0.0).unwrap();
        assert_eq!(synthesize_virtual(&world, Cell::new(0, 0), Cell::new(9, 0), 4.0), Some(Cell::new(4, 0)));
    }
}
