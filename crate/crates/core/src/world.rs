//! Seeded planar grid world: obstacles, landmarks, slip dynamics and
//! range-plus-occlusion landmark detection.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landmark::Landmark;
use crate::reward::StepEvents;
use crate::topo_graph::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn position(self) -> Position {
        [f64::from(self.x), f64::from(self.y)]
    }

    pub fn offset(self, a: Action) -> Cell {
        let (dx, dy) = a.delta();
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn from_position(p: Position) -> Cell {
        Cell::new(p[0].round() as i32, p[1].round() as i32)
    }

    pub fn manhattan(self, o: Cell) -> u32 {
        self.x.abs_diff(o.x) + self.y.abs_diff(o.y)
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Primitive moves. The declaration order N < E < S < W is the greedy
/// tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    N,
    E,
    S,
    W,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::N, Action::E, Action::S, Action::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::N => (0, 1),
            Action::E => (1, 0),
            Action::S => (0, -1),
            Action::W => (-1, 0),
        }
    }

    pub fn perpendicular(self) -> [Action; 2] {
        match self {
            Action::N | Action::S => [Action::E, Action::W],
            Action::E | Action::W => [Action::N, Action::S],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Cell,
    pub events: StepEvents,
    pub detected: Vec<Landmark>,
    /// Direction actually taken after slip resolution.
    pub moved: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: i32,
    height: i32,
    blocked: Vec<bool>,
    landmarks: Vec<Landmark>,
    start: Cell,
    goal: Cell,
    detection_range: f64,
    slip_prob: f64,
    detection_miss_prob: f64,
}

impl GridWorld {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: i32,
        height: i32,
        obstacles: impl IntoIterator<Item = Cell>,
        landmarks: Vec<Landmark>,
        start: Cell,
        goal: Cell,
        detection_range: f64,
        slip_prob: f64,
    ) -> Result<Self> {
        if width <= 0 || height <= 0 {
            return Err(Error::Invalid(format!("world size {width}x{height}")));
        }
        let mut world = GridWorld {
            width,
            height,
            blocked: vec![false; (width * height) as usize],
            landmarks,
            start,
            goal,
            detection_range,
            slip_prob,
            detection_miss_prob: 0.0,
        };
        for c in obstacles {
            if !world.in_bounds(c) {
                return Err(Error::Invalid(format!("obstacle {c} out of bounds")));
            }
            let i = world.index(c);
            world.blocked[i] = true;
        }
        world.validate()?;
        Ok(world)
    }

    fn validate(&self) -> Result<()> {
        if !(self.detection_range > 0.0) {
            return Err(Error::Invalid("detection_range must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::Invalid("slip_prob must be in [0, 1)".into()));
        }
        for c in [self.start, self.goal] {
            if !self.is_free(c) {
                return Err(Error::BlockedCell { x: c.x, y: c.y });
            }
        }
        for l in &self.landmarks {
            let c = Cell::from_position(l.position);
            if !self.is_free(c) {
                return Err(Error::Invalid(format!("landmark {} sits on a blocked cell", l.id)));
            }
        }
        if self.bfs_distance(self.start, self.goal).is_none() {
            return Err(Error::Invalid("goal unreachable from start".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    pub fn detection_range(&self) -> f64 {
        self.detection_range
    }

    pub fn slip_prob(&self) -> f64 {
        self.slip_prob
    }

    pub fn set_slip_prob(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Invalid("slip_prob must be in [0, 1)".into()));
        }
        self.slip_prob = p;
        Ok(())
    }

    pub fn detection_miss_prob(&self) -> f64 {
        self.detection_miss_prob
    }

    /// Optional false-negative rate applied by [`GridWorld::observe`]. Off by default.
    pub fn set_detection_miss_prob(&mut self, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Invalid("detection_miss_prob must be in [0, 1]".into()));
        }
        self.detection_miss_prob = p;
        Ok(())
    }

    pub fn set_start_goal(&mut self, start: Cell, goal: Cell) -> Result<()> {
        let (old_s, old_g) = (self.start, self.goal);
        self.start = start;
        self.goal = goal;
        if let Err(e) = self.validate() {
            self.start = old_s;
            self.goal = old_g;
            return Err(e);
        }
        Ok(())
    }

    fn index(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.blocked[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|c| self.is_obstacle(*c))
    }

    pub fn obstacle_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let w = self.width;
        (0..self.height).flat_map(move |y| (0..w).map(move |x| Cell::new(x, y)))
    }

    pub fn free_cell_count(&self) -> usize {
        self.blocked.len() - self.obstacle_count()
    }

    /// One transition. With probability `slip_prob` the move resolves to a
    /// uniformly chosen perpendicular direction; blocked moves leave the
    /// robot in place and flag a collision.
    pub fn step<R: Rng + ?Sized>(&self, s: Cell, a: Action, rng: &mut R) -> Result<StepOutcome> {
        if !self.is_free(s) {
            return Err(Error::BlockedCell { x: s.x, y: s.y });
        }
        let moved = if self.slip_prob > 0.0 && rng.gen::<f64>() < self.slip_prob {
            a.perpendicular()[rng.gen_range(0..2)]
        } else {
            a
        };
        let target = s.offset(moved);
        let (next, hit) = if self.is_free(target) {
            (target, false)
        } else {
            (s, true)
        };
        let detected = self.observe(next, rng);
        Ok(StepOutcome {
            next_state: next,
            events: StepEvents {
                reached_goal: next == self.goal,
                hit_obstacle: hit,
                ..StepEvents::default()
            },
            detected,
            moved,
        })
    }

    /// Detection with the optional false-negative model applied.
    pub fn observe<R: Rng + ?Sized>(&self, s: Cell, rng: &mut R) -> Vec<Landmark> {
        let mut seen = self.detect_landmarks(s);
        if self.detection_miss_prob > 0.0 {
            seen.retain(|_| rng.gen::<f64>() >= self.detection_miss_prob);
        }
        seen
    }

    /// Landmarks within `detection_range` and in line of sight, sorted by id.
    pub fn detect_landmarks(&self, s: Cell) -> Vec<Landmark> {
        let p = s.position();
        let mut out: Vec<Landmark> = self
            .landmarks
            .iter()
            .filter(|l| {
                let d = (l.position[0] - p[0]).hypot(l.position[1] - p[1]);
                d <= self.detection_range && self.line_of_sight(s, Cell::from_position(l.position))
            })
            .cloned()
            .collect();
        out.sort_by_key(|l| l.id);
        out
    }

    /// True when the integer line between the two cell centers crosses no
    /// obstacle strictly between its endpoints. Traced from the smaller
    /// endpoint so the result is symmetric.
    pub fn line_of_sight(&self, a: Cell, b: Cell) -> bool {
        let (from, to) = if a <= b { (a, b) } else { (b, a) };
        trace_line(from, to)
            .into_iter()
            .filter(|c| *c != from && *c != to)
            .all(|c| !self.is_obstacle(c))
    }

    /// Breadth-first distance through free cells.
    pub fn bfs_distance(&self, from: Cell, to: Cell) -> Option<u32> {
        self.bfs_distances(to).get(self.index_checked(from)?).copied().flatten()
    }

    fn index_checked(&self, c: Cell) -> Option<usize> {
        self.in_bounds(c).then(|| self.index(c))
    }

    /// BFS distance of every cell to `target` (None for blocked or unreachable).
    pub fn bfs_distances(&self, target: Cell) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.blocked.len()];
        if !self.is_free(target) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(target)] = Some(0);
        queue.push_back(target);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].expect("queued cells have a distance");
            for a in Action::ALL {
                let n = c.offset(a);
                if self.is_free(n) && dist[self.index(n)].is_none() {
                    dist[self.index(n)] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn distance_at(dist: &[Option<u32>], world: &GridWorld, c: Cell) -> Option<u32> {
        world.index_checked(c).and_then(|i| dist[i])
    }

    pub fn to_document(&self) -> WorldDocument {
        WorldDocument {
            width: self.width,
            height: self.height,
            obstacles: self.obstacles().collect(),
            landmarks: self
                .landmarks
                .iter()
                .map(|l| LandmarkRecord {
                    id: l.id,
                    x: l.position[0],
                    y: l.position[1],
                    feature: l.feature.clone(),
                })
                .collect(),
            start: self.start,
            goal: self.goal,
            detection_range: self.detection_range,
            slip_prob: self.slip_prob,
        }
    }

    pub fn from_document(doc: &WorldDocument) -> Result<Self> {
        GridWorld::new(
            doc.width,
            doc.height,
            doc.obstacles.iter().copied(),
            doc.landmarks
                .iter()
                .map(|l| Landmark {
                    id: l.id,
                    position: [l.x, l.y],
                    feature: l.feature.clone(),
                    visits: 0,
                })
                .collect(),
            doc.start,
            doc.goal,
            doc.detection_range,
            doc.slip_prob,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("world document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// Cells visited by a Bresenham trace from `a` to `b`, endpoints included.
pub fn trace_line(a: Cell, b: Cell) -> Vec<Cell> {
    let dx = (b.x - a.x).abs();
    let dy = -(b.y - a.y).abs();
    let sx = if a.x < b.x { 1 } else { -1 };
    let sy = if a.y < b.y { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (a.x, a.y);
    let mut out = vec![a];
    while (x, y) != (b.x, b.y) {
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        out.push(Cell::new(x, y));
    }
    out
}

/// Export schema of a [`GridWorld`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDocument {
    pub width: i32,
    pub height: i32,
    pub obstacles: Vec<Cell>,
    pub landmarks: Vec<LandmarkRecord>,
    pub start: Cell,
    pub goal: Cell,
    pub detection_range: f64,
    pub slip_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ScenarioKind {
    /// Open field: no obstacles, no landmarks.
    GoalReaching = 1,
    /// Open field scattered with landmarks.
    FeatureBased = 2,
    /// Obstacles and landmarks.
    ComplexTerrain = 3,
}

impl TryFrom<u8> for ScenarioKind {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ScenarioKind::GoalReaching),
            2 => Ok(ScenarioKind::FeatureBased),
            3 => Ok(ScenarioKind::ComplexTerrain),
            other => Err(format!("scenario must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<ScenarioKind> for u8 {
    fn from(k: ScenarioKind) -> u8 {
        k as u8
    }
}

/// Generator knobs shared by all scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub obstacle_density: f64,
    pub landmark_density: f64,
    pub feature_dim: usize,
    pub detection_range: f64,
    pub slip_prob: f64,
    pub detection_miss_prob: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            obstacle_density: 0.15,
            landmark_density: 0.03,
            feature_dim: crate::topo_graph::DEFAULT_FEATURE_DIM,
            detection_range: 4.0,
            slip_prob: 0.1,
            detection_miss_prob: 0.0,
        }
    }
}

const MAX_REGENERATIONS: usize = 100;

pub fn make_scenario(kind: ScenarioKind, size: i32, seed: u64) -> Result<GridWorld> {
    make_scenario_with(kind, size, seed, &ScenarioParams::default())
}

/// Builds a `size` x `size` world. Start is drawn from the lower-left
/// quarter and goal from the upper-right quarter; obstacle layouts are
/// redrawn until the goal is reachable.
pub fn make_scenario_with(
    kind: ScenarioKind,
    size: i32,
    seed: u64,
    params: &ScenarioParams,
) -> Result<GridWorld> {
    if size < 10 {
        return Err(Error::Scenario(format!("size must be >= 10, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = size / 4;
    let start = Cell::new(rng.gen_range(0..band), rng.gen_range(0..band));
    let goal = Cell::new(rng.gen_range(size - band..size), rng.gen_range(size - band..size));

    let all: Vec<Cell> = (0..size)
        .flat_map(|y| (0..size).map(move |x| Cell::new(x, y)))
        .filter(|c| *c != start && *c != goal)
        .collect();
    let (obstacle_density, landmark_density) = match kind {
        ScenarioKind::GoalReaching => (0.0, 0.0),
        ScenarioKind::FeatureBased => (0.0, params.landmark_density),
        ScenarioKind::ComplexTerrain => (params.obstacle_density, params.landmark_density),
    };
    let n_obstacles = (obstacle_density * f64::from(size * size)).round() as usize;

    for _ in 0..MAX_REGENERATIONS {
        let mut cells = all.clone();
        cells.shuffle(&mut rng);
        let obstacles: Vec<Cell> = cells[..n_obstacles].to_vec();
        let mut world = GridWorld {
            width: size,
            height: size,
            blocked: vec![false; (size * size) as usize],
            landmarks: Vec::new(),
            start,
            goal,
            detection_range: params.detection_range,
            slip_prob: params.slip_prob,
            detection_miss_prob: 0.0,
        };
        for c in &obstacles {
            let i = world.index(*c);
            world.blocked[i] = true;
        }
        if world.bfs_distance(start, goal).is_none() {
            continue;
        }
        let free = &cells[n_obstacles..];
        let n_landmarks = (landmark_density * (free.len() + 2) as f64).round() as usize;
        world.landmarks = draw_landmarks(&free[..n_landmarks.min(free.len())], params.feature_dim, &mut rng);
        world.set_detection_miss_prob(params.detection_miss_prob)?;
        world.validate()?;
        return Ok(world);
    }
    Err(Error::Scenario(format!(
        "no connected layout after {MAX_REGENERATIONS} attempts"
    )))
}

fn draw_landmarks(cells: &[Cell], dim: usize, rng: &mut ChaCha8Rng) -> Vec<Landmark> {
    let mut sorted = cells.to_vec();
    sorted.sort();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::with_capacity(sorted.len());
    for (id, c) in sorted.into_iter().enumerate() {
        let feature = loop {
            let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect();
            if seen.insert(f.iter().map(|v| v.to_bits()).collect()) {
                break f;
            }
        };
        out.push(Landmark {
            id,
            position: c.position(),
            feature,
            visits: 0,
        });
    }
    out
}
