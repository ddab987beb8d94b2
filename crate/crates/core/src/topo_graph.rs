//! Dynamically grown topological map.
//!
//! Nodes are inserted through a descriptor-similarity gate so that no two
//! nodes in a map are ever similar enough to be confused with one another.
//! Edges carry the Euclidean distance between their endpoints at creation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Planar position in meters (one grid cell is one meter).
pub type Position = [f64; 2];

pub const DEFAULT_TAU_SIM: f64 = 0.5;
pub const DEFAULT_FEATURE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub id: NodeId,
    pub position: Position,
    pub feature: Vec<f64>,
    pub visits: u32,
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub cost: f64,
    pub traversable: bool,
}

impl TopoEdge {
    fn joins(&self, a: NodeId, b: NodeId) -> bool {
        (self.a == a && self.b == b) || (self.a == b && self.b == a)
    }

    fn other(&self, n: NodeId) -> Option<NodeId> {
        if self.a == n {
            Some(self.b)
        } else if self.b == n {
            Some(self.a)
        } else {
            None
        }
    }
}

fn check_dims(f1: &[f64], f2: &[f64]) -> Result<()> {
    if f1.len() != f2.len() {
        return Err(Error::DimensionMismatch {
            expected: f1.len(),
            got: f2.len(),
        });
    }
    Ok(())
}

/// Euclidean distance between two descriptors.
pub fn descriptor_distance(f1: &[f64], f2: &[f64]) -> Result<f64> {
    check_dims(f1, f2)?;
    Ok(f1
        .iter()
        .zip(f2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Similarity in (0, 1], defined as `exp(-distance)`.
pub fn descriptor_similarity(f1: &[f64], f2: &[f64]) -> Result<f64> {
    Ok((-descriptor_distance(f1, f2)?).exp())
}

pub fn euclidean(p: Position, q: Position) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoMap {
    nodes: Vec<TopoNode>,
    edges: Vec<TopoEdge>,
    tau_sim: f64,
    feature_dim: usize,
}

impl Default for TopoMap {
    fn default() -> Self {
        Self::new(DEFAULT_TAU_SIM, DEFAULT_FEATURE_DIM)
    }
}

impl TopoMap {
    pub fn new(tau_sim: f64, feature_dim: usize) -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            tau_sim,
            feature_dim,
        }
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TopoEdge] {
        &self.edges
    }

    pub fn tau_sim(&self) -> f64 {
        self.tau_sim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&TopoNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut TopoNode> {
        self.nodes.get_mut(id).ok_or(Error::UnknownNode(id))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    /// Matches `feature` against the map, or inserts a new node at `position`.
    ///
    /// The best match wins when its similarity reaches `tau_sim`; the matched
    /// node's visit count is bumped. Ties go to the lowest id.
    pub fn match_or_insert(&mut self, feature: &[f64], position: Position) -> Result<(NodeId, bool)> {
        if feature.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: feature.len(),
            });
        }
        let mut best: Option<(NodeId, f64)> = None;
        for node in &self.nodes {
            let sim = descriptor_similarity(&node.feature, feature)?;
            // strict > keeps the lowest id on ties
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((node.id, sim));
            }
        }
        if let Some((id, sim)) = best {
            if sim >= self.tau_sim {
                self.nodes[id].visits += 1;
                return Ok((id, false));
            }
        }
        let id = self.nodes.len();
        self.nodes.push(TopoNode {
            id,
            position,
            feature: feature.to_vec(),
            visits: 0,
            explored: false,
        });
        Ok((id, true))
    }

    /// Adds an undirected edge costed at the endpoints' Euclidean distance.
    /// Re-adding an existing pair returns the stored edge unchanged.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<TopoEdge> {
        let pa = self.node(a)?.position;
        let pb = self.node(b)?.position;
        if a == b {
            return Err(Error::SelfEdge(a));
        }
        if let Some(e) = self.edge(a, b) {
            return Ok(e.clone());
        }
        let edge = TopoEdge {
            a,
            b,
            cost: euclidean(pa, pb),
            traversable: true,
        };
        self.edges.push(edge.clone());
        Ok(edge)
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&TopoEdge> {
        self.edges.iter().find(|e| e.joins(a, b))
    }

    pub fn set_traversable(&mut self, a: NodeId, b: NodeId, traversable: bool) -> Result<()> {
        self.node(a)?;
        self.node(b)?;
        let edge = self
            .edges
            .iter_mut()
            .find(|e| e.joins(a, b))
            .ok_or_else(|| Error::Invalid(format!("no edge between {a} and {b}")))?;
        edge.traversable = traversable;
        Ok(())
    }

    pub fn neighbors(&self, n: NodeId) -> impl Iterator<Item = &TopoEdge> + '_ {
        self.edges.iter().filter(move |e| e.other(n).is_some())
    }

    pub fn mark_explored(&mut self, id: NodeId) -> Result<()> {
        self.node_mut(id)?.explored = true;
        Ok(())
    }

    /// Unexplored nodes, plus explored nodes with at least one unexplored
    /// neighbor.
    pub fn frontier_nodes(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for node in &self.nodes {
            if !node.explored {
                out.insert(node.id);
                continue;
            }
            let touches_unexplored = self
                .neighbors(node.id)
                .filter_map(|e| e.other(node.id))
                .any(|m| !self.nodes[m].explored);
            if touches_unexplored {
                out.insert(node.id);
            }
        }
        out
    }

    /// Minimum-cost path over traversable edges. Among equal-cost paths the
    /// lexicographically smallest id sequence is returned.
    pub fn shortest_path(&self, a: NodeId, b: NodeId) -> Result<Option<(Vec<NodeId>, f64)>> {
        self.node(a)?;
        self.node(b)?;

        #[derive(PartialEq)]
        struct Label {
            cost: f64,
            path: Vec<NodeId>,
        }
        impl Eq for Label {}
        impl Ord for Label {
            // reversed: BinaryHeap is a max-heap
            fn cmp(&self, other: &Self) -> Ordering {
                other
                    .cost
                    .total_cmp(&self.cost)
                    .then_with(|| other.path.cmp(&self.path))
            }
        }
        impl PartialOrd for Label {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let n = self.nodes.len();
        let mut best: Vec<Option<(f64, Vec<NodeId>)>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        best[a] = Some((0.0, vec![a]));
        heap.push(Label {
            cost: 0.0,
            path: vec![a],
        });

        while let Some(Label { cost, path }) = heap.pop() {
            let u = *path.last().expect("labels are never empty");
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if u == b {
                return Ok(Some((path, cost)));
            }
            for e in self.neighbors(u).filter(|e| e.traversable) {
                let v = e.other(u).expect("neighbor edge touches u");
                if settled[v] {
                    continue;
                }
                let c = cost + e.cost;
                let mut p = path.clone();
                p.push(v);
                let better = match &best[v] {
                    None => true,
                    Some((bc, bp)) => c < *bc || (c == *bc && p < *bp),
                };
                if better {
                    best[v] = Some((c, p.clone()));
                    heap.push(Label { cost: c, path: p });
                }
            }
        }
        Ok(None)
    }

    /// Checks both structural invariants: every edge endpoint exists and
    /// all node pairs stay below the similarity threshold.
    pub fn audit(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Invalid(format!("node at index {i} has id {}", node.id)));
            }
            if node.feature.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    got: node.feature.len(),
                });
            }
        }
        for e in &self.edges {
            self.node(e.a)?;
            self.node(e.b)?;
            if e.a == e.b {
                return Err(Error::SelfEdge(e.a));
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if self.edges[..k].iter().any(|f| f.joins(e.a, e.b)) {
                return Err(Error::Invalid(format!("duplicate edge {}-{}", e.a, e.b)));
            }
        }
        for i in 0..self.nodes.len() {
            for j in i + 1..self.nodes.len() {
                let sim = descriptor_similarity(&self.nodes[i].feature, &self.nodes[j].feature)?;
                if sim >= self.tau_sim {
                    return Err(Error::Invalid(format!(
                        "nodes {i} and {j} have similarity {sim} >= tau_sim {}",
                        self.tau_sim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    x: n.position[0],
                    y: n.position[1],
                    feature: n.feature.clone(),
                    visits: n.visits,
                    explored: n.explored,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    a: e.a,
                    b: e.b,
                    cost: e.cost,
                    traversable: e.traversable,
                })
                .collect(),
        }
    }

    /// Rebuilds a map from its exported form, then audits it.
    pub fn from_document(doc: &MapDocument, tau_sim: f64, feature_dim: usize) -> Result<Self> {
        let map = TopoMap {
            nodes: doc
                .nodes
                .iter()
                .map(|n| TopoNode {
                    id: n.id,
                    position: [n.x, n.y],
                    feature: n.feature.clone(),
                    visits: n.visits,
                    explored: n.explored,
                })
                .collect(),
            edges: doc
                .edges
                .iter()
                .map(|e| TopoEdge {
                    a: e.a,
                    b: e.b,
                    cost: e.cost,
                    traversable: e.traversable,
                })
                .collect(),
            tau_sim,
            feature_dim,
        };
        map.audit()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("map document serializes")
    }

    pub fn from_json(s: &str, tau_sim: f64, feature_dim: usize) -> Result<Self> {
        let doc: MapDocument = serde_json::from_str(s)?;
        Self::from_document(&doc, tau_sim, feature_dim)
    }
}

/// Export schema of a [`TopoMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub feature: Vec<f64>,
    pub visits: u32,
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub a: NodeId,
    pub b: NodeId,
    pub cost: f64,
    pub traversable: bool,
}
