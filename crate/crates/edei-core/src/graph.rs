//! Operation graph, incident-spread graph, and the per-node asset state.
//!
//! Both graphs share one dense `NodeId` space. The operation graph is
//! undirected with positive integer edge lengths (grid-cell units) and
//! constrains agent movement; the spread graph is directed with per-edge base
//! spread rates in [0,1] and is independent of the physical corridors.
//!
//! Node lifecycle: `Normal` (no hazard), `Incident` (severity 0 < f ≤ τ
//! burning), `Scrapped` (severity reached τ; assets destroyed; absorbing).

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Dense 0-based node index shared by the operation and spread graphs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Coarse asset category carried by a node (the `f_c` feature).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AssetCategory {
    General,
    Flammable,
    Support,
}

impl AssetCategory {
    /// Scalar encoding used in predictor features.
    pub fn code(self) -> f64 {
        match self {
            AssetCategory::General => 0.0,
            AssetCategory::Flammable => 1.0,
            AssetCategory::Support => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AssetCategory::General => "general",
            AssetCategory::Flammable => "flammable",
            AssetCategory::Support => "support",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "general" => Some(AssetCategory::General),
            "flammable" => Some(AssetCategory::Flammable),
            "support" => Some(AssetCategory::Support),
            _ => None,
        }
    }
}

/// Static node attributes fixed by the scenario.
#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub pos: (u32, u32),
    pub initial_assets: u32,
    pub category: AssetCategory,
}

/// Node lifecycle under incident dynamics.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeStatus {
    Normal,
    Incident,
    Scrapped,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("grid dimensions must be positive, got {0}x{1}")]
    EmptyGrid(u32, u32),
    #[error("graph needs at least one node")]
    NoNodes,
    #[error("node {node} position ({x},{y}) outside {w}x{h} grid")]
    PositionOutOfGrid { node: u32, x: u32, y: u32, w: u32, h: u32 },
    #[error("nodes {a} and {b} share grid cell ({x},{y})")]
    DuplicatePosition { a: u32, b: u32, x: u32, y: u32 },
    #[error("edge references unknown node {0}")]
    UnknownEndpoint(u32),
    #[error("self-loop edge on node {0}")]
    SelfLoop(u32),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(u32, u32),
    #[error("edge between {0} and {1} has zero length")]
    ZeroLength(u32, u32),
    #[error("spread edge {0}->{1} rate {2} outside [0,1]")]
    SpreadRateRange(u32, u32, f64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoveError {
    #[error("no assets at source node {0}")]
    NoAssets(u32),
    #[error("target node {0} is scrapped")]
    TargetScrapped(u32),
    #[error("source and target are the same node {0}")]
    SameNode(u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
}

/// Physical layout: undirected transit edges over grid-positioned nodes.
#[derive(Clone, Debug)]
pub struct OperationGraph {
    grid: (u32, u32),
    nodes: Vec<Node>,
    adj: Vec<Vec<(NodeId, u32)>>,
    edge_count: usize,
}

impl OperationGraph {
    pub fn new(
        grid: (u32, u32),
        nodes: Vec<Node>,
        edges: &[(NodeId, NodeId, u32)],
    ) -> Result<Self, GraphError> {
        if grid.0 == 0 || grid.1 == 0 {
            return Err(GraphError::EmptyGrid(grid.0, grid.1));
        }
        if nodes.is_empty() {
            return Err(GraphError::NoNodes);
        }
        let n = nodes.len();
        let mut seen_pos = std::collections::HashMap::new();
        for node in &nodes {
            let (x, y) = node.pos;
            if x >= grid.0 || y >= grid.1 {
                return Err(GraphError::PositionOutOfGrid { node: node.id.0, x, y, w: grid.0, h: grid.1 });
            }
            if let Some(prev) = seen_pos.insert((x, y), node.id.0) {
                return Err(GraphError::DuplicatePosition { a: prev, b: node.id.0, x, y });
            }
        }
        let mut adj = vec![Vec::new(); n];
        let mut seen_edge = std::collections::HashSet::new();
        for &(a, b, len) in edges {
            if a.idx() >= n {
                return Err(GraphError::UnknownEndpoint(a.0));
            }
            if b.idx() >= n {
                return Err(GraphError::UnknownEndpoint(b.0));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a.0));
            }
            if len == 0 {
                return Err(GraphError::ZeroLength(a.0, b.0));
            }
            let key = (a.min(b), a.max(b));
            if !seen_edge.insert(key) {
                return Err(GraphError::DuplicateEdge(a.0, b.0));
            }
            adj[a.idx()].push((b, len));
            adj[b.idx()].push((a, len));
        }
        for list in &mut adj {
            list.sort_unstable_by_key(|&(id, _)| id);
        }
        Ok(OperationGraph { grid, nodes, adj, edge_count: edges.len() })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grid(&self) -> (u32, u32) {
        self.grid
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.idx()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, u32)] {
        &self.adj[id.idx()]
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Grid-cell Manhattan distance between two node positions (sensing).
    pub fn manhattan(&self, a: NodeId, b: NodeId) -> u32 {
        let pa = self.nodes[a.idx()].pos;
        let pb = self.nodes[b.idx()].pos;
        pa.0.abs_diff(pb.0) + pa.1.abs_diff(pb.1)
    }
}

/// Directed hazard-propagation edges with base spread rates in [0,1].
#[derive(Clone, Debug)]
pub struct SpreadGraph {
    n: usize,
    outgoing: Vec<Vec<(NodeId, f64)>>,
    incoming: Vec<Vec<(NodeId, f64)>>,
    edge_count: usize,
}

impl SpreadGraph {
    pub fn new(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, GraphError> {
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for &(from, to, rate) in edges {
            if from.idx() >= n {
                return Err(GraphError::UnknownEndpoint(from.0));
            }
            if to.idx() >= n {
                return Err(GraphError::UnknownEndpoint(to.0));
            }
            if from == to {
                return Err(GraphError::SelfLoop(from.0));
            }
            if !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
                return Err(GraphError::SpreadRateRange(from.0, to.0, rate));
            }
            if !seen.insert((from, to)) {
                return Err(GraphError::DuplicateEdge(from.0, to.0));
            }
            outgoing[from.idx()].push((to, rate));
            incoming[to.idx()].push((from, rate));
        }
        for list in outgoing.iter_mut().chain(incoming.iter_mut()) {
            list.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        }
        Ok(SpreadGraph { n, outgoing, incoming, edge_count: edges.len() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn outgoing(&self, from: NodeId) -> &[(NodeId, f64)] {
        &self.outgoing[from.idx()]
    }

    pub fn incoming(&self, to: NodeId) -> &[(NodeId, f64)] {
        &self.incoming[to.idx()]
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Base rate of the directed edge, if present.
    pub fn rate(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.outgoing[from.idx()]
            .binary_search_by(|probe| probe.0.cmp(&to))
            .ok()
            .map(|i| self.outgoing[from.idx()][i].1)
    }
}

/// All-pairs shortest path lengths over operation edges, plus next-hop
/// queries for movement. Built once per scenario and shared across episodes.
#[derive(Clone, Debug)]
pub struct DistanceMap {
    n: usize,
    dist: Vec<u64>,
}

const UNREACHABLE: u64 = u64::MAX;

impl DistanceMap {
    pub fn build(graph: &OperationGraph) -> Self {
        let n = graph.len();
        let mut dist = vec![UNREACHABLE; n * n];
        let mut heap = BinaryHeap::new();
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            heap.clear();
            heap.push(Reverse((0u64, src as u32)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > row[u as usize] {
                    continue;
                }
                for &(v, len) in graph.neighbors(NodeId(u)) {
                    let nd = d + u64::from(len);
                    if nd < row[v.idx()] {
                        row[v.idx()] = nd;
                        heap.push(Reverse((nd, v.0)));
                    }
                }
            }
        }
        DistanceMap { n, dist }
    }

    /// Shortest-path length, or `None` when the pair is disconnected.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<u64> {
        let d = self.dist[a.idx() * self.n + b.idx()];
        (d != UNREACHABLE).then_some(d)
    }

    /// First node on a shortest path `from -> to`: the neighbor minimizing
    /// edge length + remaining distance, ties broken by ascending NodeId.
    pub fn next_hop(&self, graph: &OperationGraph, from: NodeId, to: NodeId) -> Option<(NodeId, u32)> {
        if from == to {
            return None;
        }
        self.distance(from, to)?;
        let mut best: Option<(u64, NodeId, u32)> = None;
        for &(v, len) in graph.neighbors(from) {
            if let Some(rest) = self.distance(v, to) {
                let total = u64::from(len) + rest;
                if best.map_or(true, |(bt, bv, _)| total < bt || (total == bt && v < bv)) {
                    best = Some((total, v, len));
                }
            }
        }
        best.map(|(_, v, len)| (v, len))
    }
}

/// Snapshot of the node partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub normal: Vec<NodeId>,
    pub incident: Vec<NodeId>,
    pub scrapped: Vec<NodeId>,
}

/// Mutable per-node asset counts and statuses for one episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeStates {
    assets: Vec<u32>,
    status: Vec<NodeStatus>,
}

impl NodeStates {
    pub fn new(nodes: &[Node]) -> Self {
        NodeStates {
            assets: nodes.iter().map(|n| n.initial_assets).collect(),
            status: vec![NodeStatus::Normal; nodes.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn assets(&self, id: NodeId) -> u32 {
        self.assets[id.idx()]
    }

    pub fn status(&self, id: NodeId) -> NodeStatus {
        self.status[id.idx()]
    }

    /// Marks a Normal node as burning. No-op semantics are not provided:
    /// callers only ignite Normal nodes.
    pub fn ignite(&mut self, id: NodeId) {
        debug_assert_eq!(self.status[id.idx()], NodeStatus::Normal);
        self.status[id.idx()] = NodeStatus::Incident;
    }

    /// Returns a burning node to Normal (severity suppressed to zero).
    pub fn extinguish(&mut self, id: NodeId) {
        debug_assert_eq!(self.status[id.idx()], NodeStatus::Incident);
        self.status[id.idx()] = NodeStatus::Normal;
    }

    /// Destroys a node: status Scrapped (absorbing), assets zeroed.
    /// Returns the asset count lost.
    pub fn scrap(&mut self, id: NodeId) -> u32 {
        let lost = std::mem::take(&mut self.assets[id.idx()]);
        self.status[id.idx()] = NodeStatus::Scrapped;
        lost
    }

    /// Moves the full asset stock `from -> to`. Total count is conserved.
    pub fn move_assets(&mut self, from: NodeId, to: NodeId) -> Result<u32, MoveError> {
        if from.idx() >= self.len() {
            return Err(MoveError::UnknownNode(from.0));
        }
        if to.idx() >= self.len() {
            return Err(MoveError::UnknownNode(to.0));
        }
        if from == to {
            return Err(MoveError::SameNode(from.0));
        }
        if self.assets[from.idx()] == 0 {
            return Err(MoveError::NoAssets(from.0));
        }
        if self.status[to.idx()] == NodeStatus::Scrapped {
            return Err(MoveError::TargetScrapped(to.0));
        }
        let moved = std::mem::take(&mut self.assets[from.idx()]);
        self.assets[to.idx()] += moved;
        Ok(moved)
    }

    pub fn total_assets(&self) -> u64 {
        self.assets.iter().map(|&w| u64::from(w)).sum()
    }

    pub fn partition(&self) -> Partition {
        let mut p = Partition::default();
        for (i, &s) in self.status.iter().enumerate() {
            let id = NodeId(i as u32);
            match s {
                NodeStatus::Normal => p.normal.push(id),
                NodeStatus::Incident => p.incident.push(id),
                NodeStatus::Scrapped => p.scrapped.push(id),
            }
        }
        p
    }

    /// Nodes currently burning (the true incident set).
    pub fn incident_nodes(&self) -> Vec<NodeId> {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == NodeStatus::Incident)
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    pub fn incident_count(&self) -> usize {
        self.status.iter().filter(|&&s| s == NodeStatus::Incident).count()
    }
}

/// The two graphs plus precomputed distances, shared read-only by episodes.
#[derive(Clone, Debug)]
pub struct Graphs {
    pub op: OperationGraph,
    pub spread: SpreadGraph,
    pub dist: DistanceMap,
}
