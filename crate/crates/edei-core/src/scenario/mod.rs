//! Scenario configuration: the complete, serializable description of one
//! simulation world (site layout, spread couplings, assignments, agents,
//! horizon, and metric constants).
//!
//! [`format`] holds the on-disk text schema, [`generate`] the seeded site
//! generators. A config is inert data; [`ScenarioConfig::build_graphs`]
//! turns it into the runtime graph bundle.

pub mod format;
pub mod generate;

use thiserror::Error;

use crate::graph::{
    AssetCategory, GraphError, Graphs, Node, NodeId, OperationGraph, SpreadGraph,
};
use crate::spread::{SeverityParams, SpreadError};

pub use format::{load, read_file, save, write_file};
pub use generate::{table_cells, ScenarioKind};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario name must be nonempty [a-zA-Z0-9._-]+, got {0:?}")]
    BadName(String),
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Spread(#[from] SpreadError),
    #[error("scenario needs at least one agent")]
    NoAgents,
    #[error("agent start {0} is not a node id")]
    AgentStartOutOfRange(u32),
    #[error("initial incident {0} is not a node id")]
    IncidentOutOfRange(u32),
    #[error("initial incident {0} listed twice")]
    DuplicateIncident(u32),
    #[error("assignment node {0} is not a node id")]
    AssignmentOutOfRange(u32),
    #[error("node {0} carries more than one assignment")]
    DuplicateAssignment(u32),
    #[error("assignment on node {0} has zero value")]
    ZeroAssignmentValue(u32),
    #[error("cannot generate scenario: {0}")]
    Generate(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One site node as configured: grid position, initial assets, category.
/// The node id is its index in [`ScenarioConfig::nodes`].
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub x: u32,
    pub y: u32,
    pub assets: u32,
    pub category: AssetCategory,
}

/// Full description of one scenario. Field order here is the canonical
/// serialization order of the text format.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Grid extent (width, height); positions satisfy x < width, y < height.
    pub grid: (u32, u32),
    /// Episode horizon in steps.
    pub t_max: u32,
    /// Severity threshold at which a node is destroyed.
    pub tau: f64,
    /// Per-step severity growth rate.
    pub beta: f64,
    /// Severity assigned to a newly ignited node.
    pub f_seed: f64,
    /// Manhattan radius within which agents observe true node state.
    pub sense_radius: u32,
    /// Severity removed per agent per step when suppressing.
    pub suppression: f64,
    /// Completion time of one assignment for a single agent, in steps.
    pub ct_assign: u32,
    /// Takt denominator for the throughput metric.
    pub delta_t: u32,
    /// Number of flow line segments for the throughput metric.
    pub k_line: u32,
    /// Checked item count for the inventory carry metric.
    pub n_checked: u32,
    /// Agent start nodes, one entry per agent.
    pub agent_start: Vec<u32>,
    /// Nodes on fire at t = 0.
    pub initial_incidents: Vec<u32>,
    pub nodes: Vec<NodeSpec>,
    /// Undirected traversal edges (a, b, length).
    pub edges: Vec<(u32, u32, u32)>,
    /// Directed spread couplings (from, to, base_rate).
    pub spread_edges: Vec<(u32, u32, f64)>,
    /// Primary assignments (node, deadline, value).
    pub assignments: Vec<(u32, u32, u32)>,
}

impl ScenarioConfig {
    pub fn severity_params(&self) -> SeverityParams {
        SeverityParams { tau: self.tau, beta: self.beta, f_seed: self.f_seed }
    }

    /// Largest asset or assignment value in the scenario, at least 1.
    /// Used as the normalization constant for observations.
    pub fn w_max(&self) -> f64 {
        let node_max = self.nodes.iter().map(|n| n.assets).max().unwrap_or(0);
        let assign_max = self.assignments.iter().map(|a| a.2).max().unwrap_or(0);
        node_max.max(assign_max).max(1) as f64
    }

    pub fn n_agents(&self) -> usize {
        self.agent_start.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Checks every structural invariant that does not need graph search:
    /// scalar positivity, reference ranges, uniqueness. Graph-shape errors
    /// (bad positions, duplicate edges) surface through the graph builders,
    /// which this also exercises.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return Err(ScenarioError::BadName(self.name.clone()));
        }
        for (field, value) in [
            ("t_max", self.t_max),
            ("ct_assign", self.ct_assign),
            ("delta_t", self.delta_t),
            ("k_line", self.k_line),
            ("n_checked", self.n_checked),
        ] {
            if value == 0 {
                return Err(ScenarioError::NonPositive { field });
            }
        }
        if self.suppression <= 0.0 || !self.suppression.is_finite() {
            return Err(ScenarioError::NonPositive { field: "suppression" });
        }
        self.severity_params().validate()?;

        let n = self.nodes.len() as u32;
        if self.agent_start.is_empty() {
            return Err(ScenarioError::NoAgents);
        }
        for &s in &self.agent_start {
            if s >= n {
                return Err(ScenarioError::AgentStartOutOfRange(s));
            }
        }
        let mut seen_incident = vec![false; n as usize];
        for &i in &self.initial_incidents {
            if i >= n {
                return Err(ScenarioError::IncidentOutOfRange(i));
            }
            if std::mem::replace(&mut seen_incident[i as usize], true) {
                return Err(ScenarioError::DuplicateIncident(i));
            }
        }
        let mut seen_assign = vec![false; n as usize];
        for &(node, _deadline, value) in &self.assignments {
            if node >= n {
                return Err(ScenarioError::AssignmentOutOfRange(node));
            }
            if std::mem::replace(&mut seen_assign[node as usize], true) {
                return Err(ScenarioError::DuplicateAssignment(node));
            }
            if value == 0 {
                return Err(ScenarioError::ZeroAssignmentValue(node));
            }
        }

        self.build_op_graph()?;
        self.build_spread_graph()?;
        Ok(())
    }

    fn build_op_graph(&self) -> Result<OperationGraph, ScenarioError> {
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, spec)| Node {
                id: NodeId(i as u32),
                pos: (spec.x, spec.y),
                initial_assets: spec.assets,
                category: spec.category,
            })
            .collect();
        let edges: Vec<(NodeId, NodeId, u32)> = self
            .edges
            .iter()
            .map(|&(a, b, len)| (NodeId(a), NodeId(b), len))
            .collect();
        Ok(OperationGraph::new(self.grid, nodes, &edges)?)
    }

    fn build_spread_graph(&self) -> Result<SpreadGraph, ScenarioError> {
        let edges: Vec<(NodeId, NodeId, f64)> = self
            .spread_edges
            .iter()
            .map(|&(a, b, r)| (NodeId(a), NodeId(b), r))
            .collect();
        Ok(SpreadGraph::new(self.nodes.len(), &edges)?)
    }

    /// Builds the runtime graph bundle (traversal graph, spread graph, and
    /// all-pairs distances).
    pub fn build_graphs(&self) -> Result<Graphs, ScenarioError> {
        let op = self.build_op_graph()?;
        let spread = self.build_spread_graph()?;
        let dist = crate::graph::DistanceMap::build(&op);
        Ok(Graphs { op, spread, dist })
    }

    pub fn initial_nodes(&self) -> Vec<Node> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, spec)| Node {
                id: NodeId(i as u32),
                pos: (spec.x, spec.y),
                initial_assets: spec.assets,
                category: spec.category,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            name: "tiny".to_string(),
            grid: (4, 4),
            t_max: 20,
            tau: 1.0,
            beta: 0.2,
            f_seed: 0.1,
            sense_radius: 3,
            suppression: 0.25,
            ct_assign: 2,
            delta_t: 2,
            k_line: 1,
            n_checked: 2,
            agent_start: vec![0],
            initial_incidents: vec![3],
            nodes: vec![
                NodeSpec { x: 0, y: 0, assets: 100, category: AssetCategory::General },
                NodeSpec { x: 1, y: 0, assets: 200, category: AssetCategory::Flammable },
                NodeSpec { x: 0, y: 1, assets: 100, category: AssetCategory::Support },
                NodeSpec { x: 1, y: 1, assets: 150, category: AssetCategory::General },
            ],
            edges: vec![(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)],
            spread_edges: vec![(3, 1, 0.5), (1, 3, 0.4), (3, 2, 0.3)],
            assignments: vec![(1, 10, 200), (3, 15, 150)],
        }
    }

    #[test]
    fn valid_config_passes_and_builds() {
        let cfg = tiny_config();
        cfg.validate().unwrap();
        let graphs = cfg.build_graphs().unwrap();
        assert_eq!(graphs.op.len(), 4);
        assert_eq!(graphs.dist.distance(NodeId(0), NodeId(3)), Some(2));
        assert_eq!(graphs.spread.rate(NodeId(3), NodeId(1)), Some(0.5));
    }

    #[test]
    fn w_max_covers_nodes_and_assignments() {
        let mut cfg = tiny_config();
        assert_eq!(cfg.w_max(), 200.0);
        cfg.assignments[0].2 = 500;
        assert_eq!(cfg.w_max(), 500.0);
        cfg.nodes.clear();
        cfg.assignments.clear();
        assert_eq!(cfg.w_max(), 1.0);
    }

    #[test]
    fn validation_rejects_each_structural_defect() {
        let base = tiny_config();

        let mut c = base.clone();
        c.name = "bad name!".to_string();
        assert!(matches!(c.validate(), Err(ScenarioError::BadName(_))));

        let mut c = base.clone();
        c.t_max = 0;
        assert!(matches!(c.validate(), Err(ScenarioError::NonPositive { field: "t_max" })));

        let mut c = base.clone();
        c.suppression = 0.0;
        assert!(matches!(c.validate(), Err(ScenarioError::NonPositive { field: "suppression" })));

        let mut c = base.clone();
        c.f_seed = 2.0;
        assert!(matches!(c.validate(), Err(ScenarioError::Spread(_))));

        let mut c = base.clone();
        c.agent_start.clear();
        assert!(matches!(c.validate(), Err(ScenarioError::NoAgents)));

        let mut c = base.clone();
        c.agent_start = vec![9];
        assert!(matches!(c.validate(), Err(ScenarioError::AgentStartOutOfRange(9))));

        let mut c = base.clone();
        c.initial_incidents = vec![2, 2];
        assert!(matches!(c.validate(), Err(ScenarioError::DuplicateIncident(2))));

        let mut c = base.clone();
        c.assignments.push((1, 5, 50));
        assert!(matches!(c.validate(), Err(ScenarioError::DuplicateAssignment(1))));

        let mut c = base.clone();
        c.assignments[0].2 = 0;
        assert!(matches!(c.validate(), Err(ScenarioError::ZeroAssignmentValue(1))));

        let mut c = base.clone();
        c.edges.push((0, 3, 0));
        assert!(matches!(c.validate(), Err(ScenarioError::Graph(_))));

        let mut c = base.clone();
        c.spread_edges.push((0, 1, 1.5));
        assert!(matches!(c.validate(), Err(ScenarioError::Graph(_))));
    }
}
