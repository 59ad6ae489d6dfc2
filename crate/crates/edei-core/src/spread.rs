//! Incident severity dynamics and probabilistic spread.
//!
//! Each node carries a severity f(t) ∈ [0, τ]. Burning nodes grow
//! multiplicatively, f' = min(τ, f·(1+β)), unless suppressed, in which case
//! f' = max(0, f − suppression) with no growth that step. A node reaching τ
//! is destroyed (Scrapped, assets zeroed, severity pinned at τ); a node
//! suppressed to zero returns to Normal.
//!
//! Spread: every node with f > 0 threatens its outgoing spread-graph
//! neighbors with probability g = base_rate·f/τ. Threats on a Normal node
//! superpose as P = 1 − Π(1 − g), and ignition is sampled per step as an
//! independent Bernoulli draw. Newly ignited nodes start at f_seed.

use crate::graph::{NodeId, NodeStates, NodeStatus, SpreadGraph};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpreadError {
    #[error("severity threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("growth rate must be positive and finite, got {0}")]
    BadGrowth(f64),
    #[error("ignition seed severity must be in (0, tau], got {0}")]
    BadSeedSeverity(f64),
    #[error("negative suppression {amount} on node {node}")]
    NegativeSuppression { node: u32, amount: f64 },
    #[error("suppression vector length {got} does not match node count {want}")]
    SuppressionLength { got: usize, want: usize },
}

/// Severity dynamics constants (τ, β, f_seed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeverityParams {
    pub tau: f64,
    pub beta: f64,
    pub f_seed: f64,
}

impl SeverityParams {
    pub fn validate(&self) -> Result<(), SpreadError> {
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(SpreadError::BadThreshold(self.tau));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(SpreadError::BadGrowth(self.beta));
        }
        if !self.f_seed.is_finite() || self.f_seed <= 0.0 || self.f_seed > self.tau {
            return Err(SpreadError::BadSeedSeverity(self.f_seed));
        }
        Ok(())
    }
}

/// Per-node severity values, 0 for Normal nodes, pinned at τ once Scrapped.
#[derive(Clone, Debug, PartialEq)]
pub struct SeverityField {
    f: Vec<f64>,
}

impl SeverityField {
    pub fn zeros(n: usize) -> Self {
        SeverityField { f: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.f[id.idx()]
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// Seeds severity at a newly ignited node.
    pub fn ignite(&mut self, id: NodeId, f_seed: f64) {
        self.f[id.idx()] = f_seed;
    }
}

/// Nodes that changed status during a severity step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeverityOutcome {
    pub newly_scrapped: Vec<NodeId>,
    pub extinguished: Vec<NodeId>,
}

/// Advances severity one step for every Incident node, applying suppression,
/// growth, clamping, scrapping (assets zeroed), and recovery to Normal.
pub fn severity_step(
    field: &mut SeverityField,
    states: &mut NodeStates,
    suppression: &[f64],
    params: SeverityParams,
) -> Result<SeverityOutcome, SpreadError> {
    params.validate()?;
    if suppression.len() != field.len() {
        return Err(SpreadError::SuppressionLength { got: suppression.len(), want: field.len() });
    }
    for (i, &s) in suppression.iter().enumerate() {
        if !s.is_finite() || s < 0.0 {
            return Err(SpreadError::NegativeSuppression { node: i as u32, amount: s });
        }
    }
    let mut outcome = SeverityOutcome::default();
    for i in 0..field.len() {
        let id = NodeId(i as u32);
        if states.status(id) != NodeStatus::Incident {
            continue;
        }
        let f = field.f[i];
        let fp = if suppression[i] > 0.0 {
            (f - suppression[i]).max(0.0)
        } else {
            (f * (1.0 + params.beta)).min(params.tau)
        };
        field.f[i] = fp;
        if fp >= params.tau {
            states.scrap(id);
            outcome.newly_scrapped.push(id);
        } else if fp == 0.0 {
            states.extinguish(id);
            outcome.extinguished.push(id);
        }
    }
    Ok(outcome)
}

/// Probability that severity f_i pushes an incident across an edge with the
/// given base rate this step: clamp(base_rate·f_i/τ, 0, 1).
pub fn spread_probability(f_i: f64, tau: f64, base_rate: f64) -> f64 {
    (base_rate * f_i / tau).clamp(0.0, 1.0)
}

/// Superposed ignition probability from independent sources:
/// P = 1 − Π(1 − g).
pub fn superpose(rates: impl IntoIterator<Item = f64>) -> f64 {
    let survive: f64 = rates.into_iter().map(|g| 1.0 - g).product();
    1.0 - survive
}

/// The n×n spread matrix: severities on the diagonal, per-edge spread
/// probabilities off-diagonal (zero without an edge), rebuilt each step.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SpreadMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.data[i.idx() * self.n + j.idx()]
    }
}

pub fn build_spread_matrix(field: &SeverityField, spread: &SpreadGraph, tau: f64) -> SpreadMatrix {
    let n = field.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = field.f[i];
        let from = NodeId(i as u32);
        for &(to, rate) in spread.outgoing(from) {
            data[i * n + to.idx()] = spread_probability(field.f[i], tau, rate);
        }
    }
    SpreadMatrix { n, data }
}

/// Superposed probability that Normal node `j` ignites this step. Zero for
/// non-Normal nodes (only Normal nodes are ignition candidates).
pub fn ignition_probability(
    j: NodeId,
    field: &SeverityField,
    states: &NodeStates,
    spread: &SpreadGraph,
    tau: f64,
) -> f64 {
    if states.status(j) != NodeStatus::Normal {
        return 0.0;
    }
    superpose(
        spread
            .incoming(j)
            .iter()
            .filter(|&&(src, _)| field.get(src) > 0.0)
            .map(|&(src, rate)| spread_probability(field.get(src), tau, rate)),
    )
}

/// Samples ignition for every Normal node (ascending NodeId, one Bernoulli
/// draw per node with positive superposed probability). Newly ignited nodes
/// are seeded at f_seed and marked Incident.
pub fn spread_step(
    field: &mut SeverityField,
    states: &mut NodeStates,
    spread: &SpreadGraph,
    params: SeverityParams,
    rng: &mut impl Rng,
) -> Vec<NodeId> {
    let mut ignited = Vec::new();
    for j in 0..field.len() {
        let id = NodeId(j as u32);
        let p = ignition_probability(id, field, states, spread, params.tau);
        if p > 0.0 && rng.random::<f64>() < p {
            states.ignite(id);
            field.ignite(id, params.f_seed);
            ignited.push(id);
        }
    }
    ignited
}
