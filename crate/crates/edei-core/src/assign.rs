//! Assignment lifecycle: the deadline-ordered work queue, completion record,
//! and the two failure rules (deadline passed, node destroyed).
//!
//! Each assignment sits at one node, is worth the node's asset count at issue
//! time, and must be completed by its deadline (inclusive: finishing at
//! t = et still counts). Work is measured in ticks; co-located agents stack,
//! so n agents finish a CT-tick assignment in ceil(CT/n) steps.

use crate::graph::NodeId;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignError {
    #[error("assignment node {0} out of range (node count {1})")]
    NodeOutOfRange(u32, usize),
    #[error("two assignments issued at node {0}")]
    DuplicateNode(u32),
    #[error("assignment work must be at least one tick")]
    ZeroWork,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AssignStatus {
    Pending,
    InProgress,
    Done,
    Failed,
}

impl AssignStatus {
    /// Still in the waiting set Λ (issued, neither Done nor Failed).
    pub fn is_open(self) -> bool {
        matches!(self, AssignStatus::Pending | AssignStatus::InProgress)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub node: NodeId,
    pub deadline: u32,
    pub value: u32,
    pub status: AssignStatus,
    pub remaining_work: u32,
    pub done_at: Option<u32>,
}

/// Per-step status counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub pending: usize,
    pub in_progress: usize,
    pub done: usize,
    pub failed: usize,
}

/// The assignment set O with its completion record ω(t).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentLog {
    items: Vec<Assignment>,
    by_node: Vec<Option<u32>>,
}

impl AssignmentLog {
    /// Issues assignments (at most one per node) with `work` ticks each.
    pub fn new(
        n_nodes: usize,
        issued: &[(NodeId, u32, u32)],
        work: u32,
    ) -> Result<Self, AssignError> {
        if work == 0 {
            return Err(AssignError::ZeroWork);
        }
        let mut by_node = vec![None; n_nodes];
        let mut items = Vec::with_capacity(issued.len());
        for (idx, &(node, deadline, value)) in issued.iter().enumerate() {
            if node.idx() >= n_nodes {
                return Err(AssignError::NodeOutOfRange(node.0, n_nodes));
            }
            if by_node[node.idx()].is_some() {
                return Err(AssignError::DuplicateNode(node.0));
            }
            by_node[node.idx()] = Some(idx as u32);
            items.push(Assignment {
                node,
                deadline,
                value,
                status: AssignStatus::Pending,
                remaining_work: work,
                done_at: None,
            });
        }
        Ok(AssignmentLog { items, by_node })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Assignment] {
        &self.items
    }

    pub fn item(&self, idx: usize) -> &Assignment {
        &self.items[idx]
    }

    /// The assignment issued at `node`, if any.
    pub fn at_node(&self, node: NodeId) -> Option<usize> {
        self.by_node.get(node.idx()).copied().flatten().map(|i| i as usize)
    }

    /// Indices of open (Pending or InProgress) assignments, ascending.
    pub fn open_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().enumerate().filter(|(_, a)| a.status.is_open()).map(|(i, _)| i)
    }

    pub fn any_open(&self) -> bool {
        self.items.iter().any(|a| a.status.is_open())
    }

    /// Open assignments sorted by ascending deadline, ties by NodeId.
    pub fn order_queue(&self) -> Vec<usize> {
        let mut order: Vec<usize> = self.open_indices().collect();
        order.sort_by_key(|&i| (self.items[i].deadline, self.items[i].node));
        order
    }

    /// Applies `amount` work ticks (one per co-located agent) at step `t`.
    /// Returns true when this call completes the assignment.
    pub fn apply_work(&mut self, idx: usize, amount: u32, t: u32) -> bool {
        let a = &mut self.items[idx];
        if !a.status.is_open() || amount == 0 {
            return false;
        }
        a.remaining_work = a.remaining_work.saturating_sub(amount);
        if a.remaining_work == 0 {
            a.status = AssignStatus::Done;
            a.done_at = Some(t);
            true
        } else {
            a.status = AssignStatus::InProgress;
            false
        }
    }

    /// Fails every open assignment whose deadline has passed (et < t).
    /// Call with the post-step clock so completion at t = et still counts.
    pub fn tick_deadlines(&mut self, t: u32) -> Vec<usize> {
        let mut failed = Vec::new();
        for (i, a) in self.items.iter_mut().enumerate() {
            if a.status.is_open() && a.deadline < t {
                a.status = AssignStatus::Failed;
                failed.push(i);
            }
        }
        failed
    }

    /// Fails open assignments whose node was just destroyed.
    pub fn fail_on_incident(&mut self, newly_scrapped: &[NodeId]) -> Vec<usize> {
        let mut failed = Vec::new();
        for &node in newly_scrapped {
            if let Some(idx) = self.at_node(node) {
                let a = &mut self.items[idx];
                if a.status.is_open() {
                    a.status = AssignStatus::Failed;
                    failed.push(idx);
                }
            }
        }
        failed.sort_unstable();
        failed
    }

    /// Σ value over Done assignments.
    pub fn completion_value(&self) -> u64 {
        self.items
            .iter()
            .filter(|a| a.status == AssignStatus::Done)
            .map(|a| u64::from(a.value))
            .sum()
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for a in &self.items {
            match a.status {
                AssignStatus::Pending => c.pending += 1,
                AssignStatus::InProgress => c.in_progress += 1,
                AssignStatus::Done => c.done += 1,
                AssignStatus::Failed => c.failed += 1,
            }
        }
        c
    }
}
