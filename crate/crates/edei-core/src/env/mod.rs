//! The multi-agent emergency environment: a partially observable Markov
//! game over one scenario.
//!
//! Each step is one atomic transaction: retarget, move one length unit,
//! work (suppress, salvage, or progress assignments), evolve severities,
//! sample spread, apply failure rules, share perception, score the team
//! reward, and advance the clock. Agents share all knowledge after the
//! perception phase, so the world keeps a single belief state (`known_f`,
//! `known_incident`) rather than per-agent copies.

pub mod obs;
pub mod reward;

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assign::AssignmentLog;
use crate::graph::{Graphs, NodeId, NodeStates, NodeStatus};
use crate::predictor::PredictionSet;
use crate::scenario::ScenarioConfig;
use crate::seed;
use crate::spread::{severity_step, spread_step, SeverityField};

const TAG_WORLD: u64 = 0xE0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("episode already terminated")]
    Terminated,
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
    #[error("agent {agent} target {node} is not a valid action")]
    InvalidAction { agent: usize, node: u32 },
}

/// In-transit marker: the agent committed to the edge toward `to` and
/// arrives when `remaining` length units have been walked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hop {
    pub to: NodeId,
    pub remaining: u32,
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub pos: NodeId,
    pub target: NodeId,
    pub hop: Option<Hop>,
    /// The agent has targeted an open assignment at least once.
    pub assignment_duty_seen: bool,
    /// The agent later retargeted an incident node: it switched duty.
    pub duty_switched: bool,
}

/// Everything observable about the step that just executed.
#[derive(Clone, Debug)]
pub struct StepInfo {
    /// Step index the actions were applied at (clock before increment).
    pub t: u32,
    pub reward: f64,
    pub w_succ: f64,
    pub w_is: f64,
    pub w_r: f64,
    /// Prediction surplus |T| - |V^f| after the step.
    pub prediction_gap: i64,
    pub newly_ignited: Vec<NodeId>,
    pub newly_scrapped: Vec<NodeId>,
    /// Assignment indices completed this step.
    pub completed: Vec<usize>,
    /// Assignment indices failed this step (deadline or destruction).
    pub failed: Vec<usize>,
    pub done: bool,
    pub incident_count: usize,
    pub done_count: usize,
    pub failed_count: usize,
}

pub struct World {
    cfg: Arc<ScenarioConfig>,
    graphs: Arc<Graphs>,
    clock: u32,
    nodes: NodeStates,
    severity: SeverityField,
    log: AssignmentLog,
    agents: Vec<AgentState>,
    /// Shared belief: last severity each node was sensed at.
    known_f: Vec<f64>,
    /// Shared belief: node was an incident when last sensed.
    known_incident: Vec<bool>,
    prediction: PredictionSet,
    /// Node carried an assignment that failed by deadline; excluded from V^r.
    deadline_expired: Vec<bool>,
    w_r_prev: f64,
    rng: ChaCha8Rng,
    terminated: bool,
}

impl World {
    /// Fresh episode: agents at their start nodes, initial incidents ignited
    /// at f_seed, assignments pending, and one perception pass so nearby
    /// state is known from the start.
    pub fn reset(cfg: Arc<ScenarioConfig>, graphs: Arc<Graphs>, seed_value: u64) -> World {
        let n = cfg.n_nodes();
        let mut nodes = NodeStates::new(&cfg.initial_nodes());
        let mut severity = SeverityField::zeros(n);
        for &inc in &cfg.initial_incidents {
            nodes.ignite(NodeId(inc));
            severity.ignite(NodeId(inc), cfg.f_seed);
        }
        let issued: Vec<(NodeId, u32, u32)> = cfg
            .assignments
            .iter()
            .map(|&(node, deadline, value)| (NodeId(node), deadline, value))
            .collect();
        let log = AssignmentLog::new(n, &issued, cfg.ct_assign)
            .expect("validated scenario cannot fail assignment construction");
        let agents = cfg
            .agent_start
            .iter()
            .map(|&s| AgentState {
                pos: NodeId(s),
                target: NodeId(s),
                hop: None,
                assignment_duty_seen: false,
                duty_switched: false,
            })
            .collect();
        let deadline_expired = vec![false; n];
        let w_r_prev = reward::reward_remaining(&nodes, &deadline_expired);
        let mut world = World {
            cfg,
            graphs,
            clock: 0,
            nodes,
            severity,
            log,
            agents,
            known_f: vec![0.0; n],
            known_incident: vec![false; n],
            prediction: PredictionSet::empty(),
            deadline_expired,
            w_r_prev,
            rng: seed::derive_rng(seed_value, TAG_WORLD),
            terminated: false,
        };
        world.perceive_and_share();
        world
    }

    pub fn cfg(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn graphs(&self) -> &Graphs {
        &self.graphs
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn nodes(&self) -> &NodeStates {
        &self.nodes
    }

    pub fn severity(&self) -> &SeverityField {
        &self.severity
    }

    pub fn log(&self) -> &AssignmentLog {
        &self.log
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn known_f(&self) -> &[f64] {
        &self.known_f
    }

    pub fn known_incident(&self) -> &[bool] {
        &self.known_incident
    }

    pub fn deadline_expired(&self) -> &[bool] {
        &self.deadline_expired
    }

    pub fn prediction(&self) -> &PredictionSet {
        &self.prediction
    }

    /// Installs the incident prediction set the policies act with. Plain
    /// reactive policies leave it empty.
    pub fn set_prediction(&mut self, prediction: PredictionSet) {
        self.prediction = prediction;
    }

    /// Agents that switched from assignment duty to incident recovery.
    pub fn duty_switch_count(&self) -> usize {
        self.agents.iter().filter(|a| a.duty_switched).count()
    }

    /// Valid targets: nodes with open assignments plus known incident
    /// nodes; when that set is empty the agent may only hold position.
    pub fn valid_actions(&self, agent: usize) -> Vec<NodeId> {
        let mask = self.action_mask_raw();
        let ids: Vec<NodeId> = mask
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m)
            .map(|(i, _)| NodeId(i as u32))
            .collect();
        if ids.is_empty() {
            vec![self.agents[agent].pos]
        } else {
            ids
        }
    }

    fn action_mask_raw(&self) -> Vec<bool> {
        let mut mask = vec![false; self.cfg.n_nodes()];
        for idx in self.log.open_indices() {
            mask[self.log.item(idx).node.idx()] = true;
        }
        for (i, &inc) in self.known_incident.iter().enumerate() {
            if inc {
                mask[i] = true;
            }
        }
        mask
    }

    /// Per-node action mask for one agent; falls back to the hold-position
    /// bit when nothing is valid, so at least one action is always allowed.
    pub fn action_mask(&self, agent: usize) -> Vec<bool> {
        let mut mask = self.action_mask_raw();
        if mask.iter().all(|&m| !m) {
            mask[self.agents[agent].pos.idx()] = true;
        }
        mask
    }

    pub fn step(&mut self, actions: &[NodeId]) -> Result<StepInfo, StepError> {
        if self.terminated {
            return Err(StepError::Terminated);
        }
        if actions.len() != self.agents.len() {
            return Err(StepError::WrongActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        // Validate the whole joint action before touching anything.
        for (i, &action) in actions.iter().enumerate() {
            if !self.valid_actions(i).contains(&action) {
                return Err(StepError::InvalidAction { agent: i, node: action.0 });
            }
        }

        let cfg = Arc::clone(&self.cfg);
        let graphs = Arc::clone(&self.graphs);
        let n = cfg.n_nodes();
        let params = cfg.severity_params();

        // (1) Retarget and track duty switches.
        for (agent, &action) in self.agents.iter_mut().zip(actions) {
            agent.target = action;
            let open_assignment = self
                .log
                .at_node(action)
                .map(|idx| self.log.item(idx).status.is_open())
                .unwrap_or(false);
            if open_assignment {
                agent.assignment_duty_seen = true;
            } else if self.known_incident[action.idx()] && agent.assignment_duty_seen {
                agent.duty_switched = true;
            }
        }

        // (2) Move one length unit, finishing a committed hop first.
        for agent in &mut self.agents {
            if let Some(hop) = &mut agent.hop {
                hop.remaining -= 1;
                if hop.remaining == 0 {
                    agent.pos = hop.to;
                    agent.hop = None;
                }
            } else if agent.pos != agent.target {
                if let Some((next, len)) = graphs.dist.next_hop(&graphs.op, agent.pos, agent.target)
                {
                    if len <= 1 {
                        agent.pos = next;
                    } else {
                        agent.hop = Some(Hop { to: next, remaining: len - 1 });
                    }
                }
            }
        }

        // (3) Arrived agents work, grouped per node so effort stacks.
        let mut arrived = vec![0u32; n];
        for agent in &self.agents {
            if agent.hop.is_none() && agent.pos == agent.target {
                arrived[agent.pos.idx()] += 1;
            }
        }
        let mut suppression = vec![0.0; n];
        let mut completed = Vec::new();
        for i in 0..n {
            if arrived[i] == 0 {
                continue;
            }
            let id = NodeId(i as u32);
            match self.nodes.status(id) {
                NodeStatus::Incident => {
                    suppression[i] = f64::from(arrived[i]) * cfg.suppression;
                }
                NodeStatus::Normal => {
                    let Some(idx) = self.log.at_node(id) else { continue };
                    if !self.log.item(idx).status.is_open() {
                        continue;
                    }
                    let salvage_target = if self.prediction.contains(id)
                        && self.nodes.assets(id) > 0
                    {
                        nearest_support(&graphs, &self.nodes, id)
                    } else {
                        None
                    };
                    if let Some(depot) = salvage_target {
                        self.nodes
                            .move_assets(id, depot)
                            .expect("salvage target checked non-scrapped with assets present");
                    } else if self.log.apply_work(idx, arrived[i], self.clock) {
                        completed.push(idx);
                    }
                }
                NodeStatus::Scrapped => {}
            }
        }

        // (4) Severity dynamics, then (5) spread sampling.
        let outcome = severity_step(&mut self.severity, &mut self.nodes, &suppression, params)
            .expect("suppression vector is nonnegative by construction");
        let newly_ignited = spread_step(
            &mut self.severity,
            &mut self.nodes,
            &graphs.spread,
            params,
            &mut self.rng,
        );

        // (6) Failure rules, with the post-step clock so deadlines are
        // inclusive.
        let mut failed = self.log.tick_deadlines(self.clock + 1);
        for &idx in &failed {
            self.deadline_expired[self.log.item(idx).node.idx()] = true;
        }
        failed.extend(self.log.fail_on_incident(&outcome.newly_scrapped));
        failed.sort_unstable();

        // (7) Share what anyone can sense.
        self.perceive_and_share();

        // (8) Team reward.
        let w_succ = reward::reward_success(
            &self.log,
            &self.severity,
            &self.nodes,
            &graphs.spread,
            &self.prediction,
            self.clock,
            params.tau,
        );
        let mut w_is = 0.0;
        for a in 0..self.agents.len() {
            let pos = self.agents[a].pos;
            w_is += reward::reward_spread(
                &self.log,
                &self.severity,
                &graphs.dist,
                pos,
                self.clock,
                &mut self.rng,
            );
        }
        w_is /= self.agents.len() as f64;
        let w_r = reward::reward_remaining(&self.nodes, &self.deadline_expired);
        let reward = reward::team_reward(w_succ, w_is, w_r - self.w_r_prev);
        self.w_r_prev = w_r;

        // (9) Advance the clock and decide termination.
        let t = self.clock;
        self.clock += 1;
        let incident_count = self.nodes.incident_count();
        self.terminated =
            self.clock >= cfg.t_max || (!self.log.any_open() && incident_count == 0);

        let counts = self.log.counts();
        Ok(StepInfo {
            t,
            reward,
            w_succ,
            w_is,
            w_r,
            prediction_gap: self.prediction.len() as i64 - incident_count as i64,
            newly_ignited,
            newly_scrapped: outcome.newly_scrapped,
            completed,
            failed,
            done: self.terminated,
            incident_count,
            done_count: counts.done,
            failed_count: counts.failed,
        })
    }

    /// Algorithm: every node within any agent's sensing radius refreshes the
    /// shared belief about its severity and incident status.
    fn perceive_and_share(&mut self) {
        let radius = self.cfg.sense_radius;
        for i in 0..self.cfg.n_nodes() {
            let id = NodeId(i as u32);
            let sensed = self
                .agents
                .iter()
                .any(|a| self.graphs.op.manhattan(a.pos, id) <= radius);
            if sensed {
                self.known_f[i] = self.severity.get(id);
                self.known_incident[i] = self.nodes.status(id) == NodeStatus::Incident;
            }
        }
    }
}

/// Closest intact support depot to `from` (shortest path, ties to the
/// smaller node id), if any is reachable.
fn nearest_support(graphs: &Graphs, nodes: &NodeStates, from: NodeId) -> Option<NodeId> {
    graphs
        .op
        .nodes()
        .iter()
        .filter(|n| {
            n.category == crate::graph::AssetCategory::Support
                && n.id != from
                && nodes.status(n.id) != NodeStatus::Scrapped
        })
        .filter_map(|n| graphs.dist.distance(from, n.id).map(|d| (d, n.id)))
        .min()
        .map(|(_, id)| id)
}
