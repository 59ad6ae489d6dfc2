//! Observation and state encodings for the learning policies.
//!
//! Every agent sees the same five shared per-node channels (the team pools
//! its knowledge), its own position one-hot, and the position and target
//! one-hots of every other agent. The centralized critic state is the node
//! channels plus position and target one-hots for all agents.

use super::World;
use crate::scenario::ScenarioConfig;

/// Shared node channels per node.
pub const NODE_CHANNELS: usize = 5;

pub fn obs_len(cfg: &ScenarioConfig) -> usize {
    let n = cfg.n_nodes();
    let a = cfg.n_agents();
    NODE_CHANNELS * n + n + (a - 1) * 2 * n
}

pub fn state_len(cfg: &ScenarioConfig) -> usize {
    let n = cfg.n_nodes();
    let a = cfg.n_agents();
    NODE_CHANNELS * n + a * 2 * n
}

/// The five channels, node-major: believed severity, predicted incident
/// probability, open assignment value, open time-to-deadline, and assets,
/// each scaled into [0, 1].
fn node_channels(world: &World, out: &mut Vec<f64>) {
    let cfg = world.cfg();
    let n = cfg.n_nodes();
    let w_max = cfg.w_max() as f64;
    let tau = cfg.tau;
    let t = world.clock();
    for i in 0..n {
        let id = crate::graph::NodeId(i as u32);
        out.push(world.known_f()[i] / tau);
        out.push(world.prediction().get(id).unwrap_or(0.0));
        let open = world
            .log()
            .at_node(id)
            .map(|idx| world.log().item(idx))
            .filter(|item| item.status.is_open());
        out.push(open.map_or(0.0, |item| f64::from(item.value) / w_max));
        out.push(open.map_or(0.0, |item| {
            let rem = item.deadline.saturating_sub(t);
            (f64::from(rem) / f64::from(cfg.t_max)).min(1.0)
        }));
        out.push(world.nodes().assets(id) as f64 / w_max);
    }
}

fn push_one_hot(out: &mut Vec<f64>, n: usize, idx: usize) {
    let base = out.len();
    out.resize(base + n, 0.0);
    out[base + idx] = 1.0;
}

pub fn observation(world: &World, agent: usize) -> Vec<f64> {
    let cfg = world.cfg();
    let n = cfg.n_nodes();
    let mut out = Vec::with_capacity(obs_len(cfg));
    node_channels(world, &mut out);
    push_one_hot(&mut out, n, world.agents()[agent].pos.idx());
    for (i, other) in world.agents().iter().enumerate() {
        if i == agent {
            continue;
        }
        push_one_hot(&mut out, n, other.pos.idx());
        push_one_hot(&mut out, n, other.target.idx());
    }
    debug_assert_eq!(out.len(), obs_len(cfg));
    out
}

pub fn state_vector(world: &World) -> Vec<f64> {
    let cfg = world.cfg();
    let n = cfg.n_nodes();
    let mut out = Vec::with_capacity(state_len(cfg));
    node_channels(world, &mut out);
    for agent in world.agents() {
        push_one_hot(&mut out, n, agent.pos.idx());
        push_one_hot(&mut out, n, agent.target.idx());
    }
    debug_assert_eq!(out.len(), state_len(cfg));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::World;
    use crate::graph::AssetCategory;
    use crate::predictor::PredictionSet;
    use crate::scenario::NodeSpec;
    use std::sync::Arc;

    fn two_agent_world() -> World {
        let cfg = crate::scenario::ScenarioConfig {
            name: "obs-test".to_string(),
            grid: (4, 1),
            t_max: 40,
            tau: 1.0,
            beta: 0.2,
            f_seed: 0.4,
            sense_radius: 3,
            suppression: 0.25,
            ct_assign: 2,
            delta_t: 2,
            k_line: 1,
            n_checked: 2,
            agent_start: vec![0, 3],
            initial_incidents: vec![2],
            nodes: (0..4)
                .map(|i| NodeSpec {
                    x: i,
                    y: 0,
                    assets: 50 + 50 * i,
                    category: AssetCategory::General,
                })
                .collect(),
            edges: (0..3).map(|i| (i, i + 1, 1)).collect(),
            spread_edges: vec![],
            assignments: vec![(1, 20, 200)],
        };
        cfg.validate().unwrap();
        let graphs = Arc::new(cfg.build_graphs().unwrap());
        World::reset(Arc::new(cfg), graphs, 7)
    }

    #[test]
    fn lengths_match_the_layout() {
        let w = two_agent_world();
        let cfg = w.cfg();
        assert_eq!(obs_len(cfg), 5 * 4 + 4 + 1 * 2 * 4);
        assert_eq!(state_len(cfg), 5 * 4 + 2 * 2 * 4);
        assert_eq!(observation(&w, 0).len(), obs_len(cfg));
        assert_eq!(observation(&w, 1).len(), obs_len(cfg));
        assert_eq!(state_vector(&w).len(), state_len(cfg));
    }

    #[test]
    fn values_are_finite_and_unit_scaled() {
        let mut w = two_agent_world();
        w.set_prediction(PredictionSet::from_entries(vec![(3, 0.8)]));
        for _ in 0..5 {
            if w.terminated() {
                break;
            }
            for v in state_vector(&w)
                .into_iter()
                .chain(observation(&w, 0))
                .chain(observation(&w, 1))
            {
                assert!(v.is_finite());
                assert!((0.0..=1.0).contains(&v), "value {v} out of range");
            }
            let a0 = w.valid_actions(0)[0];
            let a1 = w.valid_actions(1)[0];
            w.step(&[a0, a1]).unwrap();
        }
    }

    #[test]
    fn node_channels_carry_the_expected_entries() {
        let mut w = two_agent_world();
        w.set_prediction(PredictionSet::from_entries(vec![(2, 0.6)]));
        let s = state_vector(&w);
        // Node 2 burns at f_seed = 0.4 and everyone senses it.
        assert_eq!(s[2 * 5], 0.4);
        assert_eq!(s[2 * 5 + 1], 0.6);
        // Node 1 holds the open assignment: value 200 = w_max, 20/40 steps.
        assert_eq!(s[5 + 2], 1.0);
        assert_eq!(s[5 + 3], 0.5);
        // Assets channel: node 0 has 50 of w_max 200.
        assert_eq!(s[4], 0.25);
        // Node 3 has no assignment: value and deadline channels are zero.
        assert_eq!(s[3 * 5 + 2], 0.0);
        assert_eq!(s[3 * 5 + 3], 0.0);
    }

    #[test]
    fn one_hot_blocks_track_positions_and_targets() {
        let w = two_agent_world();
        let s = state_vector(&w);
        let base = 5 * 4;
        // Agent 0 at node 0, agent 1 at node 3; targets equal positions.
        assert_eq!(s[base], 1.0);
        assert_eq!(s[base + 4], 1.0);
        assert_eq!(s[base + 8 + 3], 1.0);
        assert_eq!(s[base + 12 + 3], 1.0);

        let o0 = observation(&w, 0);
        let o1 = observation(&w, 1);
        // Own position block first, then the other agent's pos and target.
        assert_eq!(o0[base], 1.0);
        assert_eq!(o0[base + 4 + 3], 1.0);
        assert_eq!(o1[base + 3], 1.0);
        assert_eq!(o1[base + 4], 1.0);
    }

    #[test]
    fn empty_prediction_zeroes_the_channel() {
        let w = two_agent_world();
        let s = state_vector(&w);
        for i in 0..4 {
            assert_eq!(s[i * 5 + 1], 0.0);
        }
    }
}
