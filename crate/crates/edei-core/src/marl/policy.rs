//! Scripted baseline policies.

use rand::Rng;

use crate::env::World;
use crate::graph::NodeId;

/// Deterministic baseline. With known incidents it picks the reachable
/// incident node maximizing assets over distance; otherwise the open
/// assignment with the earliest deadline, nearest first; ties to the
/// smaller node id. With nothing to do it holds position.
pub fn greedy_action(world: &World, agent: usize) -> NodeId {
    let pos = world.agents()[agent].pos;
    let dist = &world.graphs().dist;

    let mut best_incident: Option<(f64, NodeId)> = None;
    for (i, &known) in world.known_incident().iter().enumerate() {
        if !known {
            continue;
        }
        let id = NodeId(i as u32);
        let Some(d) = dist.distance(pos, id) else { continue };
        let score = world.nodes().assets(id) as f64 / d.max(1) as f64;
        let better = match best_incident {
            None => true,
            Some((best, at)) => score > best || (score == best && id < at),
        };
        if better {
            best_incident = Some((score, id));
        }
    }
    if let Some((_, id)) = best_incident {
        return id;
    }

    let mut best_assignment: Option<(u32, u64, NodeId)> = None;
    for idx in world.log().open_indices() {
        let item = world.log().item(idx);
        let Some(d) = dist.distance(pos, item.node) else { continue };
        let key = (item.deadline, d, item.node);
        if best_assignment.map_or(true, |k| key < k) {
            best_assignment = Some(key);
        }
    }
    let choice = best_assignment.map_or(pos, |(_, _, id)| id);
    // Holding position is only legal when nothing is reachable at all.
    let valid = world.valid_actions(agent);
    if valid.contains(&choice) {
        choice
    } else {
        valid[0]
    }
}

/// Uniform choice over the agent's valid actions.
pub fn random_action(world: &World, agent: usize, rng: &mut impl Rng) -> NodeId {
    let valid = world.valid_actions(agent);
    valid[rng.random_range(0..valid.len())]
}
