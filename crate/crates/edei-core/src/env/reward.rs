//! Team reward components: the prediction-aware success score, the spread
//! urgency penalty built on three rank orderings, and the surviving-asset
//! score.
//!
//! The per-step team reward is
//!   r = 0.01 * W_succ - 0.01 * W_is + 0.001 * (W_r - W_r_prev)
//! delivered identically to every agent.

use rand::Rng;

use crate::assign::{AssignStatus, AssignmentLog};
use crate::graph::{DistanceMap, NodeId, NodeStates, NodeStatus, SpreadGraph};
use crate::predictor::PredictionSet;
use crate::spread::{ignition_probability, SeverityField};

pub const ALPHA_SUCCESS: f64 = 0.01;
pub const ALPHA_SPREAD: f64 = 0.01;
pub const ALPHA_REMAINING: f64 = 0.001;

pub fn team_reward(w_succ: f64, w_is: f64, delta_w_r: f64) -> f64 {
    ALPHA_SUCCESS * w_succ - ALPHA_SPREAD * w_is + ALPHA_REMAINING * delta_w_r
}

/// Steps remaining until `deadline` as seen at step `t`, floored at 1 so
/// reciprocal urgency terms stay finite.
pub fn remaining_steps(deadline: u32, t: u32) -> f64 {
    deadline.saturating_sub(t).max(1) as f64
}

/// One open assignment as the urgency rankings see it.
#[derive(Clone, Debug)]
pub struct UrgencyItem {
    pub assignment: usize,
    pub node: NodeId,
    pub deadline: u32,
    pub value: u32,
    pub severity: f64,
    /// Shortest-path distance from the ranking agent; unreachable nodes
    /// carry u64::MAX and sort last.
    pub distance: u64,
}

/// Snapshot of the open assignments for one agent's point of view.
pub fn urgency_items(
    log: &AssignmentLog,
    severity: &SeverityField,
    dist: &DistanceMap,
    agent_pos: NodeId,
) -> Vec<UrgencyItem> {
    log.open_indices()
        .map(|idx| {
            let a = log.item(idx);
            UrgencyItem {
                assignment: idx,
                node: a.node,
                deadline: a.deadline,
                value: a.value,
                severity: severity.get(a.node),
                distance: dist.distance(agent_pos, a.node).unwrap_or(u64::MAX),
            }
        })
        .collect()
}

/// The three urgency orderings over `items` (values are indices into
/// `items`): ascending deadline, descending severity, ascending distance,
/// each tie-broken by ascending node id.
pub struct UrgencyRankings {
    pub order_et: Vec<usize>,
    pub order_f: Vec<usize>,
    pub order_d: Vec<usize>,
}

/// Rank position of each item under one ordering.
fn ranks_of(order: &[usize], n: usize) -> Vec<usize> {
    let mut ranks = vec![0; n];
    for (rank, &item) in order.iter().enumerate() {
        ranks[item] = rank;
    }
    ranks
}

pub fn urgency_rankings(items: &[UrgencyItem]) -> UrgencyRankings {
    let mut order_et: Vec<usize> = (0..items.len()).collect();
    order_et.sort_by_key(|&i| (items[i].deadline, items[i].node));
    let mut order_f: Vec<usize> = (0..items.len()).collect();
    order_f.sort_by(|&a, &b| {
        items[b]
            .severity
            .total_cmp(&items[a].severity)
            .then(items[a].node.cmp(&items[b].node))
    });
    let mut order_d: Vec<usize> = (0..items.len()).collect();
    order_d.sort_by_key(|&i| (items[i].distance, items[i].node));
    UrgencyRankings { order_et, order_f, order_d }
}

/// The item whose rank coordinates under two orderings lie closest to the
/// origin (squared Euclidean distance). Ties prefer the larger assignment
/// value, then a uniform random draw.
pub fn pick_most_urgent(
    items: &[UrgencyItem],
    order_a: &[usize],
    order_b: &[usize],
    rng: &mut impl Rng,
) -> usize {
    let ranks_a = ranks_of(order_a, items.len());
    let ranks_b = ranks_of(order_b, items.len());
    let d2 = |i: usize| (ranks_a[i] * ranks_a[i] + ranks_b[i] * ranks_b[i]) as u64;
    let best = (0..items.len()).map(d2).min().expect("items nonempty");
    let closest: Vec<usize> = (0..items.len()).filter(|&i| d2(i) == best).collect();
    let top_value = closest.iter().map(|&i| items[i].value).max().unwrap();
    let candidates: Vec<usize> =
        closest.into_iter().filter(|&i| items[i].value == top_value).collect();
    if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.random_range(0..candidates.len())]
    }
}

/// The spread-degree penalty W_is for one agent: three urgency terms, one
/// per ordering pairing, each evaluated at that pairing's most urgent node.
pub fn reward_spread(
    log: &AssignmentLog,
    severity: &SeverityField,
    dist: &DistanceMap,
    agent_pos: NodeId,
    t: u32,
    rng: &mut impl Rng,
) -> f64 {
    let items = urgency_items(log, severity, dist, agent_pos);
    if items.is_empty() {
        return 0.0;
    }
    let r = urgency_rankings(&items);
    let et_f = &items[pick_most_urgent(&items, &r.order_et, &r.order_f, rng)];
    let et_d = &items[pick_most_urgent(&items, &r.order_et, &r.order_d, rng)];
    let d_f = &items[pick_most_urgent(&items, &r.order_d, &r.order_f, rng)];

    let guard_d = |item: &UrgencyItem| (item.distance.max(1)) as f64;
    let term_et_f =
        (1.0 / remaining_steps(et_f.deadline, t)) * et_f.severity * et_f.value as f64;
    let term_et_d = (1.0 / remaining_steps(et_d.deadline, t)) * (1.0 / guard_d(et_d))
        * et_d.value as f64;
    let term_d_f = d_f.severity * (1.0 / guard_d(d_f)) * d_f.value as f64;
    term_et_f + term_et_d + term_d_f
}

/// The prediction success score W_succ over all assignments:
/// - Done assignments contribute their full value every step.
/// - An open assignment on a burning predicted node contributes the
///   predicted probability times current severity times value.
/// - An open assignment on an intact predicted node contributes its real
///   superposed ignition probability times value.
/// - An open assignment on an intact unpredicted node contributes the
///   reciprocal of its remaining time times value.
#[allow(clippy::too_many_arguments)]
pub fn reward_success(
    log: &AssignmentLog,
    severity: &SeverityField,
    states: &NodeStates,
    spread: &SpreadGraph,
    prediction: &PredictionSet,
    t: u32,
    tau: f64,
) -> f64 {
    let mut total = 0.0;
    for a in log.items() {
        let w = a.value as f64;
        match a.status {
            AssignStatus::Done => total += w,
            AssignStatus::Failed => {}
            AssignStatus::Pending | AssignStatus::InProgress => {
                let f = severity.get(a.node);
                let burning = states.status(a.node) == NodeStatus::Incident;
                match prediction.get(a.node) {
                    Some(g) if burning && f > 0.0 && f < tau => total += g * f * w,
                    Some(_) if f == 0.0 => {
                        total += ignition_probability(a.node, severity, states, spread, tau) * w;
                    }
                    Some(_) => {}
                    None if f == 0.0 => {
                        total += w / remaining_steps(a.deadline, t);
                    }
                    None => {}
                }
            }
        }
    }
    total
}

/// Surviving asset total W_r: assets on nodes that are neither destroyed
/// nor carrying a deadline-expired assignment.
pub fn reward_remaining(states: &NodeStates, deadline_expired: &[bool]) -> f64 {
    (0..states.len())
        .map(|i| {
            let id = NodeId(i as u32);
            if states.status(id) == NodeStatus::Scrapped || deadline_expired[i] {
                0.0
            } else {
                states.assets(id) as f64
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AssetCategory, Node, OperationGraph};
    use approx::assert_abs_diff_eq;

    fn items_from(rows: &[(u32, u32, u32, f64, u64)]) -> Vec<UrgencyItem> {
        rows.iter()
            .enumerate()
            .map(|(i, &(node, deadline, value, severity, distance))| UrgencyItem {
                assignment: i,
                node: NodeId(node),
                deadline,
                value,
                severity,
                distance,
            })
            .collect()
    }

    fn rng() -> impl Rng {
        crate::seed::derive_rng(1, 0xC0)
    }

    /// Four assignments with orderings et=[0,1,2,3], f=[1,3,2,0],
    /// d=[2,0,1,3]: the pairings must select nodes 1, 0, and {1,2 by value}.
    #[test]
    fn worked_ranking_example() {
        let items = items_from(&[
            // node, deadline, value, severity, distance
            (0, 10, 100, 0.1, 3),
            (1, 20, 100, 0.9, 4),
            (2, 30, 50, 0.3, 1),
            (3, 40, 100, 0.5, 6),
        ]);
        let r = urgency_rankings(&items);
        assert_eq!(r.order_et, vec![0, 1, 2, 3]);
        assert_eq!(r.order_f, vec![1, 3, 2, 0]);
        assert_eq!(r.order_d, vec![2, 0, 1, 3]);

        let mut rng = rng();
        assert_eq!(pick_most_urgent(&items, &r.order_et, &r.order_f, &mut rng), 1);
        assert_eq!(pick_most_urgent(&items, &r.order_et, &r.order_d, &mut rng), 0);
        // d x f: items 1 and 2 both sit at distance^2 = 4; item 1 wins on value.
        assert_eq!(pick_most_urgent(&items, &r.order_d, &r.order_f, &mut rng), 1);
    }

    #[test]
    fn equal_value_ties_resolve_randomly_among_candidates() {
        // Items 0 and 1 both sit at squared rank distance 1 under d x f and
        // carry equal value, so the pick must wander between them.
        let items = items_from(&[(0, 10, 100, 0.5, 1), (1, 20, 100, 0.9, 2), (2, 30, 100, 0.1, 3)]);
        let r = urgency_rankings(&items);
        let mut rng = rng();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..200 {
            seen.insert(pick_most_urgent(&items, &r.order_d, &r.order_f, &mut rng));
        }
        assert_eq!(seen, [0usize, 1].into_iter().collect());
    }

    #[test]
    fn single_item_is_picked_by_every_pairing() {
        let items = items_from(&[(5, 12, 80, 0.4, 2)]);
        let r = urgency_rankings(&items);
        let mut rng = rng();
        for (a, b) in [
            (&r.order_et, &r.order_f),
            (&r.order_et, &r.order_d),
            (&r.order_d, &r.order_f),
        ] {
            assert_eq!(pick_most_urgent(&items, a, b, &mut rng), 0);
        }
    }

    #[test]
    fn random_rankings_match_brute_force() {
        let mut rng = crate::seed::derive_rng(7, 0xC1);
        for _ in 0..50 {
            let items: Vec<UrgencyItem> = (0..8)
                .map(|i| UrgencyItem {
                    assignment: i,
                    node: NodeId(i as u32),
                    deadline: rng.random_range(1..40),
                    value: rng.random_range(1..5u32) * 50,
                    severity: f64::from(rng.random_range(0..8u32)) / 8.0,
                    distance: rng.random_range(0..10),
                })
                .collect();
            let r = urgency_rankings(&items);
            for (oa, ob) in [
                (&r.order_et, &r.order_f),
                (&r.order_et, &r.order_d),
                (&r.order_d, &r.order_f),
            ] {
                let ra = ranks_of(oa, items.len());
                let rb = ranks_of(ob, items.len());
                let d2: Vec<u64> = (0..items.len())
                    .map(|i| (ra[i] * ra[i] + rb[i] * rb[i]) as u64)
                    .collect();
                let best = *d2.iter().min().unwrap();
                let top_value = (0..items.len())
                    .filter(|&i| d2[i] == best)
                    .map(|i| items[i].value)
                    .max()
                    .unwrap();
                let candidates: Vec<usize> = (0..items.len())
                    .filter(|&i| d2[i] == best && items[i].value == top_value)
                    .collect();
                let picked = pick_most_urgent(&items, oa, ob, &mut rng);
                assert!(candidates.contains(&picked));
                if candidates.len() == 1 {
                    assert_eq!(picked, candidates[0]);
                }
            }
        }
    }

    fn line_world(
        specs: &[(u32, u32, u32)],
        severities: &[(u32, f64)],
    ) -> (AssignmentLog, SeverityField, OperationGraph, DistanceMap, NodeStates) {
        let n = 8;
        let nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                id: NodeId(i),
                pos: (i, 0),
                initial_assets: 100,
                category: AssetCategory::General,
            })
            .collect();
        let edges: Vec<(NodeId, NodeId, u32)> =
            (0..n - 1).map(|i| (NodeId(i), NodeId(i + 1), 1)).collect();
        let graph = OperationGraph::new((n, 1), nodes.clone(), &edges).unwrap();
        let dist = DistanceMap::build(&graph);
        let mut states = NodeStates::new(&nodes);
        let mut field = SeverityField::zeros(n as usize);
        for &(id, f) in severities {
            states.ignite(NodeId(id));
            field.ignite(NodeId(id), f);
        }
        let issued: Vec<(NodeId, u32, u32)> =
            specs.iter().map(|&(node, et, w)| (NodeId(node), et, w)).collect();
        let log = AssignmentLog::new(n as usize, &issued, 2).unwrap();
        (log, field, graph, dist, states)
    }

    #[test]
    fn spread_terms_match_direct_arithmetic() {
        // One open assignment: every pairing picks it, so W_is is the sum of
        // the three closed-form terms. w=10, f=0.5, 5 steps left, d=2.
        let (log, field, _graph, dist, _states) = line_world(&[(2, 15, 10)], &[(2, 0.5)]);
        let w_is = reward_spread(&log, &field, &dist, NodeId(0), 10, &mut rng());
        assert_abs_diff_eq!(w_is, 1.0 + 1.0 + 2.5, epsilon = 1e-12);
    }

    #[test]
    fn no_open_assignments_mean_zero_spread_penalty() {
        let (mut log, field, _graph, dist, _states) = line_world(&[(2, 15, 10)], &[]);
        log.apply_work(0, 2, 0);
        assert_eq!(reward_spread(&log, &field, &dist, NodeId(0), 1, &mut rng()), 0.0);
    }

    #[test]
    fn success_counts_done_values_every_step() {
        let (mut log, field, _graph, _dist, states) = line_world(&[(1, 10, 70), (3, 10, 30)], &[]);
        let spread = SpreadGraph::new(8, &[]).unwrap();
        log.apply_work(0, 2, 0);
        log.apply_work(1, 2, 0);
        let empty = PredictionSet::empty();
        for t in 0..3 {
            let w = reward_success(&log, &field, &states, &spread, &empty, t, 1.0);
            assert_abs_diff_eq!(w, 100.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn intact_unpredicted_assignment_contributes_reciprocal_deadline() {
        let (log, field, _graph, _dist, states) = line_world(&[(1, 30, 100)], &[]);
        let spread = SpreadGraph::new(8, &[]).unwrap();
        let empty = PredictionSet::empty();
        let w = reward_success(&log, &field, &states, &spread, &empty, 10, 1.0);
        assert_abs_diff_eq!(w, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn mixed_state_matches_per_case_oracle() {
        // Node 1: burning, predicted at 0.8, f=0.5, w=100 -> 0.8*0.5*100 = 40.
        // Node 2: intact, predicted, fed by node 1 at base rate 0.6
        //         -> P = 0.6*0.5 = 0.3, w=200 -> 60.
        // Node 3: intact, unpredicted, 20 steps left, w=50 -> 2.5.
        // Node 4: done, w=30 -> 30.
        // Node 5: burning, unpredicted -> 0.
        let (mut log, field, _graph, _dist, states) = line_world(
            &[(1, 25, 100), (2, 25, 200), (3, 25, 50), (4, 25, 30), (5, 25, 40)],
            &[(1, 0.5), (5, 0.2)],
        );
        log.apply_work(3, 2, 2);
        let spread = SpreadGraph::new(8, &[(NodeId(1), NodeId(2), 0.6)]).unwrap();
        let prediction = PredictionSet::from_entries(vec![(1, 0.8), (2, 0.9)]);
        let w = reward_success(&log, &field, &states, &spread, &prediction, 5, 1.0);
        assert_abs_diff_eq!(w, 40.0 + 60.0 + 2.5 + 30.0, epsilon = 1e-12);
    }

    #[test]
    fn completing_one_more_never_decreases_success() {
        let mut rng = crate::seed::derive_rng(3, 0xC2);
        for _ in 0..20 {
            let (mut log, field, _graph, _dist, states) =
                line_world(&[(1, 30, 100), (2, 40, 60), (3, 50, 80)], &[]);
            let spread = SpreadGraph::new(8, &[]).unwrap();
            let empty = PredictionSet::empty();
            let t = rng.random_range(0..25);
            let before = reward_success(&log, &field, &states, &spread, &empty, t, 1.0);
            let idx = rng.random_range(0..3);
            log.apply_work(idx, 2, t);
            let after = reward_success(&log, &field, &states, &spread, &empty, t, 1.0);
            assert!(after >= before, "completing dropped W_succ: {before} -> {after}");
        }
    }

    #[test]
    fn remaining_assets_respond_to_scrap_and_expiry() {
        let (_log, _field, _graph, _dist, mut states) = line_world(&[], &[]);
        let mut expired = vec![false; 8];
        assert_eq!(reward_remaining(&states, &expired), 800.0);
        states.ignite(NodeId(2));
        assert_eq!(reward_remaining(&states, &expired), 800.0, "incident alone keeps assets");
        states.scrap(NodeId(2));
        assert_eq!(reward_remaining(&states, &expired), 700.0);
        expired[5] = true;
        assert_eq!(reward_remaining(&states, &expired), 600.0);
        for i in 0..8 {
            expired[i] = true;
        }
        assert_eq!(reward_remaining(&states, &expired), 0.0);
    }

    #[test]
    fn team_reward_is_the_weighted_component_sum() {
        let r = team_reward(120.0, 30.0, -500.0);
        assert_abs_diff_eq!(r, 0.01 * 120.0 - 0.01 * 30.0 + 0.001 * -500.0, epsilon = 1e-15);
    }
}
