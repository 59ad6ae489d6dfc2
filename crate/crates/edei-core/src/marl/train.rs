//! Episode loops: replay-driven training with target networks, predictor
//! pretraining on random rollouts, and evaluation for scripted and trained
//! policies.
//!
//! Every random draw comes from a stream derived from the master seed and a
//! fixed tag, so identical inputs replay identical runs regardless of what
//! else executed in the process.

use std::sync::Arc;

use crate::env::World;
use crate::env::obs::{obs_len, observation, state_len, state_vector};
use crate::graph::{Graphs, NodeId, NodeStatus};
use crate::metrics::{EpisodeRecord, TraceRow};
use crate::predictor::{
    extract_features, extract_features_revealed, FeatureHistory, Predictor, PredictorDataset,
};
use crate::scenario::ScenarioConfig;
use crate::seed;

use super::policy::{greedy_action, random_action};
use super::{AgentNets, MarlConfig, MarlError, ReplayBuffer, Transition};

pub const TAG_NET_INIT: u64 = 0x01;
pub const TAG_EXPLORE: u64 = 0x02;
pub const TAG_REPLAY: u64 = 0x03;
pub const TAG_PREDICTOR: u64 = 0x04;
pub const TAG_TRAIN_EPISODE: u64 = 0x1000_0000;
pub const TAG_PRETRAIN_EPISODE: u64 = 0x2000_0000;
pub const TAG_EVAL_EPISODE: u64 = 0x3000_0000;
pub const TAG_EVAL_POLICY: u64 = 0x4000_0000;

/// Upper bound on predictor pretraining samples.
const PRETRAIN_SAMPLE_CAP: usize = 20_000;

/// Everything a training run produces.
pub struct TrainArtifacts {
    pub nets: Vec<AgentNets>,
    pub predictor: Option<Predictor>,
    pub episodes: Vec<EpisodeRecord>,
    pub policy: String,
    /// Update rounds executed (each round updates every agent once).
    pub updates: u64,
    /// Transitions pushed to the replay buffer.
    pub transitions: usize,
    /// Optimizer steps skipped on non-finite gradients.
    pub adam_skipped: u64,
}

fn status_codes(world: &World) -> Vec<u8> {
    (0..world.cfg().n_nodes())
        .map(|i| match world.nodes().status(NodeId(i as u32)) {
            NodeStatus::Normal => 0,
            NodeStatus::Incident => 1,
            NodeStatus::Scrapped => 2,
        })
        .collect()
}

fn base_record(cfg: &ScenarioConfig, episode: u32, policy: &str, seed_value: u64) -> EpisodeRecord {
    EpisodeRecord {
        episode,
        scenario: cfg.name.clone(),
        policy: policy.to_string(),
        seed: seed_value,
        n_assignments: cfg.assignments.len(),
        n_nodes: cfg.n_nodes(),
        t_max: cfg.t_max,
        delta_t: cfg.delta_t,
        k_line: cfg.k_line,
        n_checked: cfg.n_checked,
        n_agents: cfg.n_agents(),
        duty_switches: 0,
        completions: 0,
        incident_node_steps: 0,
        reward_sum: 0.0,
        trace: Vec::new(),
    }
}

fn absorb(record: &mut EpisodeRecord, info: &crate::env::StepInfo, collect_trace: bool) {
    record.completions += info.completed.len();
    record.incident_node_steps += info.incident_count as u64;
    record.reward_sum += info.reward;
    if collect_trace {
        record.trace.push(TraceRow {
            t: info.t,
            incidents: info.incident_count,
            done: info.done_count,
            failed: info.failed_count,
            w_succ: info.w_succ,
            w_is: info.w_is,
            w_r: info.w_r,
            reward: info.reward,
        });
    }
}

/// Labeled ignition windows harvested from random rollouts with the true
/// severity field visible. Each pre-step Normal node contributes its feature
/// window and whether it ignited on that step.
pub fn pretrain_dataset(
    cfg: &Arc<ScenarioConfig>,
    graphs: &Arc<Graphs>,
    marl: &MarlConfig,
    master_seed: u64,
) -> PredictorDataset {
    let mut dataset = PredictorDataset::new();
    'episodes: for ep in 0..marl.pretrain_episodes {
        let ep_seed = seed::derive(master_seed, TAG_PRETRAIN_EPISODE + u64::from(ep));
        let mut world = World::reset(Arc::clone(cfg), Arc::clone(graphs), ep_seed);
        let mut policy_rng = seed::derive_rng(ep_seed, TAG_EXPLORE);
        let mut history = FeatureHistory::new(marl.predictor.unroll);
        while !world.terminated() {
            history.push(extract_features_revealed(&world));
            let normal_before: Vec<usize> = (0..world.cfg().n_nodes())
                .filter(|&i| world.nodes().status(NodeId(i as u32)) == NodeStatus::Normal)
                .collect();
            let actions: Vec<NodeId> = (0..world.cfg().n_agents())
                .map(|a| random_action(&world, a, &mut policy_rng))
                .collect();
            let info = world.step(&actions).expect("actions drawn from the valid set");
            for i in normal_before {
                let ignited = info.newly_ignited.contains(&NodeId(i as u32));
                let label = if ignited { 1.0 } else { 0.0 };
                dataset.push(history.sequence(i), label);
                if dataset.len() >= PRETRAIN_SAMPLE_CAP {
                    break 'episodes;
                }
            }
        }
    }
    dataset
}

/// Trains one actor-critic pair per agent on the scenario. With `predict`
/// set, a GRU incident predictor is pretrained first and its prediction set
/// feeds observations, states, and stored transitions throughout training.
pub fn train(
    cfg: Arc<ScenarioConfig>,
    graphs: Arc<Graphs>,
    marl: &MarlConfig,
    master_seed: u64,
) -> Result<TrainArtifacts, MarlError> {
    marl.validate()?;
    let policy = if marl.predict { "pmaddpg" } else { "maddpg" };
    let n_agents = cfg.n_agents();
    let k = cfg.n_nodes();
    let o_len = obs_len(&cfg);
    let s_len = state_len(&cfg);

    let mut init_rng = seed::derive_rng(master_seed, TAG_NET_INIT);
    let mut nets: Vec<AgentNets> = (0..n_agents)
        .map(|_| AgentNets::init(o_len, s_len, n_agents, k, marl.hidden, marl.lr, &mut init_rng))
        .collect();

    let predictor = if marl.predict {
        let mut predictor_rng = seed::derive_rng(master_seed, TAG_PREDICTOR);
        let mut p = Predictor::new(marl.predictor.clone(), &mut predictor_rng);
        let dataset = pretrain_dataset(&cfg, &graphs, marl, master_seed);
        if !dataset.is_empty() {
            p.train(&dataset, marl.predictor_epochs, &mut predictor_rng)
                .expect("dataset is nonempty");
        }
        Some(p)
    } else {
        None
    };

    let mut buffer = ReplayBuffer::new(marl.buffer);
    let mut explore_rng = seed::derive_rng(master_seed, TAG_EXPLORE);
    let mut replay_rng = seed::derive_rng(master_seed, TAG_REPLAY);
    let mut episodes = Vec::with_capacity(marl.episodes as usize);
    let mut updates = 0u64;
    let mut transitions = 0usize;

    for ep in 0..marl.episodes {
        let ep_seed = seed::derive(master_seed, TAG_TRAIN_EPISODE + u64::from(ep));
        let epsilon = marl.epsilon(ep);
        let mut world = World::reset(Arc::clone(&cfg), Arc::clone(&graphs), ep_seed);
        let mut history = FeatureHistory::new(marl.predictor.unroll);
        if let Some(p) = &predictor {
            history.push(extract_features(&world));
            world.set_prediction(p.prediction_set(&history));
        }
        let mut record = base_record(&cfg, ep, policy, ep_seed);
        let mut step_idx: u32 = 0;
        while !world.terminated() {
            let state = state_vector(&world);
            let obs: Vec<Vec<f64>> = (0..n_agents).map(|a| observation(&world, a)).collect();
            let masks: Vec<Vec<bool>> = (0..n_agents).map(|a| world.action_mask(a)).collect();
            let actions: Vec<u32> = (0..n_agents)
                .map(|a| nets[a].select_action(&obs[a], &masks[a], epsilon, &mut explore_rng))
                .collect();
            let omega = status_codes(&world);
            let incident_set: Vec<u32> =
                world.nodes().incident_nodes().iter().map(|id| id.0).collect();
            let prediction: Vec<(u32, f64)> =
                world.prediction().entries().iter().map(|&(id, p)| (id.0, p)).collect();

            let node_actions: Vec<NodeId> = actions.iter().map(|&a| NodeId(a)).collect();
            let info = world.step(&node_actions).expect("selected from the action mask");

            if let Some(p) = &predictor {
                history.push(extract_features(&world));
                world.set_prediction(p.prediction_set(&history));
            }
            let next_state = state_vector(&world);
            let next_obs: Vec<Vec<f64>> = (0..n_agents).map(|a| observation(&world, a)).collect();
            let next_masks: Vec<Vec<bool>> =
                (0..n_agents).map(|a| world.action_mask(a)).collect();

            buffer.push(Transition {
                state,
                obs,
                masks,
                actions,
                reward: info.reward,
                next_state,
                next_obs,
                next_masks,
                done: info.done,
                omega,
                incident_set,
                prediction,
            });
            transitions += 1;

            if buffer.len() >= marl.warmup && step_idx % marl.update_every == 0 {
                let idx = buffer.sample_indices(marl.batch, &mut replay_rng);
                let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
                for a in 0..n_agents {
                    let targets = AgentNets::critic_targets(&nets, a, &batch, marl.gamma);
                    nets[a].update_critic(&batch, &targets);
                    nets[a].update_actor(a, &batch);
                }
                for net in &mut nets {
                    net.update_targets(marl.rho);
                }
                updates += 1;
            }

            absorb(&mut record, &info, marl.collect_traces);
            step_idx += 1;
        }
        record.duty_switches = world.duty_switch_count();
        episodes.push(record);
    }

    let adam_skipped = nets.iter().map(AgentNets::adam_skipped).sum();
    Ok(TrainArtifacts {
        nets,
        predictor,
        episodes,
        policy: policy.to_string(),
        updates,
        transitions,
        adam_skipped,
    })
}

/// Policy under evaluation.
pub enum EvalPolicy<'a> {
    Greedy,
    Random,
    Trained {
        nets: &'a [AgentNets],
        predictor: Option<&'a Predictor>,
    },
}

impl EvalPolicy<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            EvalPolicy::Greedy => "greedy",
            EvalPolicy::Random => "random",
            EvalPolicy::Trained { predictor: Some(_), .. } => "pmaddpg",
            EvalPolicy::Trained { predictor: None, .. } => "maddpg",
        }
    }
}

/// Rolls out the policy without exploration or learning and returns one
/// record per episode.
pub fn evaluate(
    cfg: Arc<ScenarioConfig>,
    graphs: Arc<Graphs>,
    policy: &EvalPolicy,
    master_seed: u64,
    episodes: u32,
    collect_traces: bool,
) -> Vec<EpisodeRecord> {
    let label = policy.label();
    let n_agents = cfg.n_agents();
    let mut policy_rng = seed::derive_rng(master_seed, TAG_EVAL_POLICY);
    let mut records = Vec::with_capacity(episodes as usize);
    for ep in 0..episodes {
        let ep_seed = seed::derive(master_seed, TAG_EVAL_EPISODE + u64::from(ep));
        let mut world = World::reset(Arc::clone(&cfg), Arc::clone(&graphs), ep_seed);
        let mut history = match policy {
            EvalPolicy::Trained { predictor: Some(p), .. } => {
                let mut h = FeatureHistory::new(p.config().unroll);
                h.push(extract_features(&world));
                world.set_prediction(p.prediction_set(&h));
                Some(h)
            }
            _ => None,
        };
        let mut record = base_record(&cfg, ep, label, ep_seed);
        while !world.terminated() {
            let actions: Vec<NodeId> = match policy {
                EvalPolicy::Greedy => {
                    (0..n_agents).map(|a| greedy_action(&world, a)).collect()
                }
                EvalPolicy::Random => (0..n_agents)
                    .map(|a| random_action(&world, a, &mut policy_rng))
                    .collect(),
                EvalPolicy::Trained { nets, .. } => (0..n_agents)
                    .map(|a| {
                        let obs = observation(&world, a);
                        let mask = world.action_mask(a);
                        NodeId(nets[a].select_action(&obs, &mask, 0.0, &mut policy_rng))
                    })
                    .collect(),
            };
            let info = world.step(&actions).expect("policies choose valid actions");
            if let EvalPolicy::Trained { predictor: Some(p), .. } = policy {
                let h = history.as_mut().expect("history exists for predicting policies");
                h.push(extract_features(&world));
                world.set_prediction(p.prediction_set(h));
            }
            absorb(&mut record, &info, collect_traces);
        }
        record.duty_switches = world.duty_switch_count();
        records.push(record);
    }
    records
}
