//! Multi-agent actor-critic training: per-agent actors and centralized
//! critics with target copies, soft updates, an extended replay buffer,
//! scripted baselines, and the training loop.
//!
//! Actions are discrete node choices. Actors emit logits over one slot per
//! node; invalid slots are masked far below any real score. Execution takes
//! the argmax, while actor updates differentiate through a temperature-1
//! softmax over the masked logits fed into the critic in place of the
//! executed one-hot.

pub mod policy;
pub mod replay;
pub mod train;

pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate, train, EvalPolicy, TrainArtifacts};

use rand::Rng;
use thiserror::Error;

use crate::nn::{AdamParams, AdamState, Mlp, ParameterStore, Tape, Val};
use crate::predictor::PredictorConfig;

const MASK_OFFSET: f64 = -1e9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarlError {
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarlConfig {
    pub episodes: u32,
    pub gamma: f64,
    pub buffer: usize,
    pub batch: usize,
    /// Stored transitions required before updates start.
    pub warmup: usize,
    /// Steps between update rounds.
    pub update_every: u32,
    /// Hidden width of both actor and critic (two hidden layers each).
    pub hidden: usize,
    pub lr: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Soft-update rate for the target networks.
    pub rho: f64,
    /// Run the incident predictor and feed its set to the policies.
    pub predict: bool,
    /// Random-rollout episodes used to build the predictor dataset.
    pub pretrain_episodes: u32,
    pub predictor_epochs: usize,
    pub predictor: PredictorConfig,
    /// Keep per-step traces in the emitted episode records.
    pub collect_traces: bool,
}

impl MarlConfig {
    pub fn new(episodes: u32, predict: bool) -> Self {
        MarlConfig {
            episodes,
            gamma: 0.95,
            buffer: 100_000,
            batch: 64,
            warmup: 1000,
            update_every: 1,
            hidden: 64,
            lr: 1e-3,
            eps_start: 0.3,
            eps_end: 0.02,
            rho: 0.01,
            predict,
            pretrain_episodes: 30,
            predictor_epochs: 10,
            predictor: PredictorConfig::default(),
            collect_traces: false,
        }
    }

    /// Desk-scale profile sized for the reduced scenario.
    pub fn reduced(episodes: u32, predict: bool) -> Self {
        MarlConfig {
            hidden: 32,
            batch: 32,
            update_every: 4,
            warmup: 500,
            buffer: 30_000,
            ..MarlConfig::new(episodes, predict)
        }
    }

    pub fn validate(&self) -> Result<(), MarlError> {
        let fail = |msg: &str| Err(MarlError::Config(msg.to_string()));
        if self.episodes == 0 {
            return fail("episodes must be positive");
        }
        if self.batch == 0 {
            return fail("batch size must be positive");
        }
        if self.warmup < self.batch {
            return fail("warmup must cover at least one batch");
        }
        if self.buffer < self.warmup {
            return fail("buffer must hold the warmup transitions");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return fail("rho must lie in (0, 1]");
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return fail("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_start)
            || !(0.0..=1.0).contains(&self.eps_end)
            || self.eps_end > self.eps_start
        {
            return fail("epsilon must anneal downward within [0, 1]");
        }
        if self.update_every == 0 {
            return fail("update interval must be positive");
        }
        if self.hidden == 0 {
            return fail("hidden width must be positive");
        }
        if self.predictor.unroll == 0 || self.predictor.hidden == 0 {
            return fail("predictor shape must be positive");
        }
        Ok(())
    }

    /// Exploration rate for an episode: linear decay over the first half of
    /// training, flat at `eps_end` afterwards.
    pub fn epsilon(&self, episode: u32) -> f64 {
        let half = (self.episodes / 2).max(1);
        if episode >= half {
            self.eps_end
        } else {
            self.eps_start
                + (self.eps_end - self.eps_start) * f64::from(episode) / f64::from(half)
        }
    }
}

pub fn one_hot(k: usize, slot: u32) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[slot as usize] = 1.0;
    v
}

fn mask_offsets(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&m| if m { 0.0 } else { MASK_OFFSET }).collect()
}

/// Elementwise θ′ ← ρ·θ + (1−ρ)·θ′ over matching stores.
pub fn soft_update(online: &ParameterStore, target: &mut ParameterStore, rho: f64) {
    assert_eq!(online.len(), target.len(), "store layouts must match");
    for id in online.ids().collect::<Vec<_>>() {
        debug_assert_eq!(online.name(id), target.name(id));
        let src = &online.get(id).data;
        let dst = &mut target.get_mut(id).data;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = rho * s + (1.0 - rho) * *d;
        }
    }
}

/// One agent's networks: online and target actor and critic, with their
/// optimizer states. The critic reads the global state plus every agent's
/// action one-hot.
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_store: ParameterStore,
    pub critic_store: ParameterStore,
    pub target_actor: ParameterStore,
    pub target_critic: ParameterStore,
    actor_adam: AdamState,
    critic_adam: AdamState,
    hp: AdamParams,
    /// Action slots (one per node).
    pub k: usize,
    pub n_agents: usize,
}

impl AgentNets {
    pub fn init(
        obs_len: usize,
        state_len: usize,
        n_agents: usize,
        k: usize,
        hidden: usize,
        lr: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut actor_store = ParameterStore::new();
        let actor = Mlp::init(&mut actor_store, "actor", &[obs_len, hidden, hidden, k], rng);
        let mut critic_store = ParameterStore::new();
        let critic = Mlp::init(
            &mut critic_store,
            "critic",
            &[state_len + n_agents * k, hidden, hidden, 1],
            rng,
        );
        let target_actor = actor_store.clone();
        let target_critic = critic_store.clone();
        let actor_adam = AdamState::new(&actor_store);
        let critic_adam = AdamState::new(&critic_store);
        AgentNets {
            actor,
            critic,
            actor_store,
            critic_store,
            target_actor,
            target_critic,
            actor_adam,
            critic_adam,
            hp: AdamParams::with_lr(lr),
            k,
            n_agents,
        }
    }

    /// Rebinds networks to restored stores. Optimizer state starts fresh.
    /// `None` when a store is missing a parameter the shape calls for.
    #[allow(clippy::too_many_arguments)]
    pub fn from_stores(
        actor_store: ParameterStore,
        critic_store: ParameterStore,
        target_actor: ParameterStore,
        target_critic: ParameterStore,
        obs_len: usize,
        state_len: usize,
        n_agents: usize,
        k: usize,
        hidden: usize,
        lr: f64,
    ) -> Option<Self> {
        let actor = Mlp::bind(&actor_store, "actor", &[obs_len, hidden, hidden, k])?;
        let critic =
            Mlp::bind(&critic_store, "critic", &[state_len + n_agents * k, hidden, hidden, 1])?;
        Mlp::bind(&target_actor, "actor", &[obs_len, hidden, hidden, k])?;
        Mlp::bind(&target_critic, "critic", &[state_len + n_agents * k, hidden, hidden, 1])?;
        let actor_adam = AdamState::new(&actor_store);
        let critic_adam = AdamState::new(&critic_store);
        Some(AgentNets {
            actor,
            critic,
            actor_store,
            critic_store,
            target_actor,
            target_critic,
            actor_adam,
            critic_adam,
            hp: AdamParams::with_lr(lr),
            k,
            n_agents,
        })
    }

    fn actor_logits(&self, store: &ParameterStore, obs: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new(&[store]);
        let x = tape.leaf(obs.to_vec());
        let y = self.actor.forward(&mut tape, 0, x).expect("actor shapes are fixed at init");
        tape.value(y).to_vec()
    }

    fn masked_argmax(logits: &[f64], mask: &[bool]) -> u32 {
        let mut best: Option<(f64, usize)> = None;
        for (i, (&score, &valid)) in logits.iter().zip(mask).enumerate() {
            if valid && best.map_or(true, |(b, _)| score > b) {
                best = Some((score, i));
            }
        }
        best.expect("action mask always has one valid slot").1 as u32
    }

    /// Execution-time action: ε-uniform over valid slots, otherwise the
    /// argmax of the masked actor scores.
    pub fn select_action(
        &self,
        obs: &[f64],
        mask: &[bool],
        epsilon: f64,
        rng: &mut impl Rng,
    ) -> u32 {
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            let valid: Vec<u32> = mask
                .iter()
                .enumerate()
                .filter(|&(_, &m)| m)
                .map(|(i, _)| i as u32)
                .collect();
            return valid[rng.random_range(0..valid.len())];
        }
        Self::masked_argmax(&self.actor_logits(&self.actor_store, obs), mask)
    }

    /// Target-actor argmax at the next observation.
    pub fn target_action(&self, next_obs: &[f64], next_mask: &[bool]) -> u32 {
        Self::masked_argmax(&self.actor_logits(&self.target_actor, next_obs), next_mask)
    }

    /// Critic forward on an explicit store (online or target).
    pub fn critic_value(&self, store: &ParameterStore, state: &[f64], actions: &[u32]) -> f64 {
        debug_assert_eq!(actions.len(), self.n_agents);
        let mut input = state.to_vec();
        for &a in actions {
            input.extend_from_slice(&one_hot(self.k, a));
        }
        let mut tape = Tape::new(&[store]);
        let x = tape.leaf(input);
        let q = self.critic.forward(&mut tape, 0, x).expect("critic shapes are fixed at init");
        tape.scalar(q)
    }

    /// TD targets for this agent: y = r, plus γ·Q′ at the target actors'
    /// joint action when the transition is not terminal.
    pub fn critic_targets(nets: &[AgentNets], agent: usize, batch: &[&Transition], gamma: f64) -> Vec<f64> {
        batch
            .iter()
            .map(|tr| {
                if tr.done {
                    return tr.reward;
                }
                let next_actions: Vec<u32> = nets
                    .iter()
                    .enumerate()
                    .map(|(j, net)| net.target_action(&tr.next_obs[j], &tr.next_masks[j]))
                    .collect();
                let q = nets[agent].critic_value(
                    &nets[agent].target_critic,
                    &tr.next_state,
                    &next_actions,
                );
                tr.reward + gamma * q
            })
            .collect()
    }

    /// Minimizes mean squared TD error over the batch with one optimizer
    /// step. Returns the pre-step loss.
    pub fn update_critic(&mut self, batch: &[&Transition], targets: &[f64]) -> f64 {
        debug_assert_eq!(batch.len(), targets.len());
        let (loss, grads) = {
            let mut tape = Tape::new(&[&self.critic_store]);
            let scale = 1.0 / batch.len() as f64;
            let mut total: Option<Val> = None;
            for (tr, &y) in batch.iter().zip(targets) {
                let mut input = tr.state.clone();
                for &a in &tr.actions {
                    input.extend_from_slice(&one_hot(self.k, a));
                }
                let x = tape.leaf(input);
                let q = self.critic.forward(&mut tape, 0, x).expect("critic shapes are fixed");
                let term = tape.sq_err(q, &[y], scale).expect("scalar target");
                total = Some(match total {
                    Some(t) => tape.add(t, term).expect("scalar add"),
                    None => term,
                });
            }
            let root = total.expect("batch is nonempty");
            (tape.scalar(root), tape.backward(root).expect("fresh tape"))
        };
        self.critic_adam.step(&mut self.critic_store, grads.store(0), self.hp);
        loss
    }

    /// Objective recorded for the actor update: −(1/S)·Σ Q(s, …, relaxed
    /// own action, …). The tape must hold [actor store, critic store].
    fn actor_objective(&self, agent: usize, batch: &[&Transition], tape: &mut Tape) -> Val {
        let scale = -1.0 / batch.len() as f64;
        let mut total: Option<Val> = None;
        for tr in batch {
            let obs = tape.leaf(tr.obs[agent].clone());
            let logits = self.actor.forward(tape, 0, obs).expect("actor shapes are fixed");
            let masked = tape
                .offset(&mask_offsets(&tr.masks[agent]), logits)
                .expect("mask matches slot count");
            let relaxed = tape.softmax(masked);
            let state = tape.leaf(tr.state.clone());
            let mut parts = vec![state];
            for j in 0..self.n_agents {
                if j == agent {
                    parts.push(relaxed);
                } else {
                    parts.push(tape.leaf(one_hot(self.k, tr.actions[j])));
                }
            }
            let input = tape.concat(&parts);
            let q = self.critic.forward(tape, 1, input).expect("critic shapes are fixed");
            let term = tape.sum_scaled(q, scale);
            total = Some(match total {
                Some(t) => tape.add(t, term).expect("scalar add"),
                None => term,
            });
        }
        total.expect("batch is nonempty")
    }

    /// Ascends the critic's score of the relaxed own action with one
    /// optimizer step on the actor. Returns the actor gradient norm.
    pub fn update_actor(&mut self, agent: usize, batch: &[&Transition]) -> f64 {
        let grads = {
            let mut tape = Tape::new(&[&self.actor_store, &self.critic_store]);
            let root = self.actor_objective(agent, batch, &mut tape);
            tape.backward(root).expect("fresh tape")
        };
        let norm = grads.l2_norm(0);
        self.actor_adam.step(&mut self.actor_store, grads.store(0), self.hp);
        norm
    }

    /// Soft-updates both target networks toward the online ones.
    pub fn update_targets(&mut self, rho: f64) {
        soft_update(&self.actor_store, &mut self.target_actor, rho);
        soft_update(&self.critic_store, &mut self.target_critic, rho);
    }

    pub fn adam_skipped(&self) -> u64 {
        self.actor_adam.skipped + self.critic_adam.skipped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zeroed(store: &mut ParameterStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data.fill(0.0);
        }
    }

    fn set(store: &mut ParameterStore, name: &str, data: &[f64]) {
        let id = store.by_name(name).unwrap();
        store.get_mut(id).data.copy_from_slice(data);
    }

    fn tiny_nets(lr: f64) -> AgentNets {
        let mut rng = crate::seed::derive_rng(1, 0xB0);
        AgentNets::init(3, 4, 1, 2, 4, lr, &mut rng)
    }

    fn tiny_transition(reward: f64, done: bool) -> Transition {
        Transition {
            state: vec![0.2, -0.1, 0.4, 0.3],
            obs: vec![vec![0.5, -0.5, 0.1]],
            masks: vec![vec![true, true]],
            actions: vec![0],
            reward,
            next_state: vec![0.1, 0.0, 0.2, -0.3],
            next_obs: vec![vec![0.3, 0.2, -0.4]],
            next_masks: vec![vec![true, true]],
            done,
            omega: vec![0],
            incident_set: vec![],
            prediction: vec![],
        }
    }

    #[test]
    fn config_validation_rejects_broken_profiles() {
        assert!(MarlConfig::new(100, true).validate().is_ok());
        assert!(MarlConfig::reduced(100, false).validate().is_ok());
        let mut c = MarlConfig::new(0, false);
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.batch = 0;
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.warmup = c.batch - 1;
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.buffer = c.warmup - 1;
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.gamma = 1.5;
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.rho = 0.0;
        assert!(c.validate().is_err());
        c = MarlConfig::new(10, false);
        c.eps_end = 0.5;
        c.eps_start = 0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn epsilon_anneals_linearly_over_the_first_half() {
        let c = MarlConfig::new(1000, false);
        assert_abs_diff_eq!(c.epsilon(0), 0.3);
        assert_abs_diff_eq!(c.epsilon(250), 0.16, epsilon = 1e-12);
        assert_abs_diff_eq!(c.epsilon(500), 0.02);
        assert_abs_diff_eq!(c.epsilon(999), 0.02);
        for ep in 1..1000 {
            assert!(c.epsilon(ep) <= c.epsilon(ep - 1) + 1e-15);
        }
    }

    #[test]
    fn a_single_valid_slot_is_forced() {
        let nets = tiny_nets(1e-3);
        let mut rng = crate::seed::derive_rng(2, 0xB1);
        for eps in [0.0, 1.0] {
            let a = nets.select_action(&[0.1, 0.2, 0.3], &[false, true], eps, &mut rng);
            assert_eq!(a, 1);
        }
    }

    #[test]
    fn greedy_selection_takes_the_masked_argmax() {
        let mut nets = tiny_nets(1e-3);
        zeroed(&mut nets.actor_store);
        let mut rng = crate::seed::derive_rng(3, 0xB2);
        // All logits equal: the first valid slot wins.
        assert_eq!(nets.select_action(&[0.0, 0.0, 0.0], &[true, true], 0.0, &mut rng), 0);
        // Bias the second slot.
        set(&mut nets.actor_store, "actor/b2", &[0.0, 1.0]);
        assert_eq!(nets.select_action(&[0.0, 0.0, 0.0], &[true, true], 0.0, &mut rng), 1);
        // The better slot is masked out.
        assert_eq!(nets.select_action(&[0.0, 0.0, 0.0], &[true, false], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform_over_valid_slots() {
        let mut rng = crate::seed::derive_rng(4, 0xB3);
        let nets = {
            let mut init_rng = crate::seed::derive_rng(5, 0xB4);
            AgentNets::init(3, 4, 1, 6, 4, 1e-3, &mut init_rng)
        };
        let mask = [true, false, true, true, false, true];
        let mut counts = [0u32; 6];
        for _ in 0..10_000 {
            counts[nets.select_action(&[0.0, 0.0, 0.0], &mask, 1.0, &mut rng) as usize] += 1;
        }
        assert_eq!(counts[1] + counts[4], 0, "masked slots never drawn");
        for slot in [0, 2, 3, 5] {
            let freq = f64::from(counts[slot]) / 10_000.0;
            assert!((freq - 0.25).abs() < 0.02, "slot {slot} frequency {freq}");
        }
    }

    #[test]
    fn soft_update_limits() {
        let mut rng = crate::seed::derive_rng(6, 0xB5);
        let mut online = ParameterStore::new();
        let id = online.add_matrix_xavier("w", 3, 2, &mut rng);
        let mut target = online.clone();
        target.get_mut(id).data.fill(0.0);
        soft_update(&online, &mut target, 1.0);
        assert_eq!(target.get(id).data, online.get(id).data);
        target.get_mut(id).data.fill(0.25);
        soft_update(&online, &mut target, 0.0);
        assert!(target.get(id).data.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn soft_update_contracts_geometrically() {
        let mut online = ParameterStore::new();
        online.add("w", crate::nn::Tensor::vector(vec![1.0, -2.0]));
        let mut target = ParameterStore::new();
        target.add("w", crate::nn::Tensor::vector(vec![0.0, 0.0]));
        let rho = 0.01;
        let k = 50;
        for _ in 0..k {
            soft_update(&online, &mut target, rho);
        }
        let shrink = (1.0 - rho) as f64;
        let expect = 1.0 - shrink.powi(k);
        let id = target.by_name("w").unwrap();
        assert_abs_diff_eq!(target.get(id).data[0], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(target.get(id).data[1], -2.0 * expect, epsilon = 1e-12);
    }

    #[test]
    fn terminal_and_discount_free_targets_equal_the_reward() {
        let nets = vec![tiny_nets(1e-3)];
        let done = tiny_transition(1.5, true);
        let live = tiny_transition(1.5, false);
        let batch = [&done, &live];
        let y = AgentNets::critic_targets(&nets, 0, &batch, 0.95);
        assert_eq!(y[0], 1.5, "terminal bootstraps nothing");
        let y0 = AgentNets::critic_targets(&nets, 0, &batch, 0.0);
        assert_eq!(y0[1], 1.5, "gamma zero bootstraps nothing");
    }

    #[test]
    fn targets_bootstrap_through_the_target_critic() {
        let mut nets = tiny_nets(1e-3);
        zeroed(&mut nets.target_actor);
        zeroed(&mut nets.target_critic);
        set(&mut nets.target_critic, "critic/b2", &[0.7]);
        let tr = tiny_transition(1.0, false);
        let y = AgentNets::critic_targets(std::slice::from_ref(&nets), 0, &[&tr], 0.95);
        // Zeroed weights make Q' equal its output bias everywhere.
        assert_abs_diff_eq!(y[0], 1.0 + 0.95 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn critic_matching_targets_has_zero_loss() {
        let mut nets = tiny_nets(1e-3);
        zeroed(&mut nets.critic_store);
        let tr = tiny_transition(0.0, false);
        let loss = nets.update_critic(&[&tr], &[0.0]);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn critic_overfits_a_constant_batch() {
        let mut nets = tiny_nets(1e-2);
        let tr = tiny_transition(0.3, false);
        let targets = [0.8];
        let initial = nets.update_critic(&[&tr], &targets);
        let mut last = initial;
        for _ in 0..199 {
            last = nets.update_critic(&[&tr], &targets);
        }
        assert!(
            last < 0.1 * initial,
            "loss {last} did not fall below 10% of initial {initial}"
        );
    }

    #[test]
    fn critic_loss_equals_an_independent_mse() {
        let mut nets = tiny_nets(1e-3);
        let a = tiny_transition(0.3, false);
        let b = tiny_transition(-0.2, false);
        let targets = [0.5, -0.5];
        let q_a = nets.critic_value(&nets.critic_store, &a.state, &a.actions);
        let q_b = nets.critic_value(&nets.critic_store, &b.state, &b.actions);
        let expect = ((q_a - 0.5).powi(2) + (q_b + 0.5).powi(2)) / 2.0;
        let loss = nets.update_critic(&[&a, &b], &targets);
        assert_abs_diff_eq!(loss, expect, epsilon = 1e-12);
    }

    #[test]
    fn a_critic_constant_in_actions_gives_zero_actor_gradient() {
        let mut nets = tiny_nets(1e-3);
        zeroed(&mut nets.critic_store);
        set(&mut nets.critic_store, "critic/b2", &[2.0]);
        let tr = tiny_transition(0.0, false);
        let norm = nets.update_actor(0, &[&tr]);
        assert_eq!(norm, 0.0);
    }

    #[test]
    fn actor_gradients_match_finite_differences_through_the_relaxation() {
        let nets = tiny_nets(1e-3);
        let a = tiny_transition(0.1, false);
        let b = {
            let mut t = tiny_transition(-0.4, false);
            t.obs[0] = vec![-0.3, 0.8, 0.2];
            t.masks[0] = vec![true, false];
            t
        };
        let batch = [&a, &b];
        let grads = {
            let refs = [&nets.actor_store, &nets.critic_store];
            let mut tape = Tape::new(&refs);
            let root = nets.actor_objective(0, &batch, &mut tape);
            tape.backward(root).expect("fresh tape")
        };
        let mut stores = vec![nets.actor_store.clone(), nets.critic_store.clone()];
        let err = crate::nn::max_relative_fd_error(&mut stores, &grads, 1e-5, |refs| {
            let mut tape = Tape::new(refs);
            let root = nets.actor_objective(0, &batch, &mut tape);
            tape.scalar(root)
        });
        assert!(err < 1e-4, "max relative FD error {err}");
    }

    #[test]
    fn bandit_actor_learns_the_better_arm() {
        // Critic fixed to read the first action slot: Q = tanh(tanh(a0)).
        let mut nets = tiny_nets(1e-2);
        zeroed(&mut nets.critic_store);
        set(
            &mut nets.critic_store,
            "critic/w0",
            &{
                let mut w = vec![0.0; 4 * 6];
                w[4] = 1.0;
                w
            },
        );
        set(&mut nets.critic_store, "critic/w1", &{
            let mut w = vec![0.0; 4 * 4];
            w[0] = 1.0;
            w
        });
        set(&mut nets.critic_store, "critic/w2", &[1.0, 0.0, 0.0, 0.0]);
        let tr = tiny_transition(0.0, false);
        for _ in 0..500 {
            nets.update_actor(0, &[&tr]);
        }
        let logits = nets.actor_logits(&nets.actor_store, &tr.obs[0]);
        let exp: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
        let p0 = exp[0] / (exp[0] + exp[1]);
        assert!(p0 > 0.9, "arm-0 probability {p0}");
    }
}
