//! Incident forecasting.
//!
//! A small recurrent model scores, per node, the chance of an ignition in
//! the next step from a short window of node features. Nodes scoring above
//! a threshold form the prediction set the anticipatory policy plans
//! against: they enter observations, bias the success reward, and mark
//! nodes whose assets are worth moving to safety.
//!
//! Per node the model unrolls a GRU over the feature window, mixes the
//! final hidden state with a 3-tap convolution, and maps it through a
//! dense layer and a sigmoid.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

use crate::env::World;
use crate::graph::{DistanceMap, NodeId};
use crate::nn::{AdamParams, AdamState, Gru, NnError, ParamId, ParameterStore, Tape, Val};

/// Feature columns per node and step.
pub const FEATURES: usize = 4;

/// The vulnerability normalizer caps the burning-neighborhood sum at four
/// full-severity nodes at distance one; larger sums saturate past 1.
pub const VULNERABILITY_SPAN: f64 = 4.0;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Nodes forecast to ignite, each with its predicted probability. Entries
/// are unique and sorted by node id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictionSet {
    entries: Vec<(NodeId, f64)>,
}

impl PredictionSet {
    pub fn empty() -> Self {
        PredictionSet::default()
    }

    /// Keeps every node whose probability exceeds `threshold`.
    pub fn from_probs(probs: &[f64], threshold: f64) -> Self {
        let entries = probs
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > threshold)
            .map(|(i, &p)| (NodeId(i as u32), p))
            .collect();
        PredictionSet { entries }
    }

    pub fn from_entries(raw: Vec<(u32, f64)>) -> Self {
        let mut entries: Vec<(NodeId, f64)> =
            raw.into_iter().map(|(id, p)| (NodeId(id), p)).collect();
        entries.sort_unstable_by_key(|&(id, _)| id);
        debug_assert!(entries.windows(2).all(|w| w[0].0 != w[1].0), "duplicate node");
        PredictionSet { entries }
    }

    pub fn get(&self, node: NodeId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&node, |&(id, _)| id)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.get(node).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(NodeId, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.entries.iter().map(|&(id, _)| id).collect()
    }
}

/// Asset-weighted exposure of `node` to the currently burning set: its
/// weight times the severity of each burning node over their distance.
/// Unreachable nodes contribute nothing.
pub fn vulnerability(
    dist: &DistanceMap,
    weight: f64,
    severity: &[f64],
    burning: &[NodeId],
    node: NodeId,
) -> f64 {
    let mut acc = 0.0;
    for &j in burning {
        if let Some(d) = dist.distance(node, j) {
            acc += severity[j.idx()] / d.max(1) as f64;
        }
    }
    weight * acc
}

fn feature_rows(world: &World, severity: &[f64], burning: &[NodeId]) -> Vec<[f64; FEATURES]> {
    let cfg = world.cfg();
    let w_max = cfg.w_max() as f64;
    let vuln_max = w_max * cfg.tau * VULNERABILITY_SPAN;
    (0..cfg.n_nodes())
        .map(|i| {
            let id = NodeId(i as u32);
            let weight = world.nodes().assets(id) as f64;
            [
                severity[i],
                f64::from(world.graphs().op.node(id).category.code()) / 2.0,
                weight / w_max,
                vulnerability(&world.graphs().dist, weight, severity, burning, id) / vuln_max,
            ]
        })
        .collect()
}

/// Features from the team's shared belief, as available at decision time.
pub fn extract_features(world: &World) -> Vec<[f64; FEATURES]> {
    let burning: Vec<NodeId> = world
        .known_incident()
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .map(|(i, _)| NodeId(i as u32))
        .collect();
    feature_rows(world, world.known_f(), &burning)
}

/// Features from the true world state, for building training datasets.
pub fn extract_features_revealed(world: &World) -> Vec<[f64; FEATURES]> {
    let burning = world.nodes().incident_nodes();
    feature_rows(world, world.severity().values(), &burning)
}

/// Sliding window of per-node feature frames, newest last. Shorter
/// histories are left-padded by repeating the oldest frame.
#[derive(Clone, Debug)]
pub struct FeatureHistory {
    cap: usize,
    frames: VecDeque<Vec<[f64; FEATURES]>>,
}

impl FeatureHistory {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "history window must be positive");
        FeatureHistory { cap: window, frames: VecDeque::with_capacity(window) }
    }

    pub fn push(&mut self, frame: Vec<[f64; FEATURES]>) {
        debug_assert!(self.frames.iter().all(|f| f.len() == frame.len()));
        if self.frames.len() == self.cap {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.frames.front().map_or(0, Vec::len)
    }

    /// Window for one node, always `window` frames long.
    pub fn sequence(&self, node: usize) -> Vec<[f64; FEATURES]> {
        let mut seq = Vec::with_capacity(self.cap);
        let first = &self.frames[0];
        for _ in self.frames.len()..self.cap {
            seq.push(first[node]);
        }
        seq.extend(self.frames.iter().map(|frame| frame[node]));
        seq
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorSample {
    pub seq: Vec<[f64; FEATURES]>,
    pub label: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PredictorDataset {
    pub samples: Vec<PredictorSample>,
}

impl PredictorDataset {
    pub fn new() -> Self {
        PredictorDataset::default()
    }

    pub fn push(&mut self, seq: Vec<[f64; FEATURES]>, label: f64) {
        self.samples.push(PredictorSample { seq, label });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of positive labels.
    pub fn positive_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.label > 0.5).count() as f64 / self.samples.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorConfig {
    pub hidden: usize,
    /// Frames per input window.
    pub unroll: usize,
    /// Probability above which a node enters the prediction set.
    pub threshold: f64,
    pub lr: f64,
    pub batch: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig { hidden: 16, unroll: 4, threshold: 0.05, lr: 1e-3, batch: 64 }
    }
}

#[derive(Clone)]
pub struct Predictor {
    cfg: PredictorConfig,
    store: ParameterStore,
    gru: Gru,
    kernel: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

impl Predictor {
    pub fn new(cfg: PredictorConfig, rng: &mut impl Rng) -> Self {
        let mut store = ParameterStore::new();
        let gru = Gru::init(&mut store, "gru", FEATURES, cfg.hidden, rng);
        let taps = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let kernel = store.add("conv/k", crate::nn::Tensor::vector(taps));
        let out_w = store.add_matrix_xavier("out/w", 1, cfg.hidden, rng);
        let out_b = store.add_vector_zeros("out/b", 1);
        Predictor { cfg, store, gru, kernel, out_w, out_b }
    }

    /// Rebinds a predictor onto parameters restored from a checkpoint.
    pub fn from_store(cfg: PredictorConfig, store: ParameterStore) -> Option<Self> {
        let gru = Gru::bind(&store, "gru", FEATURES, cfg.hidden)?;
        let kernel = store.by_name("conv/k")?;
        let out_w = store.by_name("out/w")?;
        let out_b = store.by_name("out/b")?;
        Some(Predictor { cfg, store, gru, kernel, out_w, out_b })
    }

    pub fn config(&self) -> PredictorConfig {
        self.cfg
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    fn forward(&self, tape: &mut Tape, seq: &[[f64; FEATURES]]) -> Result<Val, NnError> {
        let leaves: Vec<Val> = seq.iter().map(|f| tape.leaf(f.to_vec())).collect();
        let h = self.gru.unroll(tape, 0, &leaves)?;
        let mixed = tape.conv1x3(0, self.kernel, h)?;
        let logit = tape.matvec(0, self.out_w, mixed)?;
        let logit = tape.add_bias(0, self.out_b, logit)?;
        Ok(tape.sigmoid(logit))
    }

    /// Ignition probability for one node window.
    pub fn predict_prob(&self, seq: &[[f64; FEATURES]]) -> f64 {
        let mut tape = Tape::new(&[&self.store]);
        let p = self.forward(&mut tape, seq).expect("predictor shapes are fixed at init");
        tape.scalar(p)
    }

    /// Per-node ignition probabilities for the current history window.
    pub fn predict(&self, history: &FeatureHistory) -> Vec<f64> {
        (0..history.n_nodes()).map(|i| self.predict_prob(&history.sequence(i))).collect()
    }

    pub fn prediction_set(&self, history: &FeatureHistory) -> PredictionSet {
        PredictionSet::from_probs(&self.predict(history), self.cfg.threshold)
    }

    /// Minibatch Adam on mean binary cross-entropy. Returns the mean loss
    /// per epoch, measured as trained.
    pub fn train(
        &mut self,
        dataset: &PredictorDataset,
        epochs: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>, PredictorError> {
        if dataset.is_empty() {
            return Err(PredictorError::EmptyDataset);
        }
        let hp = AdamParams::with_lr(self.cfg.lr);
        let mut adam = AdamState::new(&self.store);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut losses = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(self.cfg.batch) {
                let (loss, grads) = {
                    let mut tape = Tape::new(&[&self.store]);
                    let scale = 1.0 / chunk.len() as f64;
                    let mut total: Option<Val> = None;
                    for &idx in chunk {
                        let sample = &dataset.samples[idx];
                        let p = self.forward(&mut tape, &sample.seq)?;
                        let term = tape.bce(p, &[sample.label], scale)?;
                        total = Some(match total {
                            Some(t) => tape.add(t, term)?,
                            None => term,
                        });
                    }
                    let root = total.expect("chunks are nonempty");
                    (tape.scalar(root), tape.backward(root)?)
                };
                epoch_loss += loss * chunk.len() as f64;
                adam.step(&mut self.store, grads.store(0), hp);
            }
            losses.push(epoch_loss / dataset.len() as f64);
        }
        Ok(losses)
    }

    /// Fraction of samples classified correctly at a 0.5 cutoff.
    pub fn accuracy(&self, dataset: &PredictorDataset) -> f64 {
        let correct = dataset
            .samples
            .iter()
            .filter(|s| (self.predict_prob(&s.seq) > 0.5) == (s.label > 0.5))
            .count();
        correct as f64 / dataset.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AssetCategory, OperationGraph, Node};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn prediction_set_filters_on_the_threshold() {
        let set = PredictionSet::from_probs(&[0.01, 0.05, 0.06, 0.9, 0.0], 0.05);
        assert_eq!(set.node_ids(), vec![NodeId(2), NodeId(3)]);
        assert_eq!(set.get(NodeId(3)), Some(0.9));
        assert_eq!(set.get(NodeId(1)), None, "exactly at threshold is excluded");
        assert!(set.contains(NodeId(2)));
        assert!(!set.contains(NodeId(0)));
        assert_eq!(set.len(), 2);
        assert!(PredictionSet::empty().is_empty());
    }

    #[test]
    fn from_entries_sorts_and_answers_lookups() {
        let set = PredictionSet::from_entries(vec![(7, 0.3), (2, 0.8), (5, 0.1)]);
        assert_eq!(set.node_ids(), vec![NodeId(2), NodeId(5), NodeId(7)]);
        assert_eq!(set.get(NodeId(5)), Some(0.1));
        assert_eq!(set.iter().count(), 3);
    }

    fn path_graph(n: u32) -> (OperationGraph, DistanceMap) {
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
        let graph = OperationGraph::new((n, 1), nodes, &edges).unwrap();
        let dist = DistanceMap::build(&graph);
        (graph, dist)
    }

    #[test]
    fn vulnerability_sums_severity_over_distance() {
        let (_, dist) = path_graph(5);
        let severity = [0.0, 0.8, 0.0, 0.4, 0.0];
        let burning = [NodeId(1), NodeId(3)];
        let v = vulnerability(&dist, 10.0, &severity, &burning, NodeId(0));
        assert_abs_diff_eq!(v, 10.0 * (0.8 / 1.0 + 0.4 / 3.0), epsilon = 1e-12);
        // A burning node measures its own severity at the distance floor.
        let v = vulnerability(&dist, 10.0, &severity, &burning, NodeId(1));
        assert_abs_diff_eq!(v, 10.0 * (0.8 / 1.0 + 0.4 / 2.0), epsilon = 1e-12);
        assert_eq!(vulnerability(&dist, 10.0, &severity, &[], NodeId(0)), 0.0);
    }

    #[test]
    fn vulnerability_skips_unreachable_nodes() {
        let nodes: Vec<Node> = (0..3)
            .map(|i| Node {
                id: NodeId(i),
                pos: (i, 0),
                initial_assets: 100,
                category: AssetCategory::General,
            })
            .collect();
        // Node 2 is an island.
        let graph = OperationGraph::new((3, 1), nodes, &[(NodeId(0), NodeId(1), 1)]).unwrap();
        let dist = DistanceMap::build(&graph);
        let severity = [0.0, 0.5, 0.9];
        let v = vulnerability(&dist, 1.0, &severity, &[NodeId(1), NodeId(2)], NodeId(0));
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
    }

    fn quiet_world() -> World {
        use crate::scenario::generate::{generate, ScenarioKind};
        use std::sync::Arc;
        let mut cfg = generate(ScenarioKind::StorageReduced, 1, 1, 3).unwrap();
        cfg.initial_incidents.clear();
        let graphs = Arc::new(cfg.build_graphs().unwrap());
        World::reset(Arc::new(cfg), graphs, 3)
    }

    #[test]
    fn features_on_a_quiet_world_zero_the_dynamic_columns() {
        let w = quiet_world();
        let rows = extract_features(&w);
        assert_eq!(rows.len(), w.cfg().n_nodes());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[0], 0.0, "severity column");
            assert_eq!(row[3], 0.0, "vulnerability column");
            let id = NodeId(i as u32);
            let code = w.graphs().op.node(id).category.code();
            assert_eq!(row[1], f64::from(code) / 2.0);
            let expected = w.nodes().assets(id) as f64 / w.cfg().w_max() as f64;
            assert_eq!(row[2], expected);
            assert!((0.0..=1.0).contains(&row[2]));
        }
        assert_eq!(extract_features_revealed(&w), rows, "no incidents, no belief gap");
    }

    #[test]
    fn history_left_pads_with_the_oldest_frame() {
        let mut h = FeatureHistory::new(4);
        assert_eq!(h.n_nodes(), 0);
        h.push(vec![[1.0, 0.0, 0.0, 0.0], [9.0, 0.0, 0.0, 0.0]]);
        h.push(vec![[2.0, 0.0, 0.0, 0.0], [8.0, 0.0, 0.0, 0.0]]);
        let seq = h.sequence(0);
        assert_eq!(seq.len(), 4);
        assert_eq!(seq[0][0], 1.0);
        assert_eq!(seq[1][0], 1.0);
        assert_eq!(seq[2][0], 1.0);
        assert_eq!(seq[3][0], 2.0);
        for t in 0..5 {
            h.push(vec![[10.0 + t as f64, 0.0, 0.0, 0.0], [0.0; 4]]);
        }
        assert_eq!(h.len(), 4, "window is capped");
        let seq = h.sequence(0);
        assert_eq!(seq.iter().map(|f| f[0]).collect::<Vec<_>>(), vec![11.0, 12.0, 13.0, 14.0]);
    }

    #[test]
    fn zero_parameters_give_a_constant_half_probability() {
        let mut rng = crate::seed::derive_rng(1, 0xA0);
        let mut p = Predictor::new(PredictorConfig::default(), &mut rng);
        for id in p.store.ids().collect::<Vec<_>>() {
            p.store.get_mut(id).data.fill(0.0);
        }
        let mut rng = crate::seed::derive_rng(2, 0xA1);
        for _ in 0..3 {
            let seq: Vec<[f64; FEATURES]> =
                (0..4).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
            assert_abs_diff_eq!(p.predict_prob(&seq), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn forward_matches_a_hand_unrolled_computation() {
        let cfg = PredictorConfig { hidden: 1, unroll: 2, ..PredictorConfig::default() };
        let mut rng = crate::seed::derive_rng(3, 0xA2);
        let mut p = Predictor::new(cfg, &mut rng);
        let set = |p: &mut Predictor, name: &str, data: &[f64]| {
            let id = p.store.by_name(name).unwrap();
            p.store.get_mut(id).data.copy_from_slice(data);
        };
        set(&mut p, "gru/wz", &[0.7, 0.0, 0.0, 0.0]);
        set(&mut p, "gru/uz", &[-0.3]);
        set(&mut p, "gru/bz", &[0.1]);
        set(&mut p, "gru/wr", &[0.4, 0.0, 0.0, 0.0]);
        set(&mut p, "gru/ur", &[0.2]);
        set(&mut p, "gru/br", &[-0.2]);
        set(&mut p, "gru/wh", &[1.1, 0.0, 0.0, 0.0]);
        set(&mut p, "gru/uh", &[-0.5]);
        set(&mut p, "gru/bh", &[0.05]);
        set(&mut p, "conv/k", &[0.3, 0.8, -0.1]);
        set(&mut p, "out/w", &[1.5]);
        set(&mut p, "out/b", &[-0.25]);

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h: f64 = 0.0;
        for x in [0.9, 0.2] {
            let z = sig(0.7 * x - 0.3 * h + 0.1);
            let r = sig(0.4 * x + 0.2 * h - 0.2);
            let cand = (1.1 * x - 0.5 * (r * h) + 0.05).tanh();
            h = (1.0 - z) * h + z * cand;
        }
        // On a length-1 hidden state only the centre tap applies.
        let expect = sig(1.5 * (0.8 * h) - 0.25);
        let seq = [[0.9, 0.0, 0.0, 0.0], [0.2, 0.0, 0.0, 0.0]];
        assert_abs_diff_eq!(p.predict_prob(&seq), expect, epsilon = 1e-12);
    }

    #[test]
    fn training_rejects_an_empty_dataset() {
        let mut rng = crate::seed::derive_rng(4, 0xA3);
        let mut p = Predictor::new(PredictorConfig::default(), &mut rng);
        let mut train_rng = crate::seed::derive_rng(5, 0xA4);
        assert!(matches!(
            p.train(&PredictorDataset::new(), 1, &mut train_rng),
            Err(PredictorError::EmptyDataset)
        ));
    }

    #[test]
    fn all_negative_labels_drive_probabilities_down() {
        let cfg = PredictorConfig { hidden: 4, lr: 5e-2, ..PredictorConfig::default() };
        let mut rng = crate::seed::derive_rng(6, 0xA5);
        let mut p = Predictor::new(cfg, &mut rng);
        let mut data_rng = crate::seed::derive_rng(7, 0xA6);
        let mut dataset = PredictorDataset::new();
        for _ in 0..64 {
            let seq: Vec<[f64; FEATURES]> = (0..4)
                .map(|_| std::array::from_fn(|_| data_rng.random_range(0.0..1.0)))
                .collect();
            dataset.push(seq, 0.0);
        }
        let mut train_rng = crate::seed::derive_rng(8, 0xA7);
        let losses = p.train(&dataset, 20, &mut train_rng).unwrap();
        assert!(losses.last().unwrap() < losses.first().unwrap());
        let mean: f64 = dataset.samples.iter().map(|s| p.predict_prob(&s.seq)).sum::<f64>()
            / dataset.len() as f64;
        assert!(mean < 0.2, "mean probability {mean} should collapse toward zero");
    }

    #[test]
    fn a_simple_rule_is_learnable() {
        // Label = the last frame's severity column exceeds 0.5.
        let cfg = PredictorConfig { hidden: 8, lr: 1e-2, ..PredictorConfig::default() };
        let mut rng = crate::seed::derive_rng(9, 0xA8);
        let mut p = Predictor::new(cfg, &mut rng);
        let mut data_rng = crate::seed::derive_rng(10, 0xA9);
        let mut dataset = PredictorDataset::new();
        for _ in 0..300 {
            let seq: Vec<[f64; FEATURES]> = (0..4)
                .map(|_| std::array::from_fn(|_| data_rng.random_range(0.0..1.0)))
                .collect();
            let label = if seq[3][0] > 0.5 { 1.0 } else { 0.0 };
            dataset.push(seq, label);
        }
        let mut train_rng = crate::seed::derive_rng(11, 0xAA);
        let losses = p.train(&dataset, 60, &mut train_rng).unwrap();
        assert!(losses.last().unwrap() < losses.first().unwrap());
        let acc = p.accuracy(&dataset);
        assert!(acc > 0.85, "training accuracy {acc}");
        assert!(dataset.positive_rate() > 0.3 && dataset.positive_rate() < 0.7);
    }
}
