//! Self-contained dense neural kernel: named f64 parameter stores, a
//! reverse-mode tape ([`tape`]), the GRU/MLP layer shapes ([`layers`]), and
//! an Adam optimizer.
//!
//! Everything runs in 64-bit arithmetic so central finite differences can
//! validate gradients at tight tolerances. Networks here are tiny; there is
//! no batching machinery beyond plain loops over samples on one tape.

pub mod layers;
pub mod tape;

pub use layers::{Gru, Mlp};
pub use tape::{Tape, Val};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch { op: &'static str, expected: usize, got: usize },
    #[error("{op} expects a matrix parameter")]
    NotAMatrix { op: &'static str },
    #[error("backward already consumed this tape")]
    BackwardTwice,
    #[error("backward root must be a scalar (length-1) value")]
    NonScalarRoot,
}

/// Dense rank-1 or rank-2 value with shape metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn zeros_vector(len: usize) -> Self {
        Tensor { shape: vec![len], data: vec![0.0; len] }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }
}

/// Handle into one [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors for one network. Shapes are fixed at creation;
/// values change only through optimizer steps or checkpoint loads.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore {
    params: Vec<(String, Tensor)>,
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore::default()
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            self.by_name(name).is_none(),
            "duplicate parameter name {name}"
        );
        self.params.push((name.to_string(), tensor));
        ParamId(self.params.len() - 1)
    }

    /// Matrix with Xavier-uniform init: U(−a, a), a = sqrt(6/(fan_in+fan_out)).
    pub fn add_matrix_xavier(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
        self.add(name, Tensor::matrix(rows, cols, data))
    }

    pub fn add_vector_zeros(&mut self, name: &str, len: usize) -> ParamId {
        self.add(name, Tensor::zeros_vector(len))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].0
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|(n, _)| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Per-store gradients produced by [`Tape::backward`], laid out to mirror
/// the parameter shapes.
#[derive(Clone, Debug)]
pub struct Gradients {
    per_store: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub(crate) fn zeros_like(stores: &[&ParameterStore]) -> Self {
        Gradients {
            per_store: stores
                .iter()
                .map(|s| s.iter().map(|(_, t)| vec![0.0; t.len()]).collect())
                .collect(),
        }
    }

    pub(crate) fn param_mut(&mut self, store: usize, id: ParamId) -> &mut [f64] {
        &mut self.per_store[store][id.0]
    }

    pub fn param(&self, store: usize, id: ParamId) -> &[f64] {
        &self.per_store[store][id.0]
    }

    pub fn store(&self, store: usize) -> &[Vec<f64>] {
        &self.per_store[store]
    }

    pub fn l2_norm(&self, store: usize) -> f64 {
        self.per_store[store]
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams { lr, ..AdamParams::default() }
    }
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moment buffers for one parameter store.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    /// Updates skipped because a gradient was NaN/Inf.
    pub skipped: u64,
}

impl AdamState {
    pub fn new(store: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0, skipped: 0 }
    }

    /// One Adam update over the whole store. A non-finite gradient anywhere
    /// skips the entire update and bumps `skipped`. Returns whether the
    /// update was applied. Parameters are asserted finite afterwards.
    pub fn step(
        &mut self,
        store: &mut ParameterStore,
        grads: &[Vec<f64>],
        hp: AdamParams,
    ) -> bool {
        assert_eq!(grads.len(), store.len(), "gradient layout mismatch");
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            self.skipped += 1;
            return false;
        }
        self.t += 1;
        let bc1 = 1.0 - hp.beta1.powi(self.t as i32);
        let bc2 = 1.0 - hp.beta2.powi(self.t as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let g = &grads[id.0];
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = &mut store.get_mut(id).data;
            for k in 0..g.len() {
                m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * g[k];
                v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * g[k] * g[k];
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                p[k] -= hp.lr * mh / (vh.sqrt() + hp.eps);
            }
        }
        assert!(store.all_finite(), "non-finite parameter after Adam update");
        true
    }
}

/// Max relative error between `grads` and central finite differences of
/// `loss` over every scalar in `stores`. The relative error of a pair (a, d)
/// is |a − d| / max(1, |a|, |d|).
pub fn max_relative_fd_error(
    stores: &mut [ParameterStore],
    grads: &Gradients,
    h: f64,
    loss: impl Fn(&[&ParameterStore]) -> f64,
) -> f64 {
    let eval = |stores: &[ParameterStore]| {
        let refs: Vec<&ParameterStore> = stores.iter().collect();
        loss(&refs)
    };
    let mut worst = 0.0f64;
    for si in 0..stores.len() {
        for id in stores[si].ids().collect::<Vec<_>>() {
            for k in 0..stores[si].get(id).len() {
                let orig = stores[si].get(id).data[k];
                stores[si].get_mut(id).data[k] = orig + h;
                let up = eval(stores);
                stores[si].get_mut(id).data[k] = orig - h;
                let down = eval(stores);
                stores[si].get_mut(id).data[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = grads.param(si, id)[k];
                let err = (a - fd).abs() / 1.0f64.max(a.abs()).max(fd.abs());
                worst = worst.max(err);
            }
        }
    }
    worst
}
