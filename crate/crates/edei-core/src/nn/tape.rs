//! Reverse-mode autodiff over vector-valued nodes.
//!
//! A [`Tape`] records a forward computation against one or more frozen
//! parameter stores, then replays it backwards exactly once from a scalar
//! root, accumulating parameter gradients shaped like the stores. Values are
//! plain `Vec<f64>`; a [`Val`] is an index into the tape.
//!
//! The op set is exactly what the actors, critics, and the GRU prediction
//! head need; there is no broadcasting and no implicit shape coercion —
//! mismatches are hard errors at record time.

use super::{Gradients, NnError, ParamId, ParameterStore};

/// Handle to one recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Val(usize);

const BCE_CLAMP: f64 = 1e-12;

enum Op {
    Leaf,
    /// y = W·x, W an (m×n) matrix parameter.
    MatVec { store: usize, w: ParamId, x: Val },
    /// y = x + b, b a vector parameter.
    AddBias { store: usize, b: ParamId, x: Val },
    Add(Val, Val),
    Sub(Val, Val),
    /// Elementwise product.
    Mul(Val, Val),
    /// y = a·x + b elementwise with scalar constants.
    Affine { a: f64, x: Val },
    Tanh(Val),
    Sigmoid(Val),
    /// Zero-padded same-length convolution with a 3-tap kernel parameter:
    /// y_i = k0·x_{i+1} + k1·x_i + k2·x_{i−1}.
    Conv1x3 { store: usize, k: ParamId, x: Val },
    /// y = x + c for a constant vector c (action masking).
    Offset { x: Val },
    Softmax(Val),
    Concat(Vec<Val>),
    /// Scalar dot product.
    Dot(Val, Val),
    /// y = scale·Σx_i (scalar).
    SumScaled { x: Val, scale: f64 },
    /// y = scale·Σ(x_i − t_i)² (scalar).
    SqErr { x: Val, target: Vec<f64>, scale: f64 },
    /// y = −scale·Σ[t·ln p + (1−t)·ln(1−p)] with p clamped away from {0,1}.
    Bce { p: Val, target: Vec<f64>, scale: f64 },
}

pub struct Tape<'s> {
    stores: Vec<&'s ParameterStore>,
    vals: Vec<Vec<f64>>,
    ops: Vec<Op>,
    spent: bool,
}

impl<'s> Tape<'s> {
    pub fn new(stores: &[&'s ParameterStore]) -> Self {
        Tape { stores: stores.to_vec(), vals: Vec::new(), ops: Vec::new(), spent: false }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Val {
        self.vals.push(value);
        self.ops.push(op);
        Val(self.vals.len() - 1)
    }

    pub fn value(&self, v: Val) -> &[f64] {
        &self.vals[v.0]
    }

    /// The value of a length-1 node.
    pub fn scalar(&self, v: Val) -> f64 {
        debug_assert_eq!(self.vals[v.0].len(), 1);
        self.vals[v.0][0]
    }

    pub fn len(&self, v: Val) -> usize {
        self.vals[v.0].len()
    }

    /// Records a constant input (no gradient flows into it).
    pub fn leaf(&mut self, data: Vec<f64>) -> Val {
        self.push(data, Op::Leaf)
    }

    pub fn matvec(&mut self, store: usize, w: ParamId, x: Val) -> Result<Val, NnError> {
        let wt = self.stores[store].get(w);
        if !wt.is_matrix() {
            return Err(NnError::NotAMatrix { op: "matvec" });
        }
        let (m, n) = (wt.rows(), wt.cols());
        if self.vals[x.0].len() != n {
            return Err(NnError::ShapeMismatch { op: "matvec", expected: n, got: self.vals[x.0].len() });
        }
        let xv = &self.vals[x.0];
        let mut y = vec![0.0; m];
        for r in 0..m {
            let row = &wt.data[r * n..(r + 1) * n];
            y[r] = row.iter().zip(xv).map(|(w, x)| w * x).sum();
        }
        Ok(self.push(y, Op::MatVec { store, w, x }))
    }

    pub fn add_bias(&mut self, store: usize, b: ParamId, x: Val) -> Result<Val, NnError> {
        let bt = self.stores[store].get(b);
        if bt.len() != self.vals[x.0].len() {
            return Err(NnError::ShapeMismatch { op: "add_bias", expected: bt.len(), got: self.vals[x.0].len() });
        }
        let y = self.vals[x.0].iter().zip(&bt.data).map(|(x, b)| x + b).collect();
        Ok(self.push(y, Op::AddBias { store, b, x }))
    }

    fn binary(&mut self, op: &'static str, a: Val, b: Val) -> Result<(), NnError> {
        if self.vals[a.0].len() != self.vals[b.0].len() {
            return Err(NnError::ShapeMismatch {
                op,
                expected: self.vals[a.0].len(),
                got: self.vals[b.0].len(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Val, b: Val) -> Result<Val, NnError> {
        self.binary("add", a, b)?;
        let y = self.vals[a.0].iter().zip(&self.vals[b.0]).map(|(a, b)| a + b).collect();
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Val, b: Val) -> Result<Val, NnError> {
        self.binary("sub", a, b)?;
        let y = self.vals[a.0].iter().zip(&self.vals[b.0]).map(|(a, b)| a - b).collect();
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Val, b: Val) -> Result<Val, NnError> {
        self.binary("mul", a, b)?;
        let y = self.vals[a.0].iter().zip(&self.vals[b.0]).map(|(a, b)| a * b).collect();
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn affine(&mut self, a: f64, b: f64, x: Val) -> Val {
        let y = self.vals[x.0].iter().map(|v| a * v + b).collect();
        self.push(y, Op::Affine { a, x })
    }

    pub fn tanh(&mut self, x: Val) -> Val {
        let y = self.vals[x.0].iter().map(|v| v.tanh()).collect();
        self.push(y, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Val) -> Val {
        let y = self.vals[x.0].iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        self.push(y, Op::Sigmoid(x))
    }

    pub fn conv1x3(&mut self, store: usize, k: ParamId, x: Val) -> Result<Val, NnError> {
        let kt = self.stores[store].get(k);
        if kt.len() != 3 {
            return Err(NnError::ShapeMismatch { op: "conv1x3", expected: 3, got: kt.len() });
        }
        let (k0, k1, k2) = (kt.data[0], kt.data[1], kt.data[2]);
        let xv = &self.vals[x.0];
        let n = xv.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let right = if i + 1 < n { xv[i + 1] } else { 0.0 };
            let left = if i > 0 { xv[i - 1] } else { 0.0 };
            y[i] = k0 * right + k1 * xv[i] + k2 * left;
        }
        Ok(self.push(y, Op::Conv1x3 { store, k, x }))
    }

    pub fn offset(&mut self, c: &[f64], x: Val) -> Result<Val, NnError> {
        if c.len() != self.vals[x.0].len() {
            return Err(NnError::ShapeMismatch { op: "offset", expected: c.len(), got: self.vals[x.0].len() });
        }
        let y = self.vals[x.0].iter().zip(c).map(|(x, c)| x + c).collect();
        Ok(self.push(y, Op::Offset { x }))
    }

    pub fn softmax(&mut self, x: Val) -> Val {
        let xv = &self.vals[x.0];
        let max = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xv.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let y = exps.iter().map(|e| e / sum).collect();
        self.push(y, Op::Softmax(x))
    }

    pub fn concat(&mut self, parts: &[Val]) -> Val {
        let mut y = Vec::new();
        for &p in parts {
            y.extend_from_slice(&self.vals[p.0]);
        }
        self.push(y, Op::Concat(parts.to_vec()))
    }

    pub fn dot(&mut self, a: Val, b: Val) -> Result<Val, NnError> {
        self.binary("dot", a, b)?;
        let y = self.vals[a.0].iter().zip(&self.vals[b.0]).map(|(a, b)| a * b).sum();
        Ok(self.push(vec![y], Op::Dot(a, b)))
    }

    pub fn sum_scaled(&mut self, x: Val, scale: f64) -> Val {
        let y = scale * self.vals[x.0].iter().sum::<f64>();
        self.push(vec![y], Op::SumScaled { x, scale })
    }

    pub fn sq_err(&mut self, x: Val, target: &[f64], scale: f64) -> Result<Val, NnError> {
        if target.len() != self.vals[x.0].len() {
            return Err(NnError::ShapeMismatch { op: "sq_err", expected: target.len(), got: self.vals[x.0].len() });
        }
        let y = scale
            * self.vals[x.0]
                .iter()
                .zip(target)
                .map(|(x, t)| (x - t) * (x - t))
                .sum::<f64>();
        Ok(self.push(vec![y], Op::SqErr { x, target: target.to_vec(), scale }))
    }

    pub fn bce(&mut self, p: Val, target: &[f64], scale: f64) -> Result<Val, NnError> {
        if target.len() != self.vals[p.0].len() {
            return Err(NnError::ShapeMismatch { op: "bce", expected: target.len(), got: self.vals[p.0].len() });
        }
        let y = -scale
            * self.vals[p.0]
                .iter()
                .zip(target)
                .map(|(&p, &t)| {
                    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                })
                .sum::<f64>();
        Ok(self.push(vec![y], Op::Bce { p, target: target.to_vec(), scale }))
    }

    /// Accumulates d(root)/d(param) for every parameter in every store.
    /// `root` must be scalar. A tape can be walked backwards once.
    pub fn backward(&mut self, root: Val) -> Result<Gradients, NnError> {
        if self.spent {
            return Err(NnError::BackwardTwice);
        }
        if self.vals[root.0].len() != 1 {
            return Err(NnError::NonScalarRoot);
        }
        self.spent = true;

        let mut grads = Gradients::zeros_like(&self.stores);
        let mut adj: Vec<Vec<f64>> = self.vals.iter().map(|v| vec![0.0; v.len()]).collect();
        adj[root.0][0] = 1.0;

        for i in (0..self.ops.len()).rev() {
            if adj[i].iter().all(|&a| a == 0.0) {
                continue;
            }
            // Take this node's adjoint to appease the borrow checker while
            // scattering into input adjoints.
            let a = std::mem::take(&mut adj[i]);
            match &self.ops[i] {
                Op::Leaf => {}
                Op::MatVec { store, w, x } => {
                    let wt = self.stores[*store].get(*w);
                    let (m, n) = (wt.rows(), wt.cols());
                    let xv = &self.vals[x.0];
                    let gw = grads.param_mut(*store, *w);
                    for r in 0..m {
                        for c in 0..n {
                            gw[r * n + c] += a[r] * xv[c];
                        }
                    }
                    let gx = &mut adj[x.0];
                    for c in 0..n {
                        let mut acc = 0.0;
                        for r in 0..m {
                            acc += wt.data[r * n + c] * a[r];
                        }
                        gx[c] += acc;
                    }
                }
                Op::AddBias { store, b, x } => {
                    let gb = grads.param_mut(*store, *b);
                    for (g, &ai) in gb.iter_mut().zip(&a) {
                        *g += ai;
                    }
                    for (g, &ai) in adj[x.0].iter_mut().zip(&a) {
                        *g += ai;
                    }
                }
                Op::Add(p, q) => {
                    for (g, &ai) in adj[p.0].iter_mut().zip(&a) {
                        *g += ai;
                    }
                    for (g, &ai) in adj[q.0].iter_mut().zip(&a) {
                        *g += ai;
                    }
                }
                Op::Sub(p, q) => {
                    for (g, &ai) in adj[p.0].iter_mut().zip(&a) {
                        *g += ai;
                    }
                    for (g, &ai) in adj[q.0].iter_mut().zip(&a) {
                        *g -= ai;
                    }
                }
                Op::Mul(p, q) => {
                    let (pi, qi) = (p.0, q.0);
                    for k in 0..a.len() {
                        let (pv, qv) = (self.vals[pi][k], self.vals[qi][k]);
                        adj[pi][k] += a[k] * qv;
                        adj[qi][k] += a[k] * pv;
                    }
                }
                Op::Affine { a: s, x } => {
                    for (g, &ai) in adj[x.0].iter_mut().zip(&a) {
                        *g += s * ai;
                    }
                }
                Op::Tanh(x) => {
                    for k in 0..a.len() {
                        let y = self.vals[i][k];
                        adj[x.0][k] += a[k] * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(x) => {
                    for k in 0..a.len() {
                        let y = self.vals[i][k];
                        adj[x.0][k] += a[k] * y * (1.0 - y);
                    }
                }
                Op::Conv1x3 { store, k, x } => {
                    let kt = self.stores[*store].get(*k);
                    let (k0, k1, k2) = (kt.data[0], kt.data[1], kt.data[2]);
                    let xv = &self.vals[x.0];
                    let n = xv.len();
                    let gk = grads.param_mut(*store, *k);
                    for j in 0..n {
                        if j + 1 < n {
                            gk[0] += a[j] * xv[j + 1];
                        }
                        gk[1] += a[j] * xv[j];
                        if j > 0 {
                            gk[2] += a[j] * xv[j - 1];
                        }
                    }
                    let gx = &mut adj[x.0];
                    for j in 0..n {
                        let mut acc = k1 * a[j];
                        if j > 0 {
                            acc += k0 * a[j - 1];
                        }
                        if j + 1 < n {
                            acc += k2 * a[j + 1];
                        }
                        gx[j] += acc;
                    }
                }
                Op::Offset { x } => {
                    for (g, &ai) in adj[x.0].iter_mut().zip(&a) {
                        *g += ai;
                    }
                }
                Op::Softmax(x) => {
                    let y = &self.vals[i];
                    let dot: f64 = a.iter().zip(y).map(|(a, y)| a * y).sum();
                    for k in 0..a.len() {
                        adj[x.0][k] += y[k] * (a[k] - dot);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.vals[p.0].len();
                        for k in 0..len {
                            adj[p.0][k] += a[off + k];
                        }
                        off += len;
                    }
                }
                Op::Dot(p, q) => {
                    let (pi, qi) = (p.0, q.0);
                    for k in 0..self.vals[pi].len() {
                        let (pv, qv) = (self.vals[pi][k], self.vals[qi][k]);
                        adj[pi][k] += a[0] * qv;
                        adj[qi][k] += a[0] * pv;
                    }
                }
                Op::SumScaled { x, scale } => {
                    for g in adj[x.0].iter_mut() {
                        *g += a[0] * scale;
                    }
                }
                Op::SqErr { x, target, scale } => {
                    for k in 0..target.len() {
                        adj[x.0][k] += a[0] * scale * 2.0 * (self.vals[x.0][k] - target[k]);
                    }
                }
                Op::Bce { p, target, scale } => {
                    for k in 0..target.len() {
                        let pv = self.vals[p.0][k];
                        // Where the forward clamp is active the loss is
                        // locally constant in p, so the gradient is zero.
                        if pv > BCE_CLAMP && pv < 1.0 - BCE_CLAMP {
                            adj[p.0][k] += a[0] * scale * (pv - target[k]) / (pv * (1.0 - pv));
                        }
                    }
                }
            }
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_relative_fd_error, Tensor};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_store(shapes: &[(&str, usize, usize)], seed: u64) -> ParameterStore {
        let mut rng = crate::seed::derive_rng(seed, 0x77);
        let mut s = ParameterStore::new();
        for &(name, rows, cols) in shapes {
            let count = if cols == 0 { rows } else { rows * cols };
            let data: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
            if cols == 0 {
                s.add(name, Tensor::vector(data));
            } else {
                s.add(name, Tensor::matrix(rows, cols, data));
            }
        }
        s
    }

    #[test]
    fn sum_of_squares_gradient_is_two_p() {
        let mut s = ParameterStore::new();
        let p = s.add("p", Tensor::vector(vec![1.0, -2.0, 0.5]));
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![0.0, 0.0, 0.0]);
        let px = tape.add_bias(0, p, x).unwrap();
        let loss = tape.dot(px, px).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.param(0, p), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let s = random_store(&[("w", 3, 3)], 1);
        let mut tape = Tape::new(&[&s]);
        let c = tape.leaf(vec![5.0]);
        let loss = tape.sum_scaled(c, 1.0);
        let grads = tape.backward(loss).unwrap();
        let w = s.by_name("w").unwrap();
        assert!(grads.param(0, w).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_twice_errors() {
        let s = ParameterStore::new();
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![1.0]);
        let loss = tape.sum_scaled(x, 1.0);
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(NnError::BackwardTwice)));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let s = ParameterStore::new();
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![1.0, 2.0]);
        assert!(matches!(tape.backward(x), Err(NnError::NonScalarRoot)));
    }

    #[test]
    fn conv_identity_and_shift_kernels() {
        let mut s = ParameterStore::new();
        let ident = s.add("ident", Tensor::vector(vec![0.0, 1.0, 0.0]));
        let shift = s.add("shift", Tensor::vector(vec![1.0, 0.0, 0.0]));
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![1.0, 2.0, 3.0, 4.0]);
        let y = tape.conv1x3(0, ident, x).unwrap();
        assert_eq!(tape.value(y), &[1.0, 2.0, 3.0, 4.0]);
        let y = tape.conv1x3(0, shift, x).unwrap();
        assert_eq!(tape.value(y), &[2.0, 3.0, 4.0, 0.0], "kernel [1,0,0] left-shifts");
    }

    #[test]
    fn conv_matches_triple_sum_oracle() {
        let mut rng = crate::seed::derive_rng(9, 0x78);
        let mut s = ParameterStore::new();
        let kdata: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = s.add("k", Tensor::vector(kdata.clone()));
        let xv: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(xv.clone());
        let y = tape.conv1x3(0, k, x).unwrap();
        for i in 0..xv.len() {
            let right = if i + 1 < xv.len() { xv[i + 1] } else { 0.0 };
            let left = if i > 0 { xv[i - 1] } else { 0.0 };
            let expect = kdata[0] * right + kdata[1] * xv[i] + kdata[2] * left;
            assert_abs_diff_eq!(tape.value(y)[i], expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn conv_and_matvec_are_linear_in_input() {
        let s = random_store(&[("w", 4, 5), ("k", 3, 0)], 2);
        let w = s.by_name("w").unwrap();
        let k = s.by_name("k").unwrap();
        let mut rng = crate::seed::derive_rng(10, 0x79);
        let xa: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xb: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (ca, cb) = (1.7, -0.4);
        let combo: Vec<f64> = xa.iter().zip(&xb).map(|(a, b)| ca * a + cb * b).collect();

        let mut tape = Tape::new(&[&s]);
        let la = tape.leaf(xa);
        let lb = tape.leaf(xb);
        let lc = tape.leaf(combo);
        for op in [w, k] {
            let apply = |tape: &mut Tape, x: Val| {
                if op == w {
                    tape.matvec(0, w, x).unwrap()
                } else {
                    tape.conv1x3(0, k, x).unwrap()
                }
            };
            let ya = apply(&mut tape, la);
            let yb = apply(&mut tape, lb);
            let yc = apply(&mut tape, lc);
            for i in 0..tape.len(yc) {
                let expect = ca * tape.value(ya)[i] + cb * tape.value(yb)[i];
                assert_abs_diff_eq!(tape.value(yc)[i], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn softmax_normalizes_and_masks() {
        let s = ParameterStore::new();
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![1.0, 2.0, 3.0]);
        let masked = tape.offset(&[0.0, -1e9, 0.0], x).unwrap();
        let y = tape.softmax(masked);
        let v = tape.value(y);
        assert_abs_diff_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(v[1] < 1e-100, "masked slot carries no probability");
        assert!(v[2] > v[0]);
    }

    /// Every op in one composite graph, checked against central differences.
    #[test]
    fn composite_graph_matches_finite_differences() {
        let mut stores = vec![
            random_store(&[("w1", 4, 3), ("b1", 4, 0), ("k", 3, 0)], 3),
            random_store(&[("w2", 1, 8)], 4),
        ];
        let build = |stores: &[&ParameterStore]| -> f64 {
            let w1 = stores[0].by_name("w1").unwrap();
            let b1 = stores[0].by_name("b1").unwrap();
            let k = stores[0].by_name("k").unwrap();
            let w2 = stores[1].by_name("w2").unwrap();
            let mut tape = Tape::new(stores);
            let x = tape.leaf(vec![0.3, -0.7, 0.9]);
            let h = tape.matvec(0, w1, x).unwrap();
            let h = tape.add_bias(0, b1, h).unwrap();
            let t = tape.tanh(h);
            let sg = tape.sigmoid(h);
            let m = tape.mul(t, sg).unwrap();
            let c = tape.conv1x3(0, k, m).unwrap();
            let sm = tape.softmax(c);
            let d = tape.sub(sm, t).unwrap();
            let a = tape.affine(0.5, 0.1, d);
            let cat = tape.concat(&[a, sm]);
            let q = tape.matvec(1, w2, cat).unwrap();
            let sq = tape.sq_err(q, &[0.37], 1.0).unwrap();
            tape.scalar(sq)
        };
        let grads = {
            let refs: Vec<&ParameterStore> = stores.iter().collect();
            let w1 = refs[0].by_name("w1").unwrap();
            let b1 = refs[0].by_name("b1").unwrap();
            let k = refs[0].by_name("k").unwrap();
            let w2 = refs[1].by_name("w2").unwrap();
            let mut tape = Tape::new(&refs);
            let x = tape.leaf(vec![0.3, -0.7, 0.9]);
            let h = tape.matvec(0, w1, x).unwrap();
            let h = tape.add_bias(0, b1, h).unwrap();
            let t = tape.tanh(h);
            let sg = tape.sigmoid(h);
            let m = tape.mul(t, sg).unwrap();
            let c = tape.conv1x3(0, k, m).unwrap();
            let sm = tape.softmax(c);
            let d = tape.sub(sm, t).unwrap();
            let a = tape.affine(0.5, 0.1, d);
            let cat = tape.concat(&[a, sm]);
            let q = tape.matvec(1, w2, cat).unwrap();
            let sq = tape.sq_err(q, &[0.37], 1.0).unwrap();
            tape.backward(sq).unwrap()
        };
        let err = max_relative_fd_error(&mut stores, &grads, 1e-5, build);
        assert!(err < 1e-4, "max relative FD error {err}");
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut stores = vec![random_store(&[("w", 3, 2), ("b", 3, 0)], 5)];
        let build = |stores: &[&ParameterStore]| -> f64 {
            let w = stores[0].by_name("w").unwrap();
            let b = stores[0].by_name("b").unwrap();
            let mut tape = Tape::new(stores);
            let x = tape.leaf(vec![0.8, -0.2]);
            let h = tape.matvec(0, w, x).unwrap();
            let h = tape.add_bias(0, b, h).unwrap();
            let p = tape.sigmoid(h);
            let loss = tape.bce(p, &[1.0, 0.0, 1.0], 0.5).unwrap();
            tape.scalar(loss)
        };
        let grads = {
            let refs: Vec<&ParameterStore> = stores.iter().collect();
            let w = refs[0].by_name("w").unwrap();
            let b = refs[0].by_name("b").unwrap();
            let mut tape = Tape::new(&refs);
            let x = tape.leaf(vec![0.8, -0.2]);
            let h = tape.matvec(0, w, x).unwrap();
            let h = tape.add_bias(0, b, h).unwrap();
            let p = tape.sigmoid(h);
            let loss = tape.bce(p, &[1.0, 0.0, 1.0], 0.5).unwrap();
            tape.backward(loss).unwrap()
        };
        let err = max_relative_fd_error(&mut stores, &grads, 1e-5, build);
        assert!(err < 1e-4, "max relative FD error {err}");
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut s = ParameterStore::new();
        let w = s.add("w", Tensor::matrix(2, 3, vec![0.0; 6]));
        let mut tape = Tape::new(&[&s]);
        let x = tape.leaf(vec![1.0, 2.0]);
        assert!(matches!(
            tape.matvec(0, w, x),
            Err(NnError::ShapeMismatch { op: "matvec", expected: 3, got: 2 })
        ));
        let y = tape.leaf(vec![1.0, 2.0, 3.0]);
        assert!(tape.add(x, y).is_err());
    }
}
