//! Network building blocks recorded onto a [`Tape`](super::tape::Tape).
//!
//! Layers own parameter handles, not parameter values; the same layer
//! description can therefore run against a live store and its target copy.

use rand::Rng;

use super::tape::{Tape, Val};
use super::{NnError, ParamId, ParameterStore};

/// Gated recurrent unit over a fixed input width and hidden width.
///
/// Cell update for input x and previous hidden h:
///   z  = sigmoid(Wz x + Uz h + bz)
///   r  = sigmoid(Wr x + Ur h + br)
///   h~ = tanh(Wh x + Uh (r ∘ h) + bh)
///   h' = (1 − z) ∘ h + z ∘ h~
#[derive(Clone)]
pub struct Gru {
    pub input: usize,
    pub hidden: usize,
    wz: ParamId,
    uz: ParamId,
    bz: ParamId,
    wr: ParamId,
    ur: ParamId,
    br: ParamId,
    wh: ParamId,
    uh: ParamId,
    bh: ParamId,
}

impl Gru {
    /// Registers all nine parameter tensors under `prefix` in `store`.
    pub fn init(
        store: &mut ParameterStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let wz = store.add_matrix_xavier(&format!("{prefix}/wz"), hidden, input, rng);
        let uz = store.add_matrix_xavier(&format!("{prefix}/uz"), hidden, hidden, rng);
        let bz = store.add_vector_zeros(&format!("{prefix}/bz"), hidden);
        let wr = store.add_matrix_xavier(&format!("{prefix}/wr"), hidden, input, rng);
        let ur = store.add_matrix_xavier(&format!("{prefix}/ur"), hidden, hidden, rng);
        let br = store.add_vector_zeros(&format!("{prefix}/br"), hidden);
        let wh = store.add_matrix_xavier(&format!("{prefix}/wh"), hidden, input, rng);
        let uh = store.add_matrix_xavier(&format!("{prefix}/uh"), hidden, hidden, rng);
        let bh = store.add_vector_zeros(&format!("{prefix}/bh"), hidden);
        Gru { input, hidden, wz, uz, bz, wr, ur, br, wh, uh, bh }
    }

    /// Rebinds the layer to parameters with the same names in another store.
    pub fn bind(store: &ParameterStore, prefix: &str, input: usize, hidden: usize) -> Option<Self> {
        Some(Gru {
            input,
            hidden,
            wz: store.by_name(&format!("{prefix}/wz"))?,
            uz: store.by_name(&format!("{prefix}/uz"))?,
            bz: store.by_name(&format!("{prefix}/bz"))?,
            wr: store.by_name(&format!("{prefix}/wr"))?,
            ur: store.by_name(&format!("{prefix}/ur"))?,
            br: store.by_name(&format!("{prefix}/br"))?,
            wh: store.by_name(&format!("{prefix}/wh"))?,
            uh: store.by_name(&format!("{prefix}/uh"))?,
            bh: store.by_name(&format!("{prefix}/bh"))?,
        })
    }

    /// One cell step; `store` is the tape index of the owning store.
    pub fn cell(&self, tape: &mut Tape, store: usize, x: Val, h: Val) -> Result<Val, NnError> {
        let zx = tape.matvec(store, self.wz, x)?;
        let zh = tape.matvec(store, self.uz, h)?;
        let z = tape.add(zx, zh)?;
        let z = tape.add_bias(store, self.bz, z)?;
        let z = tape.sigmoid(z);

        let rx = tape.matvec(store, self.wr, x)?;
        let rh = tape.matvec(store, self.ur, h)?;
        let r = tape.add(rx, rh)?;
        let r = tape.add_bias(store, self.br, r)?;
        let r = tape.sigmoid(r);

        let gated = tape.mul(r, h)?;
        let cx = tape.matvec(store, self.wh, x)?;
        let ch = tape.matvec(store, self.uh, gated)?;
        let cand = tape.add(cx, ch)?;
        let cand = tape.add_bias(store, self.bh, cand)?;
        let cand = tape.tanh(cand);

        let one_minus_z = tape.affine(-1.0, 1.0, z);
        let keep = tape.mul(one_minus_z, h)?;
        let take = tape.mul(z, cand)?;
        tape.add(keep, take)
    }

    /// Runs the cell over `xs` starting from a zero hidden state and returns
    /// the final hidden value.
    pub fn unroll(&self, tape: &mut Tape, store: usize, xs: &[Val]) -> Result<Val, NnError> {
        let mut h = tape.leaf(vec![0.0; self.hidden]);
        for &x in xs {
            h = self.cell(tape, store, x, h)?;
        }
        Ok(h)
    }
}

/// Fully connected net with tanh hidden activations and a linear last layer.
#[derive(Clone)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    pub fn init(
        store: &mut ParameterStore,
        prefix: &str,
        sizes: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs an input and an output width");
        let mut layers = Vec::new();
        for l in 0..sizes.len() - 1 {
            let w = store.add_matrix_xavier(&format!("{prefix}/w{l}"), sizes[l + 1], sizes[l], rng);
            let b = store.add_vector_zeros(&format!("{prefix}/b{l}"), sizes[l + 1]);
            layers.push((w, b));
        }
        Mlp { sizes: sizes.to_vec(), layers }
    }

    pub fn bind(store: &ParameterStore, prefix: &str, sizes: &[usize]) -> Option<Self> {
        let mut layers = Vec::new();
        for l in 0..sizes.len() - 1 {
            let w = store.by_name(&format!("{prefix}/w{l}"))?;
            let b = store.by_name(&format!("{prefix}/b{l}"))?;
            layers.push((w, b));
        }
        Some(Mlp { sizes: sizes.to_vec(), layers })
    }

    pub fn forward(&self, tape: &mut Tape, store: usize, x: Val) -> Result<Val, NnError> {
        let mut h = x;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            h = tape.matvec(store, w, h)?;
            h = tape.add_bias(store, b, h)?;
            if l + 1 < self.layers.len() {
                h = tape.tanh(h);
            }
        }
        Ok(h)
    }
}
