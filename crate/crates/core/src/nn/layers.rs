//! Reusable layers: linear, layer norm, multi-head attention, transformer
//! blocks, sinusoidal position encoding, and a same-padded 1-D convolution
//! over token sequences.

use super::matrix::Matrix;
use super::params::{ParamId, ParamSet};
use super::tape::{NodeId, Tape};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn build(params: &mut ParamSet, name: &str, d_in: usize, d_out: usize, seed: u64) -> Self {
        Self {
            w: params.add_init(&format!("{name}.w"), d_in, d_out, seed),
            b: params.add_zeros(&format!("{name}.b"), 1, d_out),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId) -> NodeId {
        let w = t.param(self.w);
        let b = t.param(self.b);
        let y = t.matmul_nn(x, w);
        t.add_row_broadcast(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn build(params: &mut ParamSet, name: &str, dim: usize) -> Self {
        Self {
            gain: params.add(format!("{name}.g"), Matrix::from_fn(1, dim, |_, _| 1.0)),
            bias: params.add_zeros(&format!("{name}.b"), 1, dim),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId) -> NodeId {
        let g = t.param(self.gain);
        let b = t.param(self.bias);
        t.layer_norm(x, g, b, LN_EPS)
    }
}

/// Multi-head attention. Queries come from `q_input`; keys and values from
/// `kv_input` (equal to `q_input` for self-attention).
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl MultiHeadAttention {
    pub fn build(params: &mut ParamSet, name: &str, dim: usize, heads: usize, seed: u64) -> Self {
        assert!(dim % heads == 0, "attention dim must divide heads");
        Self {
            wq: Linear::build(params, &format!("{name}.q"), dim, dim, seed),
            wk: Linear::build(params, &format!("{name}.k"), dim, dim, seed),
            wv: Linear::build(params, &format!("{name}.v"), dim, dim, seed),
            wo: Linear::build(params, &format!("{name}.o"), dim, dim, seed),
            heads,
            dim,
        }
    }

    pub fn forward(&self, t: &mut Tape, q_input: NodeId, kv_input: NodeId, causal: bool) -> NodeId {
        let dh = self.dim / self.heads;
        let q = self.wq.forward(t, q_input);
        let k = self.wk.forward(t, kv_input);
        let v = self.wv.forward(t, kv_input);
        let q_rows = t.value(q).rows();
        let k_rows = t.value(k).rows();
        let mask = if causal {
            assert_eq!(q_rows, k_rows, "causal attention needs square scores");
            Some(t.constant(Matrix::from_fn(q_rows, k_rows, |r, c| {
                if c > r {
                    -1e9
                } else {
                    0.0
                }
            })))
        } else {
            None
        };
        let mut head_outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = t.slice_cols(q, h * dh, dh);
            let kh = t.slice_cols(k, h * dh, dh);
            let vh = t.slice_cols(v, h * dh, dh);
            let s = t.matmul_nt(qh, kh);
            let s = t.scale(s, 1.0 / (dh as f64).sqrt());
            let s = match mask {
                Some(m) => t.add(s, m),
                None => s,
            };
            let a = t.softmax_rows(s);
            head_outs.push(t.matmul_nn(a, vh));
        }
        let cat = t.concat_cols(&head_outs);
        self.wo.forward(t, cat)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn build(params: &mut ParamSet, name: &str, dim: usize, hidden: usize, seed: u64) -> Self {
        Self {
            fc1: Linear::build(params, &format!("{name}.fc1"), dim, hidden, seed),
            fc2: Linear::build(params, &format!("{name}.fc2"), hidden, dim, seed),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId) -> NodeId {
        let h = self.fc1.forward(t, x);
        let h = t.gelu(h);
        self.fc2.forward(t, h)
    }
}

/// Pre-norm transformer block: self-attention, optional cross-attention,
/// then an MLP, each with a residual connection.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub cross: Option<(LayerNorm, MultiHeadAttention)>,
    pub ln2: LayerNorm,
    pub mlp: Mlp,
    pub causal: bool,
}

impl TransformerBlock {
    pub fn build(
        params: &mut ParamSet,
        name: &str,
        dim: usize,
        heads: usize,
        causal: bool,
        with_cross: bool,
        seed: u64,
    ) -> Self {
        Self {
            ln1: LayerNorm::build(params, &format!("{name}.ln1"), dim),
            attn: MultiHeadAttention::build(params, &format!("{name}.attn"), dim, heads, seed),
            cross: if with_cross {
                Some((
                    LayerNorm::build(params, &format!("{name}.lnc"), dim),
                    MultiHeadAttention::build(params, &format!("{name}.xattn"), dim, heads, seed),
                ))
            } else {
                None
            },
            ln2: LayerNorm::build(params, &format!("{name}.ln2"), dim),
            mlp: Mlp::build(params, &format!("{name}.mlp"), dim, dim * 4, seed),
            causal,
        }
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId, cross_kv: Option<NodeId>) -> NodeId {
        let h = self.ln1.forward(t, x);
        let a = self.attn.forward(t, h, h, self.causal);
        let mut x = t.add(x, a);
        if let Some((lnc, xattn)) = &self.cross {
            let kv = cross_kv.expect("block built with cross-attention needs kv input");
            let h = lnc.forward(t, x);
            let a = xattn.forward(t, h, kv, false);
            x = t.add(x, a);
        }
        let h = self.ln2.forward(t, x);
        let m = self.mlp.forward(t, h);
        t.add(x, m)
    }
}

/// Fixed sinusoidal position encoding, one row per position.
pub fn sinusoidal_pe(len: usize, dim: usize) -> Matrix {
    Matrix::from_fn(len, dim, |pos, i| {
        let pair = (i / 2) as f64;
        let rate = 1.0 / 10_000f64.powf(2.0 * pair / dim as f64);
        let angle = pos as f64 * rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Same-padded 1-D convolution along the row (token) axis: one weight matrix
/// per kernel offset applied to the shifted sequence.
#[derive(Debug, Clone)]
pub struct Conv1dSame {
    pub taps: Vec<ParamId>,
    pub bias: ParamId,
    pub kernel: usize,
}

impl Conv1dSame {
    pub fn build(
        params: &mut ParamSet,
        name: &str,
        d_in: usize,
        d_out: usize,
        kernel: usize,
        seed: u64,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd for same padding");
        let taps = (0..kernel)
            .map(|k| params.add_init(&format!("{name}.k{k}"), d_in, d_out, seed))
            .collect();
        Self { taps, bias: params.add_zeros(&format!("{name}.b"), 1, d_out), kernel }
    }

    pub fn forward(&self, t: &mut Tape, x: NodeId) -> NodeId {
        let half = (self.kernel / 2) as i64;
        let mut acc: Option<NodeId> = None;
        for (k, &w) in self.taps.iter().enumerate() {
            let offset = k as i64 - half;
            let shifted = if offset == 0 { x } else { t.shift_rows(x, offset) };
            let wn = t.param(w);
            let term = t.matmul_nn(shifted, wn);
            acc = Some(match acc {
                Some(a) => t.add(a, term),
                None => term,
            });
        }
        let b = t.param(self.bias);
        t.add_row_broadcast(acc.unwrap(), b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;
    use crate::util::seeded_rng;

    #[test]
    fn block_with_cross_attention_gradients() {
        let mut params = ParamSet::new();
        let block = TransformerBlock::build(&mut params, "blk", 8, 2, false, true, 21);
        let conv = Conv1dSame::build(&mut params, "conv", 8, 8, 3, 21);
        let mut rng = seeded_rng(9, "layers-test");
        let x = Matrix::randn(4, 8, 1.0, &mut rng);
        let kv = Matrix::randn(5, 8, 1.0, &mut rng);
        let target = Matrix::randn(4, 8, 1.0, &mut rng);
        let mask = vec![true; 4];

        let ids: Vec<_> = params.ids().collect();
        let f = |ps: &ParamSet| {
            let mut t = Tape::new(ps);
            let xn = t.constant(x.clone());
            let kvn = t.constant(kv.clone());
            let h = block.forward(&mut t, xn, Some(kvn));
            let y = conv.forward(&mut t, h);
            let loss = t.mse_rows(y, &target, &mask);
            (t.value(loss).scalar(), t.backward(loss))
        };
        let worst = check_gradients(&mut params, &ids, 0.15, f, 41);
        assert!(worst < 1e-5, "worst rel err {worst}");
    }

    #[test]
    fn sinusoidal_pe_shape_and_range() {
        let pe = sinusoidal_pe(16, 8);
        assert_eq!((pe.rows(), pe.cols()), (16, 8));
        assert!(pe.data().iter().all(|v| v.abs() <= 1.0));
        // position 0: sin terms are 0, cos terms are 1
        assert_eq!(pe.get(0, 0), 0.0);
        assert_eq!(pe.get(0, 1), 1.0);
    }
}
