//! Layers built on the autodiff graph.

use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Element, Tensor};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), fan_in, fan_out, rng);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, fan_out), false);
        Self { weight, bias, fan_in, fan_out }
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

/// Two linear layers with a ReLU between them.
#[derive(Debug, Clone, Copy)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        name: &str,
        fan_in: usize,
        width: usize,
        fan_out: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.0"), fan_in, width, rng),
            output: Linear::new(store, &format!("{name}.1"), width, fan_out, rng),
        }
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let h = self.hidden.forward(g, x);
        let h = g.relu(h);
        self.output.forward(g, h)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, width: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::filled(1, width, T::one()), false),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, width), false),
        }
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<'_, T>, x: Var) -> Var {
        let n = g.layer_norm(x, T::of(NORM_EPS));
        let (gain, bias) = (g.param(self.gain), g.param(self.bias));
        let y = g.mul_row(n, gain);
        g.add_row(y, bias)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, width: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(heads > 0 && width.is_multiple_of(heads), "width {width} not divisible by {heads} heads");
        Self {
            query: Linear::new(store, &format!("{name}.q"), width, width, rng),
            key: Linear::new(store, &format!("{name}.k"), width, width, rng),
            value: Linear::new(store, &format!("{name}.v"), width, width, rng),
            out: Linear::new(store, &format!("{name}.o"), width, width, rng),
            heads,
        }
    }

    /// Attend from `queries` (n×d) to `memory` (m×d); `memory_mask` hides memory rows.
    pub fn forward<T: Element>(&self, g: &mut Graph<'_, T>, queries: Var, memory: Var, memory_mask: Option<&[bool]>) -> Var {
        let q = self.query.forward(g, queries);
        let k = self.key.forward(g, memory);
        let v = self.value.forward(g, memory);
        let width = g.shape(q).1;
        let head_width = width / self.heads;
        let scale = T::one() / T::of(head_width as f64).sqrt();
        let mut outputs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * head_width, head_width);
            let kh = g.slice_cols(k, h * head_width, head_width);
            let vh = g.slice_cols(v, h * head_width, head_width);
            let scores = g.matmul_nt(qh, kh);
            let scores = g.scale(scores, scale);
            let weights = g.softmax_rows(scores, memory_mask);
            outputs.push(g.matmul(weights, vh));
        }
        let joined = if outputs.len() == 1 { outputs[0] } else { g.concat_cols(&outputs) };
        self.out.forward(g, joined)
    }
}
