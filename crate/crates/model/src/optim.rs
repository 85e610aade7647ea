//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::params::{Gradients, ParamStore};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    steps: u64,
}

impl<T: Element> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &ParamStore<T>) -> Self {
        let zeros = || params.entries().iter().map(|e| Tensor::zeros(e.value.rows, e.value.cols)).collect();
        Self { config, first: zeros(), second: zeros(), steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>) {
        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let correct1 = T::one() / (T::one() - b1.powi(t));
        let correct2 = T::one() / (T::one() - b2.powi(t));
        let (lr, eps, wd) = (T::of(c.learning_rate), T::of(c.eps), T::of(c.weight_decay));
        for (i, entry) in params.entries_mut().iter_mut().enumerate() {
            let g = &grads.tensors[i].data;
            let (m, v) = (&mut self.first[i].data, &mut self.second[i].data);
            let decay = if entry.decay { wd } else { T::zero() };
            for (j, p) in entry.value.data.iter_mut().enumerate() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let update = (m[j] * correct1) / ((v[j] * correct2).sqrt() + eps);
                *p -= lr * (update + decay * *p);
            }
        }
    }
}
