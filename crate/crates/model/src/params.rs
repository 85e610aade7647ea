//! Named trainable tensors and their gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
    /// Whether decoupled weight decay applies (weights yes, biases and norm gains no).
    pub decay: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, decay: bool) -> ParamId {
        let name = name.into();
        debug_assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.entries.push(ParamEntry { name, value, decay });
        ParamId(self.entries.len() - 1)
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ParamId {
        let bound = 1.0 / (rows.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        self.add(name, Tensor::from_vec(rows, cols, data), true)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// One gradient tensor per parameter, index-aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Element> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Self { tensors: store.entries().iter().map(|e| Tensor::zeros(e.value.rows, e.value.cols)).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            t.scale_assign(s);
        }
    }

    pub fn global_norm(&self) -> T {
        self.tensors.iter().map(Tensor::norm_sq).sum::<T>().sqrt()
    }

    /// Rescale so the global norm does not exceed `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: T) -> T {
        let norm = self.global_norm();
        if norm > max_norm && norm > T::zero() {
            self.scale(max_norm / norm);
        }
        norm
    }
}
