//! Scenario generator, losses and training.
//!
//! Everything numeric is generic over [`Element`] (`f32` or `f64`); the aliases below name
//! the concrete instantiations used by the service and the tests.

pub mod checkpoint;
pub mod error;
pub mod features;
pub mod generator;
pub mod graph;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::ModelError;
pub use generator::{Attribute, Generator, GeneratorConfig, GeneratorOutput};
pub use tensor::{Element, Tensor};

pub type Generator32 = Generator<f32>;
pub type Generator64 = Generator<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
