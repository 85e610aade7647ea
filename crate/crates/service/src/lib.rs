//! Service layer for scenario generation: the [`pipeline::Pipeline`] composing interpreter,
//! retrieval and generator, a content-addressed [`store::ScenarioStore`], the frame
//! [`render`]er, the `/v1` [`api`] and the `scengen` [`cli`].

pub mod api;
pub mod assets;
pub mod cli;
pub mod config;
pub mod pipeline;
pub mod render;
pub mod store;
pub mod training;

pub use config::ServiceConfig;
pub use pipeline::{EditRequest, EditResponse, GenerateRequest, GenerateResponse, Interpretation, Pipeline, ServiceError};
