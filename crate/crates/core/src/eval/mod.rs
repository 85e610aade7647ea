//! Scene-realism and motion metrics.

mod assignment;
mod collision;
mod dataset;
mod mmd;
mod motion;

pub use assignment::{assignment_cost, hungarian};
pub use collision::{boxes_overlap, scenario_collision_rate, scene_collision_fraction, OrientedBox};
pub use dataset::{evaluate_dataset, evaluate_pairs, BandwidthPolicy, MetricReport, PairMetrics};
pub use mmd::{median_heuristic, mmd_squared};
pub use motion::{motion_errors, relative_trajectory, MotionErrors};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sample set `{0}` is empty")]
    EmptySet(&'static str),
    #[error("feature dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("scenario has no agents")]
    NoAgents,
    #[error("horizon mismatch: generated {generated} frames, reference {reference}")]
    Horizon { generated: usize, reference: usize },
    #[error("no scenarios to evaluate")]
    NoScenes,
    #[error("unpaired files: {0:?}")]
    Orphans(Vec<String>),
    #[error("{path}: {source}")]
    Document { path: String, source: crate::error::ScenarioError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
