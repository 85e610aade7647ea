#![allow(dead_code)]

use scengen_core::code::{Action, AgentAbstract, MapAbstract, Orientation, StructuredScenario};
use scengen_core::scenario::{LaneSegment, LaneType, MapRegion};
use scengen_core::Point;
use scengen_model::features::LaneFeatureInput;
use scengen_model::generator::{Attribute, GeneratorConfig};
use scengen_model::loss::TrainingTargets;

pub fn agent(quadrant: u8, distance_bin: u32, orientation: Orientation, speed_bin: u32) -> AgentAbstract {
    AgentAbstract { quadrant, distance_bin, orientation, speed_bin, actions: [Action::Forward; 4] }
}

pub fn code(agents: Vec<AgentAbstract>) -> StructuredScenario {
    let map = MapAbstract { lanes_by_direction: [1, 1, 0, 0], intersection_distance_bin: 15, ego_lane_id: 1 };
    StructuredScenario::new(map, agents).unwrap()
}

/// A map of `n` parallel lanes along +x, one every 3.5 m, mixed types and lights.
pub fn parallel_map(n: usize) -> MapRegion {
    let lanes = (0..n)
        .map(|i| {
            let y = i as f64 * 3.5 - 5.0;
            let kind = [LaneType::Center, LaneType::Center, LaneType::Edge][i % 3];
            let mut l = LaneSegment::new(i as i64 + 10, Point::new(-10.0 + i as f64, y), Point::new(12.0, y + 0.5), kind);
            l.light = scengen_core::scenario::LightState::ALL[i % 4];
            l
        })
        .collect();
    MapRegion { region_id: "test-00000".into(), center: Point::new(0.0, 0.0), lanes }
}

pub fn miniature_code() -> StructuredScenario {
    code(vec![agent(1, 0, Orientation::North, 2), agent(2, 1, Orientation::East, 4)])
}

pub fn miniature_lanes(config: &GeneratorConfig) -> LaneFeatureInput {
    LaneFeatureInput::from_map(&parallel_map(config.max_lanes), config.coord_scale)
}

/// Hand-written targets for the miniature configuration (two agents, four lanes, five frames).
pub fn miniature_targets() -> TrainingTargets {
    let attributes = Attribute::ALL
        .iter()
        .map(|a| match a {
            Attribute::Heading => vec![vec![0.1], vec![-0.3]],
            Attribute::Speed => vec![vec![4.0], vec![1.5]],
            Attribute::Size => vec![vec![4.5, 1.9], vec![5.0, 2.1]],
            Attribute::Shift => vec![vec![0.5, -0.2], vec![-1.0, 0.3]],
        })
        .collect();
    let trajectories = vec![
        (1..5).map(|t| [0.4 * t as f64, 0.0, 0.0]).collect(),
        (1..5).map(|t| [0.15 * t as f64, 0.02 * t as f64, 0.01 * t as f64]).collect(),
    ];
    TrainingTargets { lanes: vec![2, 0], attributes, trajectories }
}
