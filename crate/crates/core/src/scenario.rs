//! Scenario and map domain types.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScenarioError};
use crate::geometry::{Pose2, RigidTransform};
use crate::Point;

/// Maximum lane segments per map region.
pub const MAX_LANES: usize = 384;
/// Maximum agents per scenario.
pub const MAX_AGENTS: usize = 32;
/// Frames per scenario.
pub const HORIZON: usize = 50;
pub const FPS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneType {
    Center,
    Edge,
    Boundary,
}

impl LaneType {
    pub const ALL: [LaneType; 3] = [LaneType::Center, LaneType::Edge, LaneType::Boundary];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightState {
    None,
    Red,
    Yellow,
    Green,
}

impl LightState {
    pub const ALL: [LightState; 4] =
        [LightState::None, LightState::Red, LightState::Yellow, LightState::Green];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneSegment {
    pub id: i64,
    pub start: Point,
    pub end: Point,
    pub lane_type: LaneType,
    pub light: LightState,
}

impl LaneSegment {
    pub fn new(id: i64, start: Point, end: Point, lane_type: LaneType) -> Self {
        Self { id, start, end, lane_type, light: LightState::None }
    }

    pub fn midpoint(&self) -> Point {
        self.start.lerp(self.end, 0.5)
    }

    pub fn direction(&self) -> Point {
        self.end - self.start
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }

    pub fn heading(&self) -> f64 {
        self.direction().angle()
    }

    pub fn is_center(&self) -> bool {
        self.lane_type == LaneType::Center
    }

    fn transformed(&self, f: impl Fn(Point) -> Point) -> Self {
        Self { start: f(self.start), end: f(self.end), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRegion {
    pub region_id: String,
    pub center: Point,
    pub lanes: Vec<LaneSegment>,
}

impl MapRegion {
    pub fn validate(&self) -> Result<()> {
        if self.lanes.len() > MAX_LANES {
            return Err(ScenarioError::field(
                "map.lanes",
                format!("{} lanes exceeds the maximum of {MAX_LANES}", self.lanes.len()),
            ));
        }
        self.validate_geometry()
    }

    /// Region checks without the lane cap; whole source maps are far larger than any region.
    pub fn validate_geometry(&self) -> Result<()> {
        if self.lanes.is_empty() {
            return Err(ScenarioError::field("map.lanes", "at least one lane is required"));
        }
        if !self.center.is_finite() {
            return Err(ScenarioError::field("map.center", "non-finite coordinate"));
        }
        let mut seen = HashSet::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            if !seen.insert(lane.id) {
                return Err(ScenarioError::field(
                    format!("map.lanes[{i}].id"),
                    format!("duplicate lane id {}", lane.id),
                ));
            }
            if !lane.start.is_finite() || !lane.end.is_finite() {
                return Err(ScenarioError::field(format!("map.lanes[{i}]"), "non-finite coordinate"));
            }
            if lane.start == lane.end {
                return Err(ScenarioError::field(
                    format!("map.lanes[{i}]"),
                    "start and end points coincide",
                ));
            }
        }
        Ok(())
    }

    pub fn lane(&self, id: i64) -> Option<&LaneSegment> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn transformed(&self, f: impl Fn(Point) -> Point) -> Self {
        Self {
            region_id: self.region_id.clone(),
            center: f(self.center),
            lanes: self.lanes.iter().map(|l| l.transformed(&f)).collect(),
        }
    }
}

/// Kinematic state of one vehicle at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Point,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
    /// Meters per second, non-negative.
    pub speed: f64,
}

impl AgentState {
    pub fn new(position: Point, heading: f64, speed: f64) -> Self {
        Self { position, heading, speed }
    }

    pub fn pose(&self) -> Pose2<f64> {
        Pose2::new(self.position, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: i64,
    pub length: f64,
    pub width: f64,
    pub states: Vec<AgentState>,
}

impl Agent {
    pub fn initial(&self) -> &AgentState {
        &self.states[0]
    }
}

/// One traffic scenario: a map region plus per-agent state sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map: MapRegion,
    pub agents: Vec<Agent>,
    pub ego_index: usize,
}

impl Scenario {
    pub fn new(map: MapRegion, agents: Vec<Agent>, ego_index: usize) -> Result<Self> {
        let s = Self { map, agents, ego_index };
        s.validate()?;
        Ok(s)
    }

    pub fn horizon(&self) -> usize {
        self.agents.first().map_or(0, |a| a.states.len())
    }

    pub fn ego(&self) -> &Agent {
        &self.agents[self.ego_index]
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if self.agents.is_empty() {
            return Err(ScenarioError::field("agents", "at least one agent is required"));
        }
        if self.agents.len() > MAX_AGENTS {
            return Err(ScenarioError::field(
                "agents",
                format!("{} agents exceeds the maximum of {MAX_AGENTS}", self.agents.len()),
            ));
        }
        if self.ego_index >= self.agents.len() {
            return Err(ScenarioError::field(
                "ego_index",
                format!("{} out of range for {} agents", self.ego_index, self.agents.len()),
            ));
        }
        let horizon = self.agents[0].states.len();
        for (i, agent) in self.agents.iter().enumerate() {
            if !(agent.length.is_finite() && agent.length > 0.0) {
                return Err(ScenarioError::field(format!("agents[{i}].length"), "must be > 0"));
            }
            if !(agent.width.is_finite() && agent.width > 0.0) {
                return Err(ScenarioError::field(format!("agents[{i}].width"), "must be > 0"));
            }
            if agent.states.is_empty() {
                return Err(ScenarioError::field(format!("agents[{i}].states"), "empty state sequence"));
            }
            if agent.states.len() != horizon {
                return Err(ScenarioError::field(
                    format!("agents[{i}].states"),
                    format!("length {} differs from {horizon}", agent.states.len()),
                ));
            }
            for (t, s) in agent.states.iter().enumerate() {
                let at = |f: &str| format!("agents[{i}].states[{t}].{f}");
                if !s.position.is_finite() {
                    return Err(ScenarioError::field(at("x"), "non-finite position"));
                }
                if !(s.speed.is_finite() && s.speed >= 0.0) {
                    return Err(ScenarioError::field(at("speed"), "must be finite and >= 0"));
                }
                if !(s.heading.is_finite()
                    && s.heading >= -std::f64::consts::PI
                    && s.heading < std::f64::consts::PI)
                {
                    return Err(ScenarioError::field(at("heading"), "must lie in [-pi, pi)"));
                }
            }
        }
        Ok(())
    }

    /// Apply a rigid transform to every agent state, lane endpoint and the map center.
    pub fn transformed(&self, tf: &RigidTransform<f64>) -> Scenario {
        Scenario {
            map: self.map.transformed(|p| tf.apply(p)),
            agents: self
                .agents
                .iter()
                .map(|a| Agent {
                    states: a
                        .states
                        .iter()
                        .map(|s| AgentState::new(tf.apply(s.position), tf.apply_heading(s.heading), s.speed))
                        .collect(),
                    ..a.clone()
                })
                .collect(),
            ego_index: self.ego_index,
        }
    }

    /// Re-express the scene so the ego sits at the origin with heading 0 at the first frame.
    pub fn to_ego_frame(&self) -> Result<Scenario> {
        if self.agents.is_empty() {
            return Err(ScenarioError::Invalid("scenario has no agents".into()));
        }
        let ego = self
            .agents
            .get(self.ego_index)
            .and_then(|a| a.states.first())
            .ok_or_else(|| ScenarioError::Invalid("ego agent has no initial state".into()))?;
        let pose = ego.pose();
        let localize = |p: Point| pose.to_local(p);
        let agents = self
            .agents
            .iter()
            .map(|a| Agent {
                states: a
                    .states
                    .iter()
                    .map(|s| AgentState::new(localize(s.position), pose.heading_to_local(s.heading), s.speed))
                    .collect(),
                ..a.clone()
            })
            .collect();
        Ok(Scenario { map: self.map.transformed(localize), agents, ego_index: self.ego_index })
    }

    /// Reorder agents so the ego comes first; other agents keep their relative order.
    pub fn ego_first(&self) -> Scenario {
        let mut agents = Vec::with_capacity(self.agents.len());
        agents.push(self.agents[self.ego_index].clone());
        agents.extend(
            self.agents.iter().enumerate().filter(|(i, _)| *i != self.ego_index).map(|(_, a)| a.clone()),
        );
        Scenario { map: self.map.clone(), agents, ego_index: 0 }
    }

    /// Ego frame with the ego listed first: the layout the encoder and trainer work in.
    pub fn canonical(&self) -> Result<Scenario> {
        Ok(self.to_ego_frame()?.ego_first())
    }
}

/// Index of the agent closest to `center` at the first frame.
pub fn closest_to_center(agents: &[Agent], center: Point) -> Option<usize> {
    agents
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.initial().position.distance(center).total_cmp(&b.initial().position.distance(center))
        })
        .map(|(i, _)| i)
}
