//! The structured scenario code: one 6-integer map abstract plus one 8-integer vector per agent.
//!
//! Integer layout of an agent vector:
//!
//! | index | field          | values                                   |
//! |-------|----------------|------------------------------------------|
//! | 0     | quadrant       | 1 front-right, 2 front-left, 3 back-left, 4 back-right |
//! | 1     | distance bin   | `floor(d / width)`, clamped              |
//! | 2     | orientation    | 0 north, 1 south, 2 east, 3 west         |
//! | 3     | speed bin      | `floor(v / 2.5)`, clamped to 7           |
//! | 4..8  | actions        | see [`Action`]                           |
//!
//! Map vector: lanes north, south, east, west, intersection distance bin (5 m), ego lane id.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScenarioError};
use crate::scenario::MAX_AGENTS;

pub const MAP_CODE_LEN: usize = 6;
pub const AGENT_CODE_LEN: usize = 8;
pub const ACTION_WINDOWS: usize = 4;
pub const SPEED_BIN_WIDTH: f64 = 2.5;
pub const MAX_SPEED_BIN: u32 = 7;
pub const INTERSECTION_BIN_WIDTH: f64 = 5.0;
pub const MAX_INTERSECTION_BIN: u32 = 15;

/// Distance discretization for agent abstracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceBinning {
    pub width: f64,
    pub max_bin: u32,
}

impl DistanceBinning {
    /// 20 m bins used for generation; clamps at 140 m.
    pub const GENERATION: DistanceBinning = DistanceBinning { width: 20.0, max_bin: 7 };
    /// 5 m bins used for editing; covers the same 160 m range.
    pub const EDITING: DistanceBinning = DistanceBinning { width: 5.0, max_bin: 31 };

    pub fn bin(&self, distance: f64) -> u32 {
        bin_of(distance, self.width, self.max_bin)
    }

    /// Convert a bin index from `self` to `target`, mapping through the bin's lower edge.
    pub fn rebin(&self, bin: u32, target: &DistanceBinning) -> u32 {
        let lower = bin as f64 * self.width;
        // Lower edges are exact multiples; a tiny nudge keeps floor() on the right side.
        target.bin(lower + 1e-9 * target.width)
    }
}

pub(crate) fn bin_of(value: f64, width: f64, max_bin: u32) -> u32 {
    if !(value > 0.0) {
        return 0;
    }
    let b = (value / width).floor();
    if b >= max_bin as f64 {
        max_bin
    } else {
        b as u32
    }
}

pub fn speed_bin(speed: f64) -> u32 {
    bin_of(speed, SPEED_BIN_WIDTH, MAX_SPEED_BIN)
}

/// Compass sector relative to the ego heading (north = ego forward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [Orientation::North, Orientation::South, Orientation::East, Orientation::West];

    /// Sector of an ego-frame heading: north covers `[-pi/4, pi/4)`, west `[pi/4, 3pi/4)`,
    /// east `[-3pi/4, -pi/4)`, south the rest.
    pub fn from_heading(heading: f64) -> Self {
        use std::f64::consts::FRAC_PI_4;
        let h = crate::geometry::wrap_angle(heading);
        if (-FRAC_PI_4..FRAC_PI_4).contains(&h) {
            Orientation::North
        } else if (FRAC_PI_4..3.0 * FRAC_PI_4).contains(&h) {
            Orientation::West
        } else if (-3.0 * FRAC_PI_4..-FRAC_PI_4).contains(&h) {
            Orientation::East
        } else {
            Orientation::South
        }
    }

    /// Ego-frame heading at the center of this sector.
    pub fn heading(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            Orientation::North => 0.0,
            Orientation::West => FRAC_PI_2,
            Orientation::South => -PI,
            Orientation::East => -FRAC_PI_2,
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(c: u32) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

/// Per-second action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Stop = 0,
    TurnLeft = 1,
    LaneChangeLeft = 2,
    Decelerate = 3,
    Forward = 4,
    Accelerate = 5,
    LaneChangeRight = 6,
    TurnRight = 7,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::Stop,
        Action::TurnLeft,
        Action::LaneChangeLeft,
        Action::Decelerate,
        Action::Forward,
        Action::Accelerate,
        Action::LaneChangeRight,
        Action::TurnRight,
    ];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(c: u32) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Action::Stop => "stop",
            Action::TurnLeft => "turn left",
            Action::LaneChangeLeft => "left lane change",
            Action::Decelerate => "decelerate",
            Action::Forward => "keep speed",
            Action::Accelerate => "accelerate",
            Action::LaneChangeRight => "right lane change",
            Action::TurnRight => "turn right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapAbstract {
    /// Center-lane corridors heading north, south, east, west.
    pub lanes_by_direction: [u32; 4],
    pub intersection_distance_bin: u32,
    /// 1 for the rightmost lane.
    pub ego_lane_id: u32,
}

impl MapAbstract {
    pub fn to_vec(&self) -> [i64; MAP_CODE_LEN] {
        let l = self.lanes_by_direction;
        [
            l[0] as i64,
            l[1] as i64,
            l[2] as i64,
            l[3] as i64,
            self.intersection_distance_bin as i64,
            self.ego_lane_id as i64,
        ]
    }

    pub fn to_f64(&self) -> [f64; MAP_CODE_LEN] {
        self.to_vec().map(|v| v as f64)
    }

    /// Strict conversion: every value must already be in range.
    pub fn from_slice(v: &[i64]) -> Result<Self> {
        let (m, warnings) = Self::from_slice_clamped(v)?;
        match warnings.first() {
            Some(w) => Err(ScenarioError::field(format!("map[{}]", w.index), w.message.clone())),
            None => Ok(m),
        }
    }

    /// Lenient conversion clamping out-of-range values; arity is still enforced.
    pub fn from_slice_clamped(v: &[i64]) -> Result<(Self, Vec<ClampWarning>)> {
        if v.len() != MAP_CODE_LEN {
            return Err(ScenarioError::field(
                "map",
                format!("expected {MAP_CODE_LEN} integers, found {}", v.len()),
            ));
        }
        let mut w = Vec::new();
        let mut c = |i: usize, lo: i64, hi: i64| clamp_field(&mut w, "map", i, v[i], lo, hi);
        let lanes = [c(0, 0, i64::from(u32::MAX)), c(1, 0, i64::from(u32::MAX)), c(2, 0, i64::from(u32::MAX)), c(3, 0, i64::from(u32::MAX))];
        let inter = c(4, 0, MAX_INTERSECTION_BIN as i64);
        let ego = c(5, 1, i64::from(u32::MAX));
        Ok((Self { lanes_by_direction: lanes, intersection_distance_bin: inter, ego_lane_id: ego }, w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentAbstract {
    pub quadrant: u8,
    pub distance_bin: u32,
    pub orientation: Orientation,
    pub speed_bin: u32,
    pub actions: [Action; ACTION_WINDOWS],
}

impl AgentAbstract {
    pub fn to_vec(&self) -> [i64; AGENT_CODE_LEN] {
        let a = self.actions;
        [
            self.quadrant as i64,
            self.distance_bin as i64,
            self.orientation.code() as i64,
            self.speed_bin as i64,
            a[0].code() as i64,
            a[1].code() as i64,
            a[2].code() as i64,
            a[3].code() as i64,
        ]
    }

    pub fn to_f64(&self) -> [f64; AGENT_CODE_LEN] {
        self.to_vec().map(|v| v as f64)
    }

    pub fn from_slice(v: &[i64], binning: &DistanceBinning) -> Result<Self> {
        let (a, warnings) = Self::from_slice_clamped(v, binning)?;
        match warnings.first() {
            Some(w) => Err(ScenarioError::field(format!("agent[{}]", w.index), w.message.clone())),
            None => Ok(a),
        }
    }

    pub fn from_slice_clamped(v: &[i64], binning: &DistanceBinning) -> Result<(Self, Vec<ClampWarning>)> {
        if v.len() != AGENT_CODE_LEN {
            return Err(ScenarioError::field(
                "agent",
                format!("expected {AGENT_CODE_LEN} integers, found {}", v.len()),
            ));
        }
        let mut w = Vec::new();
        let mut c = |i: usize, lo: i64, hi: i64| clamp_field(&mut w, "agent", i, v[i], lo, hi);
        let quadrant = c(0, 1, 4) as u8;
        let distance_bin = c(1, 0, binning.max_bin as i64);
        let orientation = Orientation::from_code(c(2, 0, 3)).expect("clamped");
        let speed_bin = c(3, 0, MAX_SPEED_BIN as i64);
        let mut actions = [Action::Forward; ACTION_WINDOWS];
        for (k, slot) in actions.iter_mut().enumerate() {
            *slot = Action::from_code(c(4 + k, 0, 7)).expect("clamped");
        }
        Ok((Self { quadrant, distance_bin, orientation, speed_bin, actions }, w))
    }

    pub fn rebinned(&self, from: &DistanceBinning, to: &DistanceBinning) -> Self {
        Self { distance_bin: from.rebin(self.distance_bin, to), ..*self }
    }
}

/// A value that had to be clamped into its valid range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampWarning {
    pub index: usize,
    pub message: String,
}

impl fmt::Display for ClampWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn clamp_field(w: &mut Vec<ClampWarning>, what: &str, i: usize, v: i64, lo: i64, hi: i64) -> u32 {
    let c = v.clamp(lo, hi);
    if c != v {
        w.push(ClampWarning { index: i, message: format!("{what}[{i}] = {v} clamped to {c}") });
    }
    c as u32
}

/// Complete structured code `[map, agent_1 .. agent_N]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructuredScenario {
    pub map_abstract: MapAbstract,
    pub agents: Vec<AgentAbstract>,
}

impl StructuredScenario {
    pub fn new(map_abstract: MapAbstract, agents: Vec<AgentAbstract>) -> Result<Self> {
        let s = Self { map_abstract, agents };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() || self.agents.len() > MAX_AGENTS {
            return Err(ScenarioError::field(
                "agents",
                format!("agent count {} outside 1..={MAX_AGENTS}", self.agents.len()),
            ));
        }
        Ok(())
    }

    pub fn rebinned(&self, from: &DistanceBinning, to: &DistanceBinning) -> Self {
        Self {
            map_abstract: self.map_abstract,
            agents: self.agents.iter().map(|a| a.rebinned(from, to)).collect(),
        }
    }
}
