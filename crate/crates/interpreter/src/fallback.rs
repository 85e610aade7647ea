//! Deterministic offline interpreter for attribute-style descriptions.
//!
//! | clause                                               | effect                                   |
//! |------------------------------------------------------|------------------------------------------|
//! | the scenario is nearly empty / sparse / with medium density / very dense | 2 / 6 / 12 / 24 agents (ego included) |
//! | there are only vehicles on the left / right / front / back side of the center car | others use quadrants {2,3} / {1,4} / {1,2} / {3,4} |
//! | there are vehicles on different sides of the center car | others cycle through all quadrants |
//! | most cars are moving in slow / medium / fast speed   | speed bin 0 / 2 / 4                      |
//! | most cars are stopping                               | speed bin 0, every action stop           |
//! | the center car stops / moves straight / turns left / turns right | ego actions (see [`EgoMotion`]) |
//!
//! Defaults: 12 agents, quadrants round-robin over 1..=4, distance bins cycling 0..=3 once
//! every quadrant of a ring is used, orientation north, speed bin 2, actions keep-speed, map
//! `[2, 2, 0, 0, 15, 1]` (a four-lane road with no intersection in range). A turning ego gets
//! `[2, 2, 2, 2, 2, 1]`, an intersection 10-15 m ahead.

use thiserror::Error;

use scengen_core::code::{Action, AgentAbstract, MapAbstract, Orientation, StructuredScenario};

pub const DEFAULT_AGENTS: usize = 12;
pub const DEFAULT_SPEED_BIN: u32 = 2;
const STRAIGHT_ROAD: [u32; 6] = [2, 2, 0, 0, 15, 1];
const INTERSECTION: [u32; 6] = [2, 2, 2, 2, 2, 1];

pub const SUPPORTED_CLAUSES: &[&str] = &[
    "the scenario is {nearly empty|sparse|with medium density|very dense}",
    "there are only vehicles on the {left|right|front|back} side(s) of the center car",
    "there are vehicles on different sides of the center car",
    "most cars are moving in {slow|medium|fast} speed",
    "most cars are stopping",
    "the center car {stops|moves straight|turns left|turns right}",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no recognizable clause in {text:?}; supported clauses: {}", SUPPORTED_CLAUSES.join("; "))]
pub struct GrammarError {
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoMotion {
    /// Decelerate for two seconds, then stop.
    Stops,
    MovesStraight,
    /// Turn left for three seconds, then keep speed.
    TurnsLeft,
    TurnsRight,
}

impl EgoMotion {
    fn actions(self) -> [Action; 4] {
        use Action::*;
        match self {
            EgoMotion::Stops => [Decelerate, Decelerate, Stop, Stop],
            EgoMotion::MovesStraight => [Forward; 4],
            EgoMotion::TurnsLeft => [TurnLeft, TurnLeft, TurnLeft, Forward],
            EgoMotion::TurnsRight => [TurnRight, TurnRight, TurnRight, Forward],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Speed {
    Bin(u32),
    Stopping,
}

/// Clauses recognized in one description.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Attributes {
    pub agents: Option<usize>,
    pub quadrants: Option<Vec<u8>>,
    speed: Option<Speed>,
    pub ego: Option<EgoMotion>,
}

fn first_match<T: Copy>(text: &str, table: &[(&str, T)]) -> Option<T> {
    table.iter().filter_map(|(k, v)| text.find(k).map(|at| (at, *v))).min_by_key(|(at, _)| *at).map(|(_, v)| v)
}

pub fn parse_attributes(text: &str) -> Attributes {
    let t: String = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    let agents = first_match(
        &t,
        &[
            ("scenario is nearly empty", 2),
            ("scenario is sparse", 6),
            ("scenario is with medium density", 12),
            ("scenario is medium dense", 12),
            ("scenario is very dense", 24),
        ],
    );
    let quadrants = if t.contains("vehicles on different sides") {
        Some(vec![1, 2, 3, 4])
    } else {
        first_match(
            &t,
            &[
                ("only vehicles on the left side", [2u8, 3]),
                ("only vehicles on the right side", [1, 4]),
                ("only vehicles on the front side", [1, 2]),
                ("only vehicles on the back side", [3, 4]),
            ],
        )
        .map(|q| q.to_vec())
    };
    let speed = first_match(
        &t,
        &[
            ("moving in slow speed", Speed::Bin(0)),
            ("moving in medium speed", Speed::Bin(2)),
            ("moving in fast speed", Speed::Bin(4)),
            ("cars are stopping", Speed::Stopping),
        ],
    );
    let ego = first_match(
        &t,
        &[
            ("center car stops", EgoMotion::Stops),
            ("center car moves straight", EgoMotion::MovesStraight),
            ("center car turns left", EgoMotion::TurnsLeft),
            ("center car turns right", EgoMotion::TurnsRight),
        ],
    );
    Attributes { agents, quadrants, speed, ego }
}

impl Attributes {
    pub fn is_empty(&self) -> bool {
        *self == Attributes::default()
    }
}

/// Pure mapping from an attribute description to a code in 20 m distance bins.
pub fn fallback_interpret(text: &str) -> Result<StructuredScenario, GrammarError> {
    let attrs = parse_attributes(text);
    if attrs.is_empty() {
        return Err(GrammarError { text: text.to_string() });
    }
    let n = attrs.agents.unwrap_or(DEFAULT_AGENTS);
    let quadrants = attrs.quadrants.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
    let (speed_bin, others_actions) = match attrs.speed {
        Some(Speed::Bin(b)) => (b, [Action::Forward; 4]),
        Some(Speed::Stopping) => (0, [Action::Stop; 4]),
        None => (DEFAULT_SPEED_BIN, [Action::Forward; 4]),
    };
    let ego_actions = attrs.ego.map_or(others_actions, EgoMotion::actions);
    let ego = AgentAbstract { quadrant: 1, distance_bin: 0, orientation: Orientation::North, speed_bin, actions: ego_actions };
    let mut agents = vec![ego];
    for k in 0..n - 1 {
        agents.push(AgentAbstract {
            quadrant: quadrants[k % quadrants.len()],
            distance_bin: ((k / quadrants.len()) % 4) as u32,
            orientation: Orientation::North,
            speed_bin,
            actions: others_actions,
        });
    }
    let turning = matches!(attrs.ego, Some(EgoMotion::TurnsLeft | EgoMotion::TurnsRight));
    let m = if turning { INTERSECTION } else { STRAIGHT_ROAD };
    let map = MapAbstract { lanes_by_direction: [m[0], m[1], m[2], m[3]], intersection_distance_bin: m[4], ego_lane_id: m[5] };
    Ok(StructuredScenario::new(map, agents).expect("fallback codes are valid"))
}
