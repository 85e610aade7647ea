//! Rule-based encoder: scenario -> structured code.

use std::f64::consts::PI;

use crate::code::{
    bin_of, speed_bin, Action, AgentAbstract, DistanceBinning, MapAbstract, Orientation, StructuredScenario,
    ACTION_WINDOWS, INTERSECTION_BIN_WIDTH, MAX_INTERSECTION_BIN,
};
use crate::error::{Result, ScenarioError};
use crate::geometry::{point_segment_distance, segment_intersection, wrap_angle, Vec2};
use crate::scenario::{AgentState, LaneSegment, MapRegion, Scenario, FPS, HORIZON};
use crate::Point;

/// Action classification thresholds.
pub const STOP_SPEED: f64 = 0.5;
pub const TURN_ANGLE: f64 = PI / 12.0;
pub const LANE_CHANGE_OFFSET: f64 = 1.5;
pub const SPEED_CHANGE: f64 = 1.0;

/// Lateral gap (m) separating two parallel corridors.
pub const CORRIDOR_GAP: f64 = 1.5;
/// Minimum heading difference for two center lanes to count as crossing.
pub const CROSSING_ANGLE: f64 = PI / 6.0;

/// Quadrant of an ego-frame position. Axis ties go to the lower index.
pub fn quadrant_of(p: Point) -> u8 {
    if p.x >= 0.0 {
        if p.y <= 0.0 {
            1
        } else {
            2
        }
    } else if p.y >= 0.0 {
        3
    } else {
        4
    }
}

pub fn encode_agent(states: &[AgentState], binning: &DistanceBinning) -> Result<AgentAbstract> {
    if states.len() != HORIZON {
        return Err(ScenarioError::Length { expected: HORIZON, found: states.len() });
    }
    let s0 = &states[0];
    Ok(AgentAbstract {
        quadrant: quadrant_of(s0.position),
        distance_bin: binning.bin(s0.position.norm()),
        orientation: Orientation::from_heading(s0.heading),
        speed_bin: speed_bin(s0.speed),
        actions: classify_actions(states),
    })
}

/// One label per one-second window over the first four seconds.
pub fn classify_actions(states: &[AgentState]) -> [Action; ACTION_WINDOWS] {
    let per = FPS as usize;
    let last = states.len().saturating_sub(1);
    let mut out = [Action::Forward; ACTION_WINDOWS];
    for (w, slot) in out.iter_mut().enumerate() {
        let start = (w * per).min(last);
        let end = ((w + 1) * per).min(last);
        let frames = &states[start..(end.max(start + 1)).min(states.len())];
        let mean_speed = frames.iter().map(|s| s.speed).sum::<f64>() / frames.len() as f64;
        let (a, b) = (&states[start], &states[end]);
        let dh = wrap_angle(b.heading - a.heading);
        let lateral = Vec2::from_angle(a.heading).cross(b.position - a.position);
        let dv = b.speed - a.speed;
        *slot = if mean_speed < STOP_SPEED {
            Action::Stop
        } else if dh > TURN_ANGLE {
            Action::TurnLeft
        } else if dh < -TURN_ANGLE {
            Action::TurnRight
        } else if lateral > LANE_CHANGE_OFFSET {
            Action::LaneChangeLeft
        } else if lateral < -LANE_CHANGE_OFFSET {
            Action::LaneChangeRight
        } else if dv > SPEED_CHANGE {
            Action::Accelerate
        } else if dv < -SPEED_CHANGE {
            Action::Decelerate
        } else {
            Action::Forward
        };
    }
    out
}

#[derive(Debug, Clone)]
struct Corridor {
    sector: Orientation,
    /// Mean left-positive offset of member midpoints from the sector axis.
    lateral: f64,
    members: Vec<i64>,
}

fn corridors(map: &MapRegion) -> Vec<Corridor> {
    let mut out = Vec::new();
    for sector in Orientation::ALL {
        let axis = Vec2::from_angle(sector.heading());
        let mut lanes: Vec<(f64, i64)> = map
            .lanes
            .iter()
            .filter(|l| l.is_center() && Orientation::from_heading(l.heading()) == sector)
            .map(|l| (axis.cross(l.midpoint()), l.id))
            .collect();
        lanes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut current: Option<(Vec<f64>, Vec<i64>)> = None;
        for (lat, id) in lanes {
            match current.as_mut() {
                Some((lats, ids)) if lat - lats.last().copied().unwrap() <= CORRIDOR_GAP => {
                    lats.push(lat);
                    ids.push(id);
                }
                _ => {
                    if let Some((lats, ids)) = current.take() {
                        out.push(corridor(sector, lats, ids));
                    }
                    current = Some((vec![lat], vec![id]));
                }
            }
        }
        if let Some((lats, ids)) = current {
            out.push(corridor(sector, lats, ids));
        }
    }
    out
}

fn corridor(sector: Orientation, lats: Vec<f64>, members: Vec<i64>) -> Corridor {
    let lateral = lats.iter().sum::<f64>() / lats.len() as f64;
    Corridor { sector, lateral, members }
}

/// Distance from the region center to the closest crossing of two center lanes.
pub fn nearest_crossing_distance(map: &MapRegion) -> Option<f64> {
    let centers: Vec<&LaneSegment> = map.lanes.iter().filter(|l| l.is_center()).collect();
    let joined = |a: &LaneSegment, b: &LaneSegment| {
        a.end.distance(b.start) < 1e-6 || b.end.distance(a.start) < 1e-6
    };
    let mut best: Option<f64> = None;
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            if wrap_angle(a.heading() - b.heading()).abs() <= CROSSING_ANGLE || joined(a, b) {
                continue;
            }
            if let Some(p) = segment_intersection(a.start, a.end, b.start, b.end) {
                let d = p.distance(map.center);
                best = Some(best.map_or(d, |x: f64| x.min(d)));
            }
        }
    }
    best
}

/// Abstract an ego-frame map, given the lane the ego drives on.
pub fn abstract_map(map: &MapRegion, ego_lane_id: i64) -> Result<MapAbstract> {
    let ego_lane = map
        .lane(ego_lane_id)
        .filter(|l| l.is_center())
        .ok_or_else(|| ScenarioError::NotFound { what: "ego center lane", id: ego_lane_id.to_string() })?;
    let corridors = corridors(map);
    let mut lanes_by_direction = [0u32; 4];
    for c in &corridors {
        lanes_by_direction[c.sector.code() as usize] += 1;
    }
    let ego_corridor = corridors
        .iter()
        .find(|c| c.members.contains(&ego_lane.id))
        .expect("every center lane belongs to a corridor");
    let to_right = corridors
        .iter()
        .filter(|c| c.sector == ego_corridor.sector && c.lateral < ego_corridor.lateral)
        .count() as u32;
    let intersection_distance_bin = nearest_crossing_distance(map)
        .map_or(MAX_INTERSECTION_BIN, |d| bin_of(d, INTERSECTION_BIN_WIDTH, MAX_INTERSECTION_BIN));
    Ok(MapAbstract { lanes_by_direction, intersection_distance_bin, ego_lane_id: 1 + to_right })
}

/// Center lane an agent at `position` facing `heading` most plausibly occupies.
pub fn lane_under(map: &MapRegion, position: Point, heading: f64) -> Option<&LaneSegment> {
    let score = |l: &&LaneSegment| point_segment_distance(position, l.start, l.end);
    let aligned = map
        .lanes
        .iter()
        .filter(|l| l.is_center() && wrap_angle(l.heading() - heading).abs() < PI / 4.0)
        .min_by(|a, b| score(a).total_cmp(&score(b)).then(a.id.cmp(&b.id)));
    aligned.or_else(|| {
        map.lanes
            .iter()
            .filter(|l| l.is_center())
            .min_by(|a, b| score(a).total_cmp(&score(b)).then(a.id.cmp(&b.id)))
    })
}

/// Abstract an ego-frame map, picking the ego lane as the center lane under the origin.
pub fn abstract_map_at_origin(map: &MapRegion) -> Result<MapAbstract> {
    let lane = lane_under(map, Vec2::zero(), 0.0)
        .ok_or_else(|| ScenarioError::NotFound { what: "center lane", id: map.region_id.clone() })?;
    abstract_map(map, lane.id)
}

/// Encode a whole scenario. Agents come out ego first, then in input order.
pub fn encode_scenario(scenario: &Scenario, binning: &DistanceBinning) -> Result<StructuredScenario> {
    scenario.validate()?;
    let canonical = scenario.canonical()?;
    let agents = canonical
        .agents
        .iter()
        .map(|a| encode_agent(&a.states, binning))
        .collect::<Result<Vec<_>>>()?;
    let map_abstract = abstract_map_at_origin(&canonical.map)?;
    StructuredScenario::new(map_abstract, agents)
}
