//! Canonical JSON documents for scenarios, map regions and structured codes.
//!
//! Serialization is compact, field order is fixed, and floats are written in
//! shortest round-trip form, so equal values always produce identical bytes.

use serde::{Deserialize, Serialize};

use crate::code::{AgentAbstract, DistanceBinning, MapAbstract, StructuredScenario};
use crate::error::{Result, ScenarioError};
use crate::geometry::Vec2;
use crate::scenario::{Agent, AgentState, LaneSegment, LaneType, LightState, MapRegion, Scenario, FPS};

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioDoc {
    fps: Option<u32>,
    map: Option<MapDoc>,
    agents: Option<Vec<AgentDoc>>,
    ego_index: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapDoc {
    region_id: Option<String>,
    center: Option<[f64; 2]>,
    lanes: Option<Vec<LaneDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LaneDoc {
    id: Option<i64>,
    start: Option<[f64; 2]>,
    end: Option<[f64; 2]>,
    #[serde(rename = "type")]
    lane_type: Option<LaneType>,
    light: Option<LightState>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentDoc {
    id: Option<i64>,
    length: Option<f64>,
    width: Option<f64>,
    states: Option<Vec<StateDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    x: Option<f64>,
    y: Option<f64>,
    heading: Option<f64>,
    speed: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodeDoc {
    map: Option<Vec<i64>>,
    agents: Option<Vec<Vec<i64>>>,
}

fn req<T>(v: Option<T>, field: impl FnOnce() -> String) -> Result<T> {
    v.ok_or_else(|| ScenarioError::field(field(), "missing required field"))
}

fn parse_json<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn pt(p: [f64; 2]) -> Vec2<f64> {
    Vec2::new(p[0], p[1])
}

fn arr(p: Vec2<f64>) -> [f64; 2] {
    [p.x, p.y]
}

impl MapDoc {
    fn from_region(m: &MapRegion) -> Self {
        MapDoc {
            region_id: Some(m.region_id.clone()),
            center: Some(arr(m.center)),
            lanes: Some(
                m.lanes
                    .iter()
                    .map(|l| LaneDoc {
                        id: Some(l.id),
                        start: Some(arr(l.start)),
                        end: Some(arr(l.end)),
                        lane_type: Some(l.lane_type),
                        light: Some(l.light),
                    })
                    .collect(),
            ),
        }
    }

    fn into_region(self, prefix: &str) -> Result<MapRegion> {
        let lanes = req(self.lanes, || format!("{prefix}lanes"))?
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let f = |name: &str| format!("{prefix}lanes[{i}].{name}");
                Ok(LaneSegment {
                    id: req(l.id, || f("id"))?,
                    start: pt(req(l.start, || f("start"))?),
                    end: pt(req(l.end, || f("end"))?),
                    lane_type: req(l.lane_type, || f("type"))?,
                    light: req(l.light, || f("light"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MapRegion {
            region_id: req(self.region_id, || format!("{prefix}region_id"))?,
            center: pt(req(self.center, || format!("{prefix}center"))?),
            lanes,
        })
    }
}

pub fn scenario_to_json(s: &Scenario) -> Vec<u8> {
    let doc = ScenarioDoc {
        fps: Some(FPS),
        map: Some(MapDoc::from_region(&s.map)),
        agents: Some(
            s.agents
                .iter()
                .map(|a| AgentDoc {
                    id: Some(a.id),
                    length: Some(a.length),
                    width: Some(a.width),
                    states: Some(
                        a.states
                            .iter()
                            .map(|st| StateDoc {
                                x: Some(st.position.x),
                                y: Some(st.position.y),
                                heading: Some(st.heading),
                                speed: Some(st.speed),
                            })
                            .collect(),
                    ),
                })
                .collect(),
        ),
        ego_index: Some(s.ego_index),
    };
    serde_json::to_vec(&doc).expect("scenario documents always serialize")
}

pub fn scenario_from_json(bytes: &[u8]) -> Result<Scenario> {
    let doc: ScenarioDoc = parse_json(bytes)?;
    let fps = req(doc.fps, || "fps".into())?;
    if fps != FPS {
        return Err(ScenarioError::field("fps", format!("expected {FPS}, found {fps}")));
    }
    let map = req(doc.map, || "map".into())?.into_region("map.")?;
    let agents = req(doc.agents, || "agents".into())?
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let f = |name: &str| format!("agents[{i}].{name}");
            let states = req(a.states, || f("states"))?
                .into_iter()
                .enumerate()
                .map(|(t, s)| {
                    let g = |name: &str| format!("agents[{i}].states[{t}].{name}");
                    Ok(AgentState::new(
                        Vec2::new(req(s.x, || g("x"))?, req(s.y, || g("y"))?),
                        req(s.heading, || g("heading"))?,
                        req(s.speed, || g("speed"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Agent {
                id: req(a.id, || f("id"))?,
                length: req(a.length, || f("length"))?,
                width: req(a.width, || f("width"))?,
                states,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ego_index = req(doc.ego_index, || "ego_index".into())?;
    Scenario::new(map, agents, ego_index)
}

pub fn map_to_json(m: &MapRegion) -> Vec<u8> {
    serde_json::to_vec(&MapDoc::from_region(m)).expect("map documents always serialize")
}

pub fn map_from_json(bytes: &[u8]) -> Result<MapRegion> {
    let doc: MapDoc = parse_json(bytes)?;
    let m = doc.into_region("")?;
    m.validate()?;
    Ok(m)
}

/// Parse a whole source map, which may hold more lanes than a region.
pub fn source_map_from_json(bytes: &[u8]) -> Result<MapRegion> {
    let doc: MapDoc = parse_json(bytes)?;
    let m = doc.into_region("")?;
    m.validate_geometry()?;
    Ok(m)
}

pub fn code_to_json(z: &StructuredScenario) -> Vec<u8> {
    let doc = CodeDoc {
        map: Some(z.map_abstract.to_vec().to_vec()),
        agents: Some(z.agents.iter().map(|a| a.to_vec().to_vec()).collect()),
    };
    serde_json::to_vec(&doc).expect("code documents always serialize")
}

pub fn code_to_value(z: &StructuredScenario) -> serde_json::Value {
    serde_json::from_slice(&code_to_json(z)).expect("valid json")
}

pub fn code_from_json(bytes: &[u8], binning: &DistanceBinning) -> Result<StructuredScenario> {
    let doc: CodeDoc = parse_json(bytes)?;
    let map = MapAbstract::from_slice(&req(doc.map, || "map".into())?)?;
    let agents = req(doc.agents, || "agents".into())?
        .iter()
        .map(|v| AgentAbstract::from_slice(v, binning))
        .collect::<Result<Vec<_>>>()?;
    StructuredScenario::new(map, agents)
}
