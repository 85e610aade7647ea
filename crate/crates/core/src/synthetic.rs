//! Deterministic synthetic maps and scenarios used for bundled fixtures and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{wrap_angle, RigidTransform, Vec2};
use crate::scenario::{Agent, AgentState, LaneSegment, LaneType, LightState, MapRegion, Scenario, HORIZON, MAX_AGENTS, MAX_LANES};
use crate::retrieval::{SourceMap, TracePoint};
use crate::Point;

pub const LANE_WIDTH: f64 = 3.5;
pub const SEGMENT_LENGTH: f64 = 10.0;
const DT: f64 = 0.1;

/// Incrementally builds a lane map out of straight multi-lane roads.
#[derive(Debug, Default)]
pub struct MapBuilder {
    lanes: Vec<LaneSegment>,
    next_id: i64,
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, start: Point, end: Point, lane_type: LaneType, light: LightState) {
        self.lanes.push(LaneSegment { id: self.next_id, start, end, lane_type, light });
        self.next_id += 1;
    }

    fn polyline(&mut self, from: Point, to: Point, lane_type: LaneType, light: LightState) {
        let n = ((to - from).norm() / SEGMENT_LENGTH).ceil().max(1.0) as usize;
        for k in 0..n {
            let a = from.lerp(to, k as f64 / n as f64);
            let b = from.lerp(to, (k + 1) as f64 / n as f64);
            // Only the final segment before the stop line carries the signal.
            let l = if k + 1 == n { light } else { LightState::None };
            self.push(a, b, lane_type, l);
        }
    }

    /// A two-way road along the axis through `origin` with `heading`, spanning `[-back, ahead]`
    /// meters. Forward lanes sit on the right (negative lateral side).
    #[allow(clippy::too_many_arguments)]
    pub fn road(
        &mut self,
        origin: Point,
        heading: f64,
        back: f64,
        ahead: f64,
        forward_lanes: usize,
        backward_lanes: usize,
        light: LightState,
    ) -> &mut Self {
        let u = Vec2::from_angle(heading);
        let n = u.perp();
        let at = |s: f64, lat: f64| origin + u * s + n * lat;
        for k in 0..forward_lanes {
            let lat = -(k as f64 + 0.5) * LANE_WIDTH;
            self.polyline(at(-back, lat), at(ahead, lat), LaneType::Center, light);
        }
        for k in 0..backward_lanes {
            let lat = (k as f64 + 0.5) * LANE_WIDTH;
            self.polyline(at(ahead, lat), at(-back, lat), LaneType::Center, light);
        }
        for k in 1..forward_lanes {
            let lat = -(k as f64) * LANE_WIDTH;
            self.polyline(at(-back, lat), at(ahead, lat), LaneType::Edge, LightState::None);
        }
        for k in 1..backward_lanes {
            let lat = k as f64 * LANE_WIDTH;
            self.polyline(at(ahead, lat), at(-back, lat), LaneType::Edge, LightState::None);
        }
        let right = -(forward_lanes as f64) * LANE_WIDTH;
        let left = backward_lanes as f64 * LANE_WIDTH;
        self.polyline(at(-back, right), at(ahead, right), LaneType::Boundary, LightState::None);
        self.polyline(at(-back, left), at(ahead, left), LaneType::Boundary, LightState::None);
        self
    }

    pub fn build(self, region_id: impl Into<String>, center: Point) -> MapRegion {
        MapRegion { region_id: region_id.into(), center, lanes: self.lanes }
    }
}

/// Lateral offset (left-positive) of the `k`-th forward lane (0 = next to the road axis).
pub fn forward_lane(k: usize) -> f64 {
    -(k as f64 + 0.5) * LANE_WIDTH
}

pub fn backward_lane(k: usize) -> f64 {
    (k as f64 + 0.5) * LANE_WIDTH
}

/// Longitudinal motion profile of a synthetic agent.
#[derive(Debug, Clone, Copy)]
pub enum Motion {
    Cruise,
    /// Constant acceleration (m/s^2), speed floored at zero.
    Accel(f64),
    /// Lateral shift (m, left-positive) completed over the given seconds.
    LaneChange(f64, f64),
    /// Constant yaw rate (rad/s) after the given delay in seconds.
    Turn(f64, f64),
}

/// Integrate a motion profile from an initial pose.
pub fn rollout(start: Point, heading: f64, speed: f64, motion: Motion) -> Vec<AgentState> {
    let mut out = Vec::with_capacity(HORIZON);
    match motion {
        Motion::LaneChange(shift, duration) => {
            let u = Vec2::from_angle(heading);
            let n = u.perp();
            for t in 0..HORIZON {
                let tt = t as f64 * DT;
                let s = (tt / duration).min(1.0);
                let lat = shift * (3.0 * s * s - 2.0 * s * s * s);
                let dlat = if tt < duration { shift * 6.0 * s * (1.0 - s) / duration } else { 0.0 };
                let p = start + u * (speed * tt) + n * lat;
                out.push(AgentState::new(p, wrap_angle(heading + dlat.atan2(speed)), dlat.hypot(speed)));
            }
        }
        _ => {
            let substeps = 10;
            let h = DT / substeps as f64;
            let (mut p, mut th, mut v) = (start, heading, speed);
            for t in 0..HORIZON {
                out.push(AgentState::new(p, wrap_angle(th), v));
                for k in 0..substeps {
                    let tt = t as f64 * DT + k as f64 * h;
                    let (acc, yaw) = match motion {
                        Motion::Accel(a) => (a, 0.0),
                        Motion::Turn(rate, delay) if tt >= delay => (0.0, rate),
                        _ => (0.0, 0.0),
                    };
                    p = p + Vec2::from_angle(th + 0.5 * yaw * h) * (v * h);
                    th += yaw * h;
                    v = (v + acc * h).max(0.0);
                }
            }
        }
    }
    out
}

fn agent(id: i64, length: f64, width: f64, states: Vec<AgentState>) -> Agent {
    Agent { id, length, width, states }
}

struct Placement {
    /// (longitudinal, lateral) on the scene's main road, in meters.
    at: (f64, f64),
    heading: f64,
    speed: f64,
    motion: Motion,
}

fn place(p: Placement) -> Vec<AgentState> {
    rollout(Vec2::new(p.at.0, p.at.1), p.heading, p.speed, p.motion)
}

const PI: f64 = std::f64::consts::PI;

/// The eight bundled training scenes. Every non-ego agent starts clear of the quadrant
/// axes, orientation sector edges and speed-bin edges so encodings are numerically robust.
pub fn fixture_dataset() -> Vec<Scenario> {
    let south = -PI;
    let west = PI / 2.0;
    let east = -PI / 2.0;
    // Scene layouts in a local frame where the ego starts at the origin facing +x.
    let mut scenes: Vec<(MapRegion, Vec<Vec<AgentState>>)> = Vec::new();

    // 0: two-lane each way straight road, mixed traffic.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 70.0, 70.0, 2, 2, LightState::None);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_straight", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (14.0, y(forward_lane(1))), heading: 0.0, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (-12.0, y(forward_lane(1))), heading: 0.0, speed: 3.75, motion: Motion::Accel(1.5) }),
                place(Placement { at: (22.0, y(backward_lane(0))), heading: south, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (-25.0, y(backward_lane(1))), heading: south, speed: 6.25, motion: Motion::Cruise }),
            ],
        ));
    }
    // 1: four-way intersection ahead, one car waiting on the crossing road.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 60.0, 80.0, 2, 2, LightState::Green);
        b.road(Vec2::new(30.0, -forward_lane(0)), west, 50.0, 50.0, 2, 2, LightState::Red);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_cross", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 8.75, motion: Motion::Accel(-1.8) }),
                place(Placement { at: (30.0 - forward_lane(0), y(-14.0)), heading: west, speed: 0.0, motion: Motion::Cruise }),
                place(Placement { at: (30.0 - forward_lane(1), y(-20.0)), heading: west, speed: 0.0, motion: Motion::Cruise }),
                place(Placement { at: (-15.0, y(forward_lane(1))), heading: 0.0, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (45.0, y(backward_lane(0))), heading: south, speed: 6.25, motion: Motion::Accel(-1.2) }),
            ],
        ));
    }
    // 2: single lane each way, oncoming cars and a slow follower.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 70.0, 70.0, 1, 1, LightState::None);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_single", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 3.75, motion: Motion::Cruise }),
                place(Placement { at: (18.0, y(backward_lane(0))), heading: south, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (40.0, y(backward_lane(0))), heading: south, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (-30.0, y(backward_lane(0))), heading: south, speed: 3.75, motion: Motion::Accel(1.0) }),
            ],
        ));
    }
    // 3: three lanes forward, a lane change to the left next to the ego.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(1)), 0.0, 70.0, 70.0, 3, 2, LightState::None);
        let y = |lat: f64| lat - forward_lane(1);
        scenes.push((
            b.build("fixture_wide", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 11.25, motion: Motion::Cruise }),
                place(Placement { at: (9.0, y(forward_lane(2))), heading: 0.0, speed: 8.75, motion: Motion::LaneChange(LANE_WIDTH, 3.0) }),
                place(Placement { at: (-16.0, y(forward_lane(0))), heading: 0.0, speed: 11.25, motion: Motion::Cruise }),
                place(Placement { at: (26.0, y(forward_lane(0))), heading: 0.0, speed: 8.75, motion: Motion::Accel(1.5) }),
                place(Placement { at: (12.0, y(backward_lane(0))), heading: south, speed: 11.25, motion: Motion::Cruise }),
                place(Placement { at: (-35.0, y(backward_lane(1))), heading: south, speed: 8.75, motion: Motion::Cruise }),
            ],
        ));
    }
    // 4: queue at a red light, ego stopping.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 60.0, 80.0, 2, 2, LightState::Red);
        b.road(Vec2::new(24.0, -forward_lane(0)), west, 50.0, 50.0, 1, 1, LightState::Green);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_queue", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 3.75, motion: Motion::Accel(-1.5) }),
                place(Placement { at: (9.0, y(forward_lane(1))), heading: 0.0, speed: 0.0, motion: Motion::Cruise }),
                place(Placement { at: (-9.0, y(forward_lane(1))), heading: 0.0, speed: 1.25, motion: Motion::Accel(-1.0) }),
                place(Placement { at: (24.0 + backward_lane(0), y(-18.0)), heading: west, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (24.0 - backward_lane(0), y(17.0)), heading: east, speed: 6.25, motion: Motion::Cruise }),
            ],
        ));
    }
    // 5: ego turning left at an intersection just ahead.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 60.0, 60.0, 1, 1, LightState::Green);
        b.road(Vec2::new(16.0, -forward_lane(0)), west, 50.0, 50.0, 1, 1, LightState::Red);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_turn", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 6.25, motion: Motion::Turn(0.45, 1.0) }),
                place(Placement { at: (24.0, y(backward_lane(0))), heading: south, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (16.0 - forward_lane(0), y(-12.0)), heading: west, speed: 1.25, motion: Motion::Cruise }),
                place(Placement { at: (-18.0, y(backward_lane(0))), heading: south, speed: 8.75, motion: Motion::Cruise }),
            ],
        ));
    }
    // 6: dense two-lane road, ego in the left lane.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(1)), 0.0, 70.0, 70.0, 2, 2, LightState::None);
        let y = |lat: f64| lat - forward_lane(1);
        scenes.push((
            b.build("fixture_dense", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (8.0, y(forward_lane(0))), heading: 0.0, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (-8.0, y(forward_lane(0))), heading: 0.0, speed: 6.25, motion: Motion::Accel(1.2) }),
                place(Placement { at: (30.0, y(forward_lane(0))), heading: 0.0, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (6.0, y(backward_lane(0))), heading: south, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (-20.0, y(backward_lane(0))), heading: south, speed: 11.25, motion: Motion::Cruise }),
            ],
        ));
    }
    // 7: crossing traffic from the right while the ego waits.
    {
        let mut b = MapBuilder::new();
        b.road(Vec2::new(0.0, -forward_lane(0)), 0.0, 60.0, 60.0, 1, 1, LightState::Red);
        b.road(Vec2::new(14.0, -forward_lane(0)), west, 55.0, 55.0, 2, 2, LightState::Green);
        let y = |lat: f64| lat - forward_lane(0);
        scenes.push((
            b.build("fixture_wait", Vec2::zero()),
            vec![
                place(Placement { at: (0.0, 0.0), heading: 0.0, speed: 0.0, motion: Motion::Cruise }),
                place(Placement { at: (14.0 - forward_lane(0), y(-22.0)), heading: west, speed: 8.75, motion: Motion::Cruise }),
                place(Placement { at: (14.0 - backward_lane(1), y(20.0)), heading: east, speed: 6.25, motion: Motion::Cruise }),
                place(Placement { at: (-12.0, y(backward_lane(0))), heading: south, speed: 1.25, motion: Motion::Cruise }),
            ],
        ));
    }

    let poses = [
        (0.0, (0.0, 0.0)),
        (0.9, (120.0, -40.0)),
        (-2.2, (-300.0, 75.5)),
        (2.8, (18.0, 640.0)),
        (-0.4, (-55.0, -210.0)),
        (1.7, (400.0, 12.0)),
        (-1.1, (-9.0, -9.0)),
        (3.0, (77.0, -333.0)),
    ];
    scenes
        .into_iter()
        .zip(poses)
        .enumerate()
        .map(|(i, ((map, states), (rot, (tx, ty))))| {
            let n = states.len();
            // Rotate the ego into a non-zero slot so consumers must honor ego_index.
            let ego_slot = i % n;
            let mut agents: Vec<Agent> = states
                .into_iter()
                .enumerate()
                .map(|(k, s)| agent(k as i64 + 1, 4.3 + 0.1 * (k % 5) as f64, 1.85 + 0.05 * (k % 3) as f64, s))
                .collect();
            let ego = agents.remove(0);
            agents.insert(ego_slot, ego);
            let tf = RigidTransform::new(rot, Vec2::new(tx, ty));
            let scene = Scenario { map, agents, ego_index: ego_slot }.transformed(&tf);
            scene.validate().expect("fixture is valid");
            scene
        })
        .collect()
}

/// A maximum-size random scenario: 384 lanes, 32 agents, full-precision floats.
pub fn max_size_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lanes = (0..MAX_LANES)
        .map(|i| {
            let start = Vec2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
            let end = start + Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(1.0..15.0);
            LaneSegment {
                id: i as i64 * 7 + 3,
                start,
                end,
                lane_type: LaneType::ALL[i % 3],
                light: LightState::ALL[i % 4],
            }
        })
        .collect();
    let agents = (0..MAX_AGENTS)
        .map(|i| Agent {
            id: i as i64,
            length: rng.random_range(3.0..6.0),
            width: rng.random_range(1.5..2.5),
            states: (0..HORIZON)
                .map(|_| {
                    AgentState::new(
                        Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)),
                        rng.random_range(-PI..PI),
                        rng.random_range(0.0..20.0),
                    )
                })
                .collect(),
        })
        .collect();
    Scenario {
        map: MapRegion { region_id: format!("random_{seed}"), center: Vec2::new(rng.random(), rng.random()), lanes },
        agents,
        ego_index: (seed as usize) % MAX_AGENTS,
    }
}

/// Two bundled source maps and trace points sampled along their roads.
pub fn fixture_maps() -> (Vec<SourceMap>, Vec<TracePoint>) {
    let mut maps = Vec::new();
    let mut traces = Vec::new();

    let mut b = MapBuilder::new();
    b.road(Vec2::zero(), 0.0, 200.0, 200.0, 2, 2, LightState::None);
    b.road(Vec2::new(300.0, 0.0), 0.0, 90.0, 90.0, 1, 1, LightState::None);
    maps.push(SourceMap { map_id: "highway".into(), map: b.build("highway", Vec2::zero()) });
    for k in 0..9 {
        let x = -160.0 + 40.0 * k as f64;
        traces.push(TracePoint { map_id: "highway".into(), position: Vec2::new(x, forward_lane(0)), heading: 0.0 });
        traces.push(TracePoint { map_id: "highway".into(), position: Vec2::new(x + 15.0, backward_lane(1)), heading: -PI });
    }
    for k in 0..4 {
        traces.push(TracePoint {
            map_id: "highway".into(),
            position: Vec2::new(240.0 + 35.0 * k as f64, forward_lane(0)),
            heading: 0.0,
        });
    }

    let mut b = MapBuilder::new();
    b.road(Vec2::zero(), 0.0, 150.0, 150.0, 2, 2, LightState::Green);
    b.road(Vec2::zero(), PI / 2.0, 150.0, 150.0, 2, 2, LightState::Red);
    b.road(Vec2::new(0.0, 110.0), 0.0, 100.0, 100.0, 1, 1, LightState::None);
    maps.push(SourceMap { map_id: "downtown".into(), map: b.build("downtown", Vec2::zero()) });
    for d in [-70.0, -52.0, -33.0, -21.0, -12.0, 40.0, 90.0] {
        traces.push(TracePoint { map_id: "downtown".into(), position: Vec2::new(d, forward_lane(0)), heading: 0.0 });
        traces.push(TracePoint { map_id: "downtown".into(), position: Vec2::new(-forward_lane(1), d), heading: PI / 2.0 });
    }
    for d in [-60.0, -10.0, 45.0] {
        traces.push(TracePoint { map_id: "downtown".into(), position: Vec2::new(d, 110.0 + forward_lane(0)), heading: 0.0 });
    }
    (maps, traces)
}
