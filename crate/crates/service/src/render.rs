//! Top-down raster frames of a scenario.

use image::{ImageFormat, Rgb, RgbImage};
use imageproc::drawing::{draw_antialiased_line_segment_mut, draw_filled_circle_mut, draw_polygon_mut};
use imageproc::pixelops::interpolate;
use imageproc::point::Point as PixelPoint;

use scengen_core::geometry::Pose2;
use scengen_core::scenario::{LaneType, LightState, Scenario};
use scengen_core::{Box2, Point, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub size: u32,
    pub pixels_per_meter: f64,
    pub background: Rgb<u8>,
    pub center_lane: Rgb<u8>,
    pub edge_lane: Rgb<u8>,
    pub boundary_lane: Rgb<u8>,
    pub vehicle: Rgb<u8>,
    pub ego: Rgb<u8>,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            size: 512,
            pixels_per_meter: 10.0,
            background: Rgb([30, 30, 34]),
            center_lane: Rgb([110, 110, 120]),
            edge_lane: Rgb([220, 220, 220]),
            boundary_lane: Rgb([230, 190, 40]),
            vehicle: Rgb([70, 140, 230]),
            ego: Rgb([235, 70, 60]),
        }
    }
}

fn light_color(light: LightState) -> Option<Rgb<u8>> {
    match light {
        LightState::None => None,
        LightState::Red => Some(Rgb([220, 40, 40])),
        LightState::Yellow => Some(Rgb([240, 200, 40])),
        LightState::Green => Some(Rgb([50, 200, 80])),
    }
}

/// World-to-pixel mapping: the ego's first pose sits at the canvas center facing up.
struct View {
    pose: Pose2<f64>,
    half: f64,
    scale: f64,
}

impl View {
    fn pixel(&self, p: Point) -> (f32, f32) {
        let local = self.pose.to_local(p);
        ((self.half - local.y * self.scale) as f32, (self.half - local.x * self.scale) as f32)
    }
}

fn fill_quad(img: &mut RgbImage, corners: [(f32, f32); 4], color: Rgb<u8>) {
    let mut pts: Vec<PixelPoint<i32>> =
        corners.iter().map(|&(x, y)| PixelPoint::new(x.round() as i32, y.round() as i32)).collect();
    pts.dedup();
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() >= 3 {
        draw_polygon_mut(img, &pts, color);
    } else {
        let (x, y) = corners[0];
        let (w, h) = img.dimensions();
        if x >= 0.0 && y >= 0.0 && (x as u32) < w && (y as u32) < h {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Frame `t` (0-based state index) of a validated scenario.
fn draw_frame(scenario: &Scenario, t: usize, style: &RenderStyle) -> RgbImage {
    let mut img = RgbImage::from_pixel(style.size, style.size, style.background);
    let view = View { pose: scenario.ego().states[0].pose(), half: style.size as f64 / 2.0, scale: style.pixels_per_meter };
    // Center lanes first so markings and lights stay visible on top.
    let order = [LaneType::Center, LaneType::Edge, LaneType::Boundary];
    for kind in order {
        let color = match kind {
            LaneType::Center => style.center_lane,
            LaneType::Edge => style.edge_lane,
            LaneType::Boundary => style.boundary_lane,
        };
        for lane in scenario.map.lanes.iter().filter(|l| l.lane_type == kind) {
            let (a, b) = (view.pixel(lane.start), view.pixel(lane.end));
            let ai = (a.0.round() as i32, a.1.round() as i32);
            let bi = (b.0.round() as i32, b.1.round() as i32);
            draw_antialiased_line_segment_mut(&mut img, ai, bi, color, interpolate);
            if let Some(light) = light_color(lane.light) {
                draw_filled_circle_mut(&mut img, bi, 2, light);
            }
        }
    }
    for (i, agent) in scenario.agents.iter().enumerate() {
        let s = &agent.states[t];
        let bbox = Box2::new(s.position, s.heading, agent.length, agent.width);
        let color = if i == scenario.ego_index { style.ego } else { style.vehicle };
        fill_quad(&mut img, bbox.corners().map(|c| view.pixel(c)), color);
    }
    img
}

/// One frame per state index. The scenario is validated first.
pub fn render_frames(scenario: &Scenario, style: &RenderStyle) -> Result<Vec<RgbImage>, ScenarioError> {
    scenario.validate()?;
    Ok((0..scenario.horizon()).map(|t| draw_frame(scenario, t, style)).collect())
}

/// A single frame by 1-based index `frame`, or `None` past the horizon.
pub fn render_frame(scenario: &Scenario, frame: usize, style: &RenderStyle) -> Result<Option<RgbImage>, ScenarioError> {
    scenario.validate()?;
    if frame == 0 || frame > scenario.horizon() {
        return Ok(None);
    }
    Ok(Some(draw_frame(scenario, frame - 1, style)))
}

pub fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

/// File name of a 1-based frame: `frame_001.png`.
pub fn frame_file_name(frame: usize) -> String {
    format!("frame_{frame:03}.png")
}
