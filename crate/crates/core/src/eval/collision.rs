use crate::geometry::Vec2;
use crate::scalar::Scalar;
use crate::scenario::Scenario;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox<T> {
    pub center: Vec2<T>,
    pub heading: T,
    pub length: T,
    pub width: T,
}

impl<T: Scalar> OrientedBox<T> {
    pub fn new(center: Vec2<T>, heading: T, length: T, width: T) -> Self {
        Self { center, heading, length, width }
    }

    fn axes(&self) -> [Vec2<T>; 2] {
        let along = Vec2::from_angle(self.heading);
        [along, along.perp()]
    }

    /// Half-extent of the box projected on a unit axis.
    fn radius_on(&self, axis: Vec2<T>) -> T {
        let [along, across] = self.axes();
        let half = T::of(0.5);
        half * self.length * along.dot(axis).abs() + half * self.width * across.dot(axis).abs()
    }

    pub fn corners(&self) -> [Vec2<T>; 4] {
        let [along, across] = self.axes();
        let (a, c) = (along * (self.length * T::of(0.5)), across * (self.width * T::of(0.5)));
        [self.center + a + c, self.center + a - c, self.center - a - c, self.center - a + c]
    }
}

/// Separating-axis test for two rectangles. Touching edges count as overlap.
pub fn boxes_overlap<T: Scalar>(p: &OrientedBox<T>, q: &OrientedBox<T>) -> bool {
    let offset = q.center - p.center;
    p.axes()
        .into_iter()
        .chain(q.axes())
        .all(|axis| offset.dot(axis).abs() <= p.radius_on(axis) + q.radius_on(axis))
}

/// Fraction of vehicles whose box overlaps another vehicle's box at some frame.
pub fn scene_collision_fraction(scene: &Scenario) -> f64 {
    let n = scene.agents.len();
    if n < 2 {
        return 0.0;
    }
    let mut colliding = vec![false; n];
    for t in 0..scene.horizon() {
        let boxes: Vec<OrientedBox<f64>> = scene
            .agents
            .iter()
            .map(|a| {
                let s = &a.states[t];
                OrientedBox::new(s.position, s.heading, a.length, a.width)
            })
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if (!colliding[i] || !colliding[j]) && boxes_overlap(&boxes[i], &boxes[j]) {
                    colliding[i] = true;
                    colliding[j] = true;
                }
            }
        }
    }
    colliding.iter().filter(|&&c| c).count() as f64 / n as f64
}

/// Mean over scenes of the per-scene colliding-vehicle fraction.
pub fn scenario_collision_rate(scenes: &[Scenario]) -> Result<f64, EvalError> {
    if scenes.is_empty() {
        return Err(EvalError::NoScenes);
    }
    Ok(scenes.iter().map(scene_collision_fraction).sum::<f64>() / scenes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, y: f64, h: f64) -> OrientedBox<f64> {
        OrientedBox::new(Vec2::new(x, y), h, 4.0, 2.0)
    }

    #[test]
    fn hand_cases() {
        assert!(boxes_overlap(&car(0.0, 0.0, 0.0), &car(0.0, 0.0, 0.0)));
        assert!(!boxes_overlap(&car(0.0, 0.0, 0.0), &car(10.0, 0.0, 0.0)));
        assert!(boxes_overlap(&car(0.0, 0.0, 0.0), &car(3.9, 0.0, 0.0)));
        assert!(!boxes_overlap(&car(0.0, 0.0, 0.0), &car(4.1, 0.0, 0.0)));
    }

    #[test]
    fn corner_gap_needs_the_rotated_axis() {
        // A diamond near the corner of an axis-aligned box: the projections on the
        // world axes overlap, only the diamond's own axes separate them.
        let a = OrientedBox::new(Vec2::new(0.0, 0.0), 0.0, 2.0, 2.0);
        let b = OrientedBox::new(Vec2::new(2.3, 2.3), std::f64::consts::FRAC_PI_4, 2.0, 2.0);
        assert!(!boxes_overlap(&a, &b));
    }

    #[test]
    fn f32_boxes() {
        let a = OrientedBox::new(Vec2::new(0.0f32, 0.0), 0.3, 4.0, 2.0);
        let b = OrientedBox::new(Vec2::new(1.0f32, 0.5), -0.2, 4.0, 2.0);
        assert!(boxes_overlap(&a, &b));
    }
}
