//! Planar geometry: vectors, angle wrapping and rigid transforms.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector pointing along `heading` (radians, counter-clockwise from +x).
    pub fn from_angle(heading: T) -> Self {
        Self::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Rotate counter-clockwise by `angle`.
    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Left-hand normal (rotated by +90 degrees).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut r = a - two_pi * ((a + pi) / two_pi).floor();
    if r >= pi {
        r -= two_pi;
    }
    if r < -pi {
        r += two_pi;
    }
    r
}

/// A planar pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2<T> {
    pub position: Vec2<T>,
    pub heading: T,
}

impl<T: Scalar> Pose2<T> {
    pub fn new(position: Vec2<T>, heading: T) -> Self {
        Self { position, heading }
    }

    /// Express a world point in this pose's local frame (+x forward, +y left).
    pub fn to_local(&self, p: Vec2<T>) -> Vec2<T> {
        (p - self.position).rotate(-self.heading)
    }

    /// Map a local point back into the world frame.
    pub fn to_world(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.heading) + self.position
    }

    pub fn heading_to_local(&self, h: T) -> T {
        wrap_angle(h - self.heading)
    }

    pub fn heading_to_world(&self, h: T) -> T {
        wrap_angle(h + self.heading)
    }
}

/// Rigid transform `p -> R(rotation) p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: T,
    pub translation: Vec2<T>,
}

impl<T: Scalar> RigidTransform<T> {
    pub fn new(rotation: T, translation: Vec2<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn apply(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.rotation) + self.translation
    }

    pub fn apply_heading(&self, h: T) -> T {
        wrap_angle(h + self.rotation)
    }
}

/// Closest point on segment `[a, b]` to `p`, with its parameter in `[0, 1]`.
pub fn closest_point_on_segment<T: Scalar>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> (Vec2<T>, T) {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= T::zero() {
        return (a, T::zero());
    }
    let t = ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one());
    (a + ab * t, t)
}

pub fn point_segment_distance<T: Scalar>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    closest_point_on_segment(p, a, b).0.distance(p)
}

/// Intersection point of segments `[a1, a2]` and `[b1, b2]`, if they meet.
/// Parallel (including collinear) segments report no intersection.
pub fn segment_intersection<T: Scalar>(
    a1: Vec2<T>,
    a2: Vec2<T>,
    b1: Vec2<T>,
    b2: Vec2<T>,
) -> Option<Vec2<T>> {
    let r = a2 - a1;
    let s = b2 - b1;
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if scale <= T::zero() || denom.abs() <= T::epsilon() * scale {
        return None;
    }
    let qp = b1 - a1;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let (zero, one) = (T::zero(), T::one());
    if t >= zero && t <= one && u >= zero && u <= one {
        Some(a1 + r * t)
    } else {
        None
    }
}
