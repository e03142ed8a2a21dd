//! Planar vectors, angle wrapping and toroidal world arithmetic.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `heading`.
    pub fn from_angle(heading: f64) -> Self {
        let (s, c) = heading.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    // rem_euclid can round up to exactly TAU
    if a <= -PI {
        a += TAU;
    }
    a
}

/// Wrapped difference `to - from` in `(-pi, pi]`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_angle(to - from)
}

/// Position and heading of a truck rear axle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn with_position(p: Vec2, heading: f64) -> Self {
        Self::new(p.x, p.y, heading)
    }
}

/// Square world with periodic boundaries in both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusWorld {
    edge: f64,
}

impl TorusWorld {
    /// Panics if `edge` is not a positive finite length.
    pub fn new(edge: f64) -> Self {
        assert!(edge.is_finite() && edge > 0.0, "torus edge must be positive, got {edge}");
        Self { edge }
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    fn wrap_coord(&self, c: f64) -> f64 {
        let w = c.rem_euclid(self.edge);
        // rem_euclid of a tiny negative value rounds to `edge`
        if w >= self.edge {
            0.0
        } else {
            w
        }
    }

    /// Maps a point into `[0, edge)^2`.
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.wrap_coord(p.x), self.wrap_coord(p.y))
    }

    pub fn wrap_pose(&self, pose: Pose) -> Pose {
        Pose::with_position(self.wrap(pose.position()), wrap_angle(pose.heading))
    }

    /// Minimal-image representative of a displacement; components in `[-edge/2, edge/2)`.
    pub fn min_image(&self, d: Vec2) -> Vec2 {
        Vec2::new(self.min_image_coord(d.x), self.min_image_coord(d.y))
    }

    fn min_image_coord(&self, c: f64) -> f64 {
        let half = 0.5 * self.edge;
        let r = (c + half).rem_euclid(self.edge) - half;
        if r >= half {
            r - self.edge
        } else {
            r
        }
    }

    /// Shortest displacement from `from` to `to` under periodic boundaries.
    pub fn rel_vector(&self, from: Vec2, to: Vec2) -> Vec2 {
        self.min_image(to - from)
    }

    pub fn distance(&self, a: Vec2, b: Vec2) -> f64 {
        self.rel_vector(a, b).norm()
    }

    /// Footprint overlap test between two bounding circles (boundary contact counts).
    pub fn potential_collision(&self, center_a: Vec2, radius_a: f64, center_b: Vec2, radius_b: f64) -> bool {
        self.distance(center_a, center_b) <= radius_a + radius_b
    }
}
