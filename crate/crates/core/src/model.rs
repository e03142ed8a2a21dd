//! Truck-trailer morphology, on-axle hitch kinematics and footprint geometry.
//!
//! Axle indexing follows the usual convention: the truck front axle is axle 0,
//! the truck rear axle is axle 1 and trailer `j` carries axle `j + 1`. Only the
//! truck rear axle is stored; every other axle is derived from the headings and
//! wheelbases, so the spacing between axles is exact by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, wrap_angle, Pose, TorusWorld, Vec2};

/// Simulation time step used throughout (20 Hz control rate).
pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HavConfig {
    pub truck_wheelbase: f64,
    pub trailer_wheelbases: Vec<f64>,
    /// Symmetric steering limit in radians.
    pub max_steer: f64,
    pub min_speed: f64,
    pub max_speed: f64,
}

impl HavConfig {
    pub fn new(truck_wheelbase: f64, trailer_wheelbases: Vec<f64>) -> Self {
        Self {
            truck_wheelbase,
            trailer_wheelbases,
            max_steer: 50f64.to_radians(),
            min_speed: 0.0,
            max_speed: 4.0,
        }
    }

    pub fn trailer_count(&self) -> usize {
        self.trailer_wheelbases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trailer_wheelbases.is_empty() {
            return bad("at least one trailer is required".into());
        }
        let all = std::iter::once(&self.truck_wheelbase).chain(&self.trailer_wheelbases);
        if let Some(l) = all.into_iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("wheelbase {l} is not positive"));
        }
        if !(self.min_speed >= 0.0 && self.min_speed < self.max_speed && self.max_speed.is_finite()) {
            return bad(format!("speed range [{}, {}] is invalid", self.min_speed, self.max_speed));
        }
        if !(self.max_steer > 0.0 && self.max_steer <= std::f64::consts::FRAC_PI_2) {
            return bad(format!("steering limit {} outside (0, pi/2]", self.max_steer));
        }
        Ok(())
    }

    /// Radius of the bounding circle centred on the truck rear axle.
    pub fn footprint_radius(&self) -> f64 {
        self.truck_wheelbase.max(self.trailer_wheelbases.iter().sum())
    }

    /// Smallest constant-curvature turn the vehicle can hold without its
    /// articulation growing.
    pub fn min_turning_radius(&self) -> f64 {
        let sq: f64 = self.trailer_wheelbases.iter().map(|l| l * l).sum();
        (self.truck_wheelbase * self.truck_wheelbase + sq).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub speed: f64,
    pub steer: f64,
}

impl Action {
    pub const STOP: Action = Action { speed: 0.0, steer: 0.0 };

    pub const fn new(speed: f64, steer: f64) -> Self {
        Self { speed, steer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HavState {
    /// Truck rear axle position.
    pub position: Vec2,
    pub truck_heading: f64,
    pub trailer_headings: Vec<f64>,
}

impl HavState {
    /// Fully aligned vehicle at `pose`.
    pub fn aligned(pose: Pose, trailers: usize) -> Self {
        let h = wrap_angle(pose.heading);
        Self { position: pose.position(), truck_heading: h, trailer_headings: vec![h; trailers] }
    }

    pub fn pose(&self) -> Pose {
        Pose::with_position(self.position, self.truck_heading)
    }

    /// Heading of segment `k`, where 0 is the truck and `j >= 1` is trailer `j`.
    fn segment_heading(&self, k: usize) -> f64 {
        if k == 0 {
            self.truck_heading
        } else {
            self.trailer_headings[k - 1]
        }
    }

    /// Wrapped articulation angles, one per trailer.
    pub fn articulation_angles(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.trailer_headings.len()).map(|j| angle_diff(self.segment_heading(j), self.segment_heading(j - 1)))
    }

    /// True when any hitch angle has left `[-pi/2, pi/2]`.
    pub fn is_jackknifed(&self) -> bool {
        let mut prev = self.truck_heading;
        for &h in &self.trailer_headings {
            if (h - prev).cos() < 0.0 {
                return true;
            }
            prev = h;
        }
        false
    }

    fn check_against(&self, config: &HavConfig) -> Result<()> {
        if self.trailer_headings.len() != config.trailer_count() {
            return Err(Error::TrailerCountMismatch {
                expected: config.trailer_count(),
                got: self.trailer_headings.len(),
            });
        }
        Ok(())
    }

    /// One explicit Euler step of the on-axle hitch model. Trailers are updated
    /// simultaneously from the pre-step angles.
    pub fn step(&self, config: &HavConfig, action: Action, dt: f64) -> Result<HavState> {
        self.check_against(config)?;
        if !(action.speed >= 0.0) {
            return Err(Error::InvalidAction(format!("negative speed {}", action.speed)));
        }
        if !(action.steer.abs() <= config.max_steer + 1e-12) {
            return Err(Error::InvalidAction(format!(
                "steering {} exceeds limit {}",
                action.steer, config.max_steer
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidAction(format!("non-positive time step {dt}")));
        }
        let mut next = self.clone();
        next.advance(config, action, dt);
        Ok(next)
    }

    /// In-place variant of [`HavState::step`] without argument validation.
    pub fn advance(&mut self, config: &HavConfig, action: Action, dt: f64) {
        let v0 = action.speed;
        let th0 = self.truck_heading;
        self.position += Vec2::from_angle(th0) * (v0 * dt);
        self.truck_heading = wrap_angle(th0 + v0 / config.truck_wheelbase * action.steer.tan() * dt);

        let mut prev_heading = th0;
        let mut prev_speed = v0;
        for (heading, &l) in self.trailer_headings.iter_mut().zip(&config.trailer_wheelbases) {
            let old = *heading;
            let (s, c) = (old - prev_heading).sin_cos();
            *heading = wrap_angle(old - prev_speed / l * s * dt);
            prev_heading = old;
            prev_speed *= c;
        }
    }

    /// Axle chain: truck front axle, truck rear axle, then each trailer axle.
    pub fn polyline(&self, config: &HavConfig) -> Vec<Vec2> {
        let mut pts = Vec::with_capacity(config.trailer_count() + 2);
        pts.push(self.position + Vec2::from_angle(self.truck_heading) * config.truck_wheelbase);
        pts.push(self.position);
        let mut p = self.position;
        for (&h, &l) in self.trailer_headings.iter().zip(&config.trailer_wheelbases) {
            p = p - Vec2::from_angle(h) * l;
            pts.push(p);
        }
        pts
    }
}

pub fn footprint_radius(config: &HavConfig) -> f64 {
    config.footprint_radius()
}

pub fn min_turning_radius(config: &HavConfig) -> f64 {
    config.min_turning_radius()
}

pub fn is_jackknifed(state: &HavState) -> bool {
    state.is_jackknifed()
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let orient = |p: Vec2, q: Vec2, r: Vec2| (q - p).cross(r - p);
    let on_segment = |p: Vec2, q: Vec2, r: Vec2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(b0, b1, a0))
        || (d2 == 0.0 && on_segment(b0, b1, a1))
        || (d3 == 0.0 && on_segment(a0, a1, b0))
        || (d4 == 0.0 && on_segment(a0, a1, b1))
}

/// True when any segment of chain `a` touches any segment of chain `b`.
pub fn chains_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    a.windows(2).any(|sa| b.windows(2).any(|sb| segments_intersect(sa[0], sa[1], sb[0], sb[1])))
}

/// Axle-chain intersection between two vehicles on a torus. Chain `b` is
/// shifted to the periodic image nearest to `a`'s rear axle.
pub fn actual_collision(
    world: &TorusWorld,
    a: (&HavState, &HavConfig),
    b: (&HavState, &HavConfig),
) -> bool {
    let chain_a = a.0.polyline(a.1);
    let shift = world.rel_vector(a.0.position, b.0.position) - (b.0.position - a.0.position);
    let chain_b: Vec<Vec2> = b.0.polyline(b.1).into_iter().map(|p| p + shift).collect();
    chains_intersect(&chain_a, &chain_b)
}
