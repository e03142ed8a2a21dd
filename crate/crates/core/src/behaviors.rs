//! The six steering behaviors. Each turns local observations into one context
//! map per control step.

use serde::{Deserialize, Serialize};

use crate::context::{ActionGrid, ContextMap, MapKind};
use crate::geometry::{TorusWorld, Vec2};
use crate::model::{Action, HavConfig, HavState};

/// What an ego vehicle knows about one neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborObservation {
    /// Minimal-image vector from the ego truck rear axle to the neighbor's.
    pub relative_position: Vec2,
    pub footprint_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorParams {
    pub goal_sigma_steer: f64,
    pub goal_sigma_speed: f64,
    pub collision_lookahead: f64,
    /// Extra clearance demanded by collision prevention. Covering one step of
    /// neighbor motion keeps simultaneous moves overlap-free.
    pub collision_margin: f64,
    pub evade_lookahead: f64,
    pub evade_bound: f64,
    pub evade_exponent: f64,
    pub evade_weight: f64,
    pub progress_period: u32,
    pub progress_increment: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            goal_sigma_steer: 1.0,
            goal_sigma_speed: 2.0,
            collision_lookahead: 2.0,
            collision_margin: 0.25,
            evade_lookahead: 8.0,
            evade_bound: 10.0,
            evade_exponent: 4.0,
            evade_weight: 2.0,
            progress_period: 15,
            progress_increment: 0.15,
        }
    }
}

/// Gaussian interest centred on the controller's steering command at full speed.
pub fn goal_attraction(steer_command: f64, grid: &ActionGrid, params: &BehaviorParams) -> ContextMap {
    let vmax = grid.max_speed();
    ContextMap::from_fn(MapKind::Interest, grid, |a| {
        let ds = (a.steer - steer_command) / params.goal_sigma_steer;
        let dv = (a.speed - vmax) / params.goal_sigma_speed;
        (-0.5 * ds * ds - 0.5 * dv * dv).exp()
    })
}

/// Danger 1 for every action whose one-step successor is jackknifed.
pub fn jackknife_prevention(state: &HavState, config: &HavConfig, grid: &ActionGrid, dt: f64) -> ContextMap {
    let mut scratch = state.clone();
    ContextMap::from_fn(MapKind::Danger, grid, |a| {
        scratch.clone_from(state);
        scratch.advance(config, a, dt);
        if scratch.is_jackknifed() {
            1.0
        } else {
            0.0
        }
    })
}

/// Per-hitch straightening urge; grows with articulation.
pub fn straightening_term(articulation: f64) -> f64 {
    1.0 + (0.5 - 2.0 * articulation.cos()).tanh()
}

/// Unclamped straightening interest summed over all hitches.
pub fn straightening_interest(state: &HavState) -> f64 {
    state
        .articulation_angles()
        .enumerate()
        .map(|(k, delta)| ((k + 1) as f64).powf(-0.2) * straightening_term(delta))
        .sum()
}

/// Interest on the zero-steering column only, clamped to 1.
pub fn straightening_attraction(state: &HavState, grid: &ActionGrid) -> ContextMap {
    let value = straightening_interest(state).clamp(0.0, 1.0);
    let mut map = ContextMap::zeros(MapKind::Interest, grid);
    let col = grid.straight_column();
    for v in 0..grid.speeds().len() {
        map.set(v, col, value);
    }
    map
}

/// Truck rear-axle positions (relative to the current one) after each Euler
/// step of a constant action, until `distance` has been covered. The last
/// step is shortened to land exactly on `distance`. Zero speed yields no
/// points.
pub fn rollout(heading: f64, config: &HavConfig, action: Action, dt: f64, distance: f64, mut visit: impl FnMut(f64, Vec2)) {
    let ds = action.speed * dt;
    if !(ds > 0.0) {
        return;
    }
    let curvature = action.steer.tan() / config.truck_wheelbase;
    // constant heading increment per full step: rotate the direction vector
    // instead of re-evaluating trigonometry
    let turn = Vec2::from_angle(curvature * ds);
    let mut dir = Vec2::from_angle(heading);
    let mut pos = Vec2::ZERO;
    let mut travelled = 0.0;
    while travelled < distance {
        let step = ds.min(distance - travelled);
        pos += dir * step;
        travelled += step;
        visit(travelled, pos);
        if step < ds {
            break;
        }
        dir = Vec2::new(dir.x * turn.x - dir.y * turn.y, dir.x * turn.y + dir.y * turn.x);
    }
}

fn gap(world: &TorusWorld, rel_neighbor: Vec2, displacement: Vec2, combined: f64) -> f64 {
    world.min_image(rel_neighbor - displacement).norm() - combined
}

/// Number of neighbors the action would bring inside the combined footprint
/// distance (plus margin) at some point of the short lookahead.
pub fn collision_danger(
    state: &HavState,
    config: &HavConfig,
    world: &TorusWorld,
    neighbors: &[NeighborObservation],
    action: Action,
    dt: f64,
    params: &BehaviorParams,
) -> f64 {
    if neighbors.is_empty() {
        return 0.0;
    }
    let own = config.footprint_radius();
    let mut min_gap = vec![f64::INFINITY; neighbors.len()];
    let mut any = false;
    rollout(state.truck_heading, config, action, dt, params.collision_lookahead, |_, d| {
        any = true;
        for (g, n) in min_gap.iter_mut().zip(neighbors) {
            *g = g.min(gap(world, n.relative_position, d, own + n.footprint_radius));
        }
    });
    if !any {
        for (g, n) in min_gap.iter_mut().zip(neighbors) {
            *g = gap(world, n.relative_position, Vec2::ZERO, own + n.footprint_radius);
        }
    }
    min_gap.iter().filter(|&&g| g < params.collision_margin).count() as f64
}

pub fn collision_prevention(
    state: &HavState,
    config: &HavConfig,
    world: &TorusWorld,
    neighbors: &[NeighborObservation],
    grid: &ActionGrid,
    dt: f64,
    params: &BehaviorParams,
) -> ContextMap {
    ContextMap::from_fn(MapKind::Danger, grid, |a| collision_danger(state, config, world, neighbors, a, dt, params))
}

/// Separation penalty for one neighbor at gap `g`.
pub fn separation_penalty(g: f64, params: &BehaviorParams) -> f64 {
    if g < 0.0 {
        1.0
    } else if g < params.evade_bound {
        (1.0 - g / params.evade_bound).powf(params.evade_exponent)
    } else {
        0.0
    }
}

pub fn evade_attraction(
    state: &HavState,
    config: &HavConfig,
    world: &TorusWorld,
    neighbors: &[NeighborObservation],
    grid: &ActionGrid,
    dt: f64,
    params: &BehaviorParams,
) -> ContextMap {
    if neighbors.is_empty() {
        return ContextMap::filled(MapKind::Interest, grid.shape(), 1.0);
    }
    let own = config.footprint_radius();
    ContextMap::from_fn(MapKind::Interest, grid, |a| {
        let mut end = Vec2::ZERO;
        rollout(state.truck_heading, config, a, dt, params.evade_lookahead, |_, d| end = d);
        let penalty: f64 = neighbors
            .iter()
            .map(|n| separation_penalty(gap(world, n.relative_position, end, own + n.footprint_radius), params))
            .sum();
        (1.0 - penalty).max(0.0)
    })
}

/// Interest on every moving action that grows while the vehicle stands still.
pub fn progress_attraction(standstill_steps: u32, grid: &ActionGrid, params: &BehaviorParams) -> ContextMap {
    let level = (standstill_steps / params.progress_period.max(1)) as f64 * params.progress_increment;
    let value = level.min(1.0);
    ContextMap::from_fn(MapKind::Interest, grid, |a| if a.speed > 0.0 { value } else { 0.0 })
}
