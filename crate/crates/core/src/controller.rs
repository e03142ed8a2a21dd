//! Path-following steering: pure-pursuit feed-forward plus Stanley cross-track
//! correction, and the deviation test that triggers replanning.

use serde::{Deserialize, Serialize};

use crate::dubins::{nearest_and_lookahead_from, PathSample};
use crate::geometry::{angle_diff, Pose};
use crate::model::HavConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Lookahead distance as a multiple of the truck wheelbase.
    pub lookahead_factor: f64,
    pub cross_track_gain: f64,
    /// Cross-track error above which the path is replanned.
    pub replan_threshold: f64,
    /// Arc length ahead of the last nearest sample searched for the next one.
    pub search_window: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self { lookahead_factor: 0.2, cross_track_gain: 2.0, replan_threshold: 0.8, search_window: 4.0 }
    }
}

impl ControllerParams {
    pub fn lookahead_distance(&self, config: &HavConfig) -> f64 {
        self.lookahead_factor * config.truck_wheelbase
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingErrors {
    /// Wrapped lookahead-tangent heading minus truck heading.
    pub heading_error: f64,
    /// Distance from the truck rear axle to the nearest sample.
    pub cross_track_error: f64,
    /// Cross-track error carrying the sign of the steering needed to return
    /// to the path (positive: steer left).
    pub signed_cross_track_error: f64,
    /// Index of the nearest sample; the next query starts here.
    pub nearest: usize,
}

/// Errors against `samples`, searching forward from the sample index `progress`.
pub fn tracking_errors(pose: Pose, samples: &[PathSample], progress: usize, params: &ControllerParams, config: &HavConfig) -> TrackingErrors {
    let lookahead = params.lookahead_distance(config);
    let (nearest, ahead) = nearest_and_lookahead_from(samples, pose.position(), lookahead, progress, params.search_window);
    let near = samples[nearest];
    let offset = pose.position() - near.position;
    let e_p = offset.norm();
    let tangent = crate::geometry::Vec2::from_angle(near.heading);
    let side = tangent.cross(offset);
    let signed = if side > 0.0 { -e_p } else { e_p };
    TrackingErrors {
        heading_error: angle_diff(samples[ahead].heading, pose.heading),
        cross_track_error: e_p,
        signed_cross_track_error: signed,
        nearest,
    }
}

/// Combined steering command, clamped to the vehicle's steering limit.
pub fn steering_command(errors: &TrackingErrors, config: &HavConfig, params: &ControllerParams) -> f64 {
    let l0 = config.truck_wheelbase;
    let lookahead = params.lookahead_distance(config);
    let pursuit = (2.0 * l0 * errors.heading_error / lookahead).atan();
    let stanley = (params.cross_track_gain * errors.signed_cross_track_error / config.max_speed).atan();
    (pursuit + stanley).clamp(-config.max_steer, config.max_steer)
}

pub fn needs_replan(errors: &TrackingErrors, params: &ControllerParams) -> bool {
    errors.cross_track_error > params.replan_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dubins::DubinsPath;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn straight_samples() -> Vec<PathSample> {
        DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(20.0, 0.0, 0.0), 5.0).sample(0.1)
    }

    fn cfg() -> HavConfig {
        HavConfig::new(4.0, vec![3.0])
    }

    #[test]
    fn errors_on_straight_path() {
        let s = straight_samples();
        let p = ControllerParams::default();
        let e = tracking_errors(Pose::new(5.0, 0.0, 0.0), &s, 40, &p, &cfg());
        assert_eq!((e.heading_error, e.cross_track_error), (0.0, 0.0));

        let e = tracking_errors(Pose::new(5.0, 1.0, 0.0), &s, 40, &p, &cfg());
        assert_relative_eq!(e.cross_track_error, 1.0, epsilon = 1e-12);
        assert_eq!(e.heading_error, 0.0);
        // left of the path: steer right
        assert_relative_eq!(e.signed_cross_track_error, -1.0, epsilon = 1e-12);
        let e = tracking_errors(Pose::new(5.0, -1.0, 0.0), &s, 40, &p, &cfg());
        assert_relative_eq!(e.signed_cross_track_error, 1.0, epsilon = 1e-12);

        let e = tracking_errors(Pose::new(5.0, 0.0, 0.3), &s, 40, &p, &cfg());
        assert_relative_eq!(e.heading_error, -0.3, epsilon = 1e-12);
    }

    #[test]
    fn progress_never_jumps_back_on_a_loop() {
        // almost a full circle: the end passes close to the start
        let path = DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(0.0, 0.5, 0.0), 5.0);
        let s = path.sample(0.1);
        assert!(path.length() > 25.0);
        let p = ControllerParams::default();
        let near_end = s.len() - 20;
        let e = tracking_errors(Pose::new(0.0, 0.3, 0.0), &s, near_end, &p, &cfg());
        assert!(e.nearest >= near_end);
        let e = tracking_errors(Pose::new(0.0, 0.3, 0.0), &s, 0, &p, &cfg());
        assert!(e.nearest < 10);
    }

    #[test]
    fn steering_components() {
        let c = cfg();
        let p = ControllerParams::default();
        assert_eq!(steering_command(&TrackingErrors::default(), &c, &p), 0.0);

        let mut wide = c.clone();
        wide.max_steer = std::f64::consts::FRAC_PI_2;
        let e = TrackingErrors { heading_error: 0.2, ..Default::default() };
        assert_relative_eq!(steering_command(&e, &wide, &p), 1.107149, epsilon = 1e-6);
        // clamped to 50 degrees with the default limit
        assert_relative_eq!(steering_command(&e, &c, &p), c.max_steer);

        let e = TrackingErrors { signed_cross_track_error: 1.0, cross_track_error: 1.0, ..Default::default() };
        assert_relative_eq!(steering_command(&e, &c, &p), 0.463648, epsilon = 1e-6);
    }

    #[test]
    fn replan_threshold_is_strict() {
        let p = ControllerParams::default();
        let e = |d| TrackingErrors { cross_track_error: d, ..Default::default() };
        assert!(!needs_replan(&e(0.5), &p));
        assert!(!needs_replan(&e(0.8), &p));
        assert!(needs_replan(&e(1.2), &p));
    }

    proptest! {
        #[test]
        fn steering_is_odd_and_bounded(eh in -3.0f64..3.0, ep in -5.0f64..5.0) {
            let c = cfg();
            let p = ControllerParams::default();
            let e = TrackingErrors { heading_error: eh, cross_track_error: ep.abs(), signed_cross_track_error: ep, nearest: 0 };
            let m = TrackingErrors { heading_error: -eh, cross_track_error: ep.abs(), signed_cross_track_error: -ep, nearest: 0 };
            let a = steering_command(&e, &c, &p);
            prop_assert!(a.abs() <= c.max_steer);
            prop_assert!((a + steering_command(&m, &c, &p)).abs() < 1e-12);
        }

        #[test]
        fn mirrored_pose_mirrors_command(x in 1.0f64..15.0, y in -2.0f64..2.0, h in -0.8f64..0.8) {
            let s = straight_samples();
            let c = cfg();
            let p = ControllerParams { search_window: f64::INFINITY, ..Default::default() };
            let a = steering_command(&tracking_errors(Pose::new(x, y, h), &s, 0, &p, &c), &c, &p);
            let b = steering_command(&tracking_errors(Pose::new(x, -y, -h), &s, 0, &p, &c), &c, &p);
            prop_assert!((a + b).abs() < 1e-9);
        }
    }
}
