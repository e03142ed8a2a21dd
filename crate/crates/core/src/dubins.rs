//! Shortest bounded-curvature paths between oriented points, plus the sampling
//! and nearest-point queries the path follower needs.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Pose, Vec2};

/// Arc-length spacing of path samples.
pub const DEFAULT_SAMPLE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Word {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl Word {
    pub const ALL: [Word; 6] = [Word::Lsl, Word::Rsr, Word::Lsr, Word::Rsl, Word::Rlr, Word::Lrl];

    pub fn segments(self) -> [Segment; 3] {
        use Segment::*;
        match self {
            Word::Lsl => [Left, Straight, Left],
            Word::Rsr => [Right, Straight, Right],
            Word::Lsr => [Left, Straight, Right],
            Word::Rsl => [Right, Straight, Left],
            Word::Rlr => [Right, Left, Right],
            Word::Lrl => [Left, Right, Left],
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Word::Lsl => "LSL",
            Word::Rsr => "RSR",
            Word::Lsr => "LSR",
            Word::Rsl => "RSL",
            Word::Rlr => "RLR",
            Word::Lrl => "LRL",
        };
        f.write_str(s)
    }
}

fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub word: Word,
    /// Segment lengths in metres.
    pub segment_lengths: [f64; 3],
    pub radius: f64,
    pub start: Pose,
    pub goal: Pose,
}

/// Normalised segment parameters (arc angles in radians, straight in radii)
/// for one word, or `None` when the word has no solution.
fn word_params(word: Word, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let c_ab = (alpha - beta).cos();
    match word {
        Word::Lsl => {
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p_sq < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(tmp - alpha), p_sq.sqrt(), mod2pi(beta - tmp)])
        }
        Word::Rsr => {
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p_sq < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p_sq.sqrt(), mod2pi(tmp - beta)])
        }
        Word::Lsr => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - alpha), p, mod2pi(tmp - beta)])
        }
        Word::Rsl => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        Word::Rlr => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d - sa + sb);
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(alpha - phi + mod2pi(p / 2.0));
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        Word::Lrl => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d + sa - sb);
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(-alpha - phi + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + p)])
        }
    }
}

/// Pose reached after travelling `len` metres along one segment.
fn advance(pose: Pose, seg: Segment, len: f64, radius: f64) -> Pose {
    match seg {
        Segment::Straight => {
            let p = pose.position() + Vec2::from_angle(pose.heading) * len;
            Pose::with_position(p, pose.heading)
        }
        Segment::Left | Segment::Right => {
            let dir = if seg == Segment::Left { 1.0 } else { -1.0 };
            let normal = Vec2::from_angle(pose.heading + dir * FRAC_PI_2);
            let center = pose.position() + normal * radius;
            let heading = pose.heading + dir * len / radius;
            let p = center - Vec2::from_angle(heading + dir * FRAC_PI_2) * radius;
            Pose::with_position(p, heading)
        }
    }
}

impl DubinsPath {
    /// All feasible words between two poses, in `Word::ALL` order.
    pub fn candidates(start: Pose, goal: Pose, radius: f64) -> Vec<DubinsPath> {
        assert!(radius > 0.0, "turning radius must be positive");
        let dx = goal.x - start.x;
        let dy = goal.y - start.y;
        let d = dx.hypot(dy) / radius;
        let theta = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
        let alpha = mod2pi(start.heading - theta);
        let beta = mod2pi(goal.heading - theta);
        Word::ALL
            .iter()
            .filter_map(|&word| {
                word_params(word, alpha, beta, d).map(|p| DubinsPath {
                    word,
                    segment_lengths: [p[0] * radius, p[1] * radius, p[2] * radius],
                    radius,
                    start,
                    goal,
                })
            })
            .collect()
    }

    /// Shortest path over all six words.
    pub fn plan(start: Pose, goal: Pose, radius: f64) -> DubinsPath {
        let dist = start.position().distance(goal.position());
        if dist < 1e-9 && wrap_angle(goal.heading - start.heading).abs() < 1e-9 {
            return DubinsPath { word: Word::Lsl, segment_lengths: [0.0; 3], radius, start, goal };
        }
        Self::candidates(start, goal, radius)
            .into_iter()
            .min_by(|a, b| a.length().total_cmp(&b.length()))
            .expect("a CSC word always exists for distinct poses")
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Pose at arc length `s`, clamped to the path.
    pub fn pose_at(&self, s: f64) -> Pose {
        let mut remaining = s.clamp(0.0, self.length());
        let mut pose = self.start;
        for (seg, &len) in self.word.segments().iter().zip(&self.segment_lengths) {
            let l = remaining.min(len);
            pose = advance(pose, *seg, l, self.radius);
            remaining -= l;
            if remaining <= 0.0 {
                break;
            }
        }
        pose.heading = wrap_angle(pose.heading);
        pose
    }

    /// Evenly spaced samples with spacing at most `step`, both ends included.
    pub fn sample(&self, step: f64) -> Vec<PathSample> {
        assert!(step > 0.0, "sample step must be positive");
        let len = self.length();
        let n = ((len / step).ceil() as usize).max(1);
        let mut out = Vec::with_capacity(n + 1);
        // walk segment by segment so each sample costs one trig evaluation
        let segs = self.word.segments();
        let mut seg_idx = 0;
        let mut seg_start_s = 0.0;
        let mut seg_start_pose = self.start;
        for i in 0..=n {
            let s = if i == n { len } else { len * i as f64 / n as f64 };
            while seg_idx < 2 && s > seg_start_s + self.segment_lengths[seg_idx] {
                seg_start_pose = advance(seg_start_pose, segs[seg_idx], self.segment_lengths[seg_idx], self.radius);
                seg_start_s += self.segment_lengths[seg_idx];
                seg_idx += 1;
            }
            let local = (s - seg_start_s).clamp(0.0, self.segment_lengths[seg_idx]);
            let pose = advance(seg_start_pose, segs[seg_idx], local, self.radius);
            out.push(PathSample { position: pose.position(), heading: wrap_angle(pose.heading), s });
        }
        if len > 0.0 {
            // land exactly on the requested goal
            let last = out.last_mut().expect("non-empty");
            last.position = self.goal.position();
            last.heading = wrap_angle(self.goal.heading);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub position: Vec2,
    pub heading: f64,
    /// Arc length from the path start.
    pub s: f64,
}

/// Index of the sample nearest to `position` (earliest on ties) and of the
/// sample `lookahead` metres further along, clamped to the last sample.
pub fn nearest_and_lookahead_indices(samples: &[PathSample], position: Vec2, lookahead: f64) -> (usize, usize) {
    nearest_and_lookahead_from(samples, position, lookahead, 0, f64::INFINITY)
}

/// Same query restricted to samples between `from` and `window` metres past
/// it, so progress along self-overlapping paths never jumps back.
pub fn nearest_and_lookahead_from(samples: &[PathSample], position: Vec2, lookahead: f64, from: usize, window: f64) -> (usize, usize) {
    assert!(!samples.is_empty(), "no path samples");
    let from = from.min(samples.len() - 1);
    let limit = samples[from].s + window;
    let mut best = from;
    let mut best_d = f64::INFINITY;
    for (i, smp) in samples.iter().enumerate().skip(from) {
        if smp.s > limit {
            break;
        }
        let d = (smp.position - position).norm_sq();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let target = samples[best].s + lookahead;
    let ahead = samples[best..]
        .iter()
        .position(|smp| smp.s >= target - 1e-9)
        .map_or(samples.len() - 1, |k| best + k);
    (best, ahead)
}

pub fn nearest_and_lookahead(samples: &[PathSample], position: Vec2, lookahead: f64) -> (PathSample, PathSample) {
    let (n, l) = nearest_and_lookahead_indices(samples, position, lookahead);
    (samples[n], samples[l])
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn straight_path() {
        let p = DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(10.0, 0.0, 0.0), 2.0);
        assert_relative_eq!(p.length(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(p.segment_lengths[1], 10.0, epsilon = 1e-12);
        let samples = p.sample(1.0);
        assert_eq!(samples.len(), 11);
        assert!(samples.iter().all(|s| s.heading.abs() < 1e-12));
    }

    #[test]
    fn half_circle() {
        let p = DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(0.0, 4.0, PI), 2.0);
        assert_relative_eq!(p.length(), 2.0 * PI, epsilon = 1e-9);
        let quarter = p.pose_at(PI * 2.0 / 2.0);
        assert_relative_eq!(quarter.heading, FRAC_PI_2, epsilon = 1e-9);
        assert_relative_eq!(quarter.x, 2.0, epsilon = 1e-9);
        assert_relative_eq!(quarter.y, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn coincident_poses_give_empty_path() {
        let a = Pose::new(3.0, 4.0, 1.0);
        let p = DubinsPath::plan(a, a, 5.0);
        assert_eq!(p.length(), 0.0);
        let s = p.sample(0.1);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].position, a.position());
    }

    #[test]
    fn endpoint_sample_is_goal() {
        let goal = Pose::new(-7.0, 3.0, 2.0);
        let p = DubinsPath::plan(Pose::new(1.0, 1.0, -0.4), goal, 3.0);
        let s = p.sample(0.1);
        let last = s.last().unwrap();
        assert_relative_eq!(last.position.x, goal.x, epsilon = 1e-6);
        assert_relative_eq!(last.position.y, goal.y, epsilon = 1e-6);
        assert_relative_eq!(last.heading, goal.heading, epsilon = 1e-6);
        // the analytic endpoint agrees with the snapped one
        let end = p.pose_at(p.length());
        assert!(end.position().distance(goal.position()) < 1e-6);
    }

    #[test]
    fn lookahead_queries() {
        let p = DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(10.0, 0.0, 0.0), 2.0);
        let samples = p.sample(0.1);
        let (n, l) = nearest_and_lookahead(&samples, Vec2::new(3.0, 0.0), 0.8);
        assert_relative_eq!(n.s, 3.0, epsilon = 1e-9);
        assert_relative_eq!(l.s, 3.8, epsilon = 1e-9);
        let (n, l) = nearest_and_lookahead(&samples, Vec2::new(25.0, 1.0), 0.8);
        assert_eq!(n.s, 10.0);
        assert_eq!(l.s, 10.0);
        // equidistant between the samples at 3.0 and 3.1
        let (i, _) = nearest_and_lookahead_indices(&samples, Vec2::new(3.05, 0.5), 0.0);
        let brute = samples
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, smp)| {
                let d = (smp.position - Vec2::new(3.05, 0.5)).norm_sq();
                if d < acc.1 { (k, d) } else { acc }
            })
            .0;
        assert_eq!(i, brute);
        assert_eq!(samples[i].s, 3.0);
    }

    proptest! {
        #[test]
        fn plan_is_min_over_words_and_rigid_invariant(
            sx in -20.0f64..20.0, sy in -20.0f64..20.0, sh in -PI..PI,
            gx in -20.0f64..20.0, gy in -20.0f64..20.0, gh in -PI..PI,
            r in 0.5f64..10.0, rot in -PI..PI, tx in -50.0f64..50.0, ty in -50.0f64..50.0,
        ) {
            let start = Pose::new(sx, sy, sh);
            let goal = Pose::new(gx, gy, gh);
            let best = DubinsPath::plan(start, goal, r);
            for c in DubinsPath::candidates(start, goal, r) {
                prop_assert!(best.length() <= c.length() + 1e-12);
            }
            let straight = start.position().distance(goal.position());
            prop_assert!(best.length() >= straight - 1e-9);

            let tf = |p: Pose| {
                let v = Vec2::from_angle(rot) * p.x + Vec2::from_angle(rot + FRAC_PI_2) * p.y;
                Pose::new(v.x + tx, v.y + ty, p.heading + rot)
            };
            let moved = DubinsPath::plan(tf(start), tf(goal), r);
            prop_assert!((moved.length() - best.length()).abs() < 1e-9 * (1.0 + best.length()));
        }

        #[test]
        fn samples_are_ordered_and_dense(
            gx in -20.0f64..20.0, gy in -20.0f64..20.0, gh in -PI..PI, step in 0.05f64..2.0,
        ) {
            let p = DubinsPath::plan(Pose::new(0.0, 0.0, 0.0), Pose::new(gx, gy, gh), 3.0);
            let s = p.sample(step);
            for w in s.windows(2) {
                prop_assert!(w[1].s >= w[0].s);
                prop_assert!(w[1].s - w[0].s <= step + 1e-12);
                prop_assert!(w[0].position.distance(w[1].position) <= step + 1e-9);
            }
            prop_assert!(s.last().unwrap().position.distance(Vec2::new(gx, gy)) < 1e-6);
        }
    }
}
