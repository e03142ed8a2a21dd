//! Reference implementations used as independent oracles by the integration
//! and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use hav_swarm::geometry::{Pose, TorusWorld, Vec2};
use hav_swarm::model::HavConfig;
use hav_swarm::sim::Simulation;

pub mod dubins {
    use super::*;

    fn circle_center(p: Pose, turn: f64, r: f64) -> Vec2 {
        // turn = +1 for counter-clockwise, -1 for clockwise
        Vec2::new(p.x - turn * r * p.heading.sin(), p.y + turn * r * p.heading.cos())
    }

    fn ccw_angle(a: f64) -> f64 {
        let r = a.rem_euclid(TAU);
        if TAU - r < 1e-12 {
            0.0
        } else {
            r
        }
    }

    /// Integrates (turn, length) segments exactly from `start`.
    pub fn drive(start: Pose, segments: &[(f64, f64)], r: f64) -> Pose {
        let mut p = start;
        for &(turn, len) in segments {
            if turn == 0.0 {
                p.x += len * p.heading.cos();
                p.y += len * p.heading.sin();
            } else {
                let c = circle_center(p, turn, r);
                let h = p.heading + turn * len / r;
                p = Pose { x: c.x + turn * r * h.sin(), y: c.y - turn * r * h.cos(), heading: h };
            }
        }
        p
    }

    fn closes(start: Pose, goal: Pose, segments: &[(f64, f64)], r: f64) -> bool {
        let e = drive(start, segments, r);
        let dh = (e.heading - goal.heading).sin().abs() + (1.0 - (e.heading - goal.heading).cos());
        (e.x - goal.x).hypot(e.y - goal.y) < 1e-6 * r.max(1.0) && dh < 1e-9
    }

    /// Shortest length among all tangent-construction candidates for one
    /// three-letter word, each verified by forward integration. Letters are
    /// +1 (left), 0 (straight), -1 (right).
    pub fn word_length(start: Pose, goal: Pose, r: f64, word: [f64; 3]) -> Option<f64> {
        let c1 = circle_center(start, word[0], r);
        let c2 = circle_center(goal, word[2], r);
        let dc = c2 - c1;
        let dist = dc.norm();
        let base = dc.y.atan2(dc.x);
        let mut best: Option<f64> = None;
        let mut consider = |segs: [(f64, f64); 3]| {
            if segs.iter().all(|s| s.1 >= -1e-12) && closes(start, goal, &segs, r) {
                let len: f64 = segs.iter().map(|s| s.1).sum();
                best = Some(best.map_or(len, |b: f64| b.min(len)));
            }
        };
        if word[1] == 0.0 {
            let mut psis = vec![base];
            if word[0] != word[2] && dist >= 2.0 * r {
                let a = (2.0 * r / dist).asin();
                psis.extend([base + a, base - a]);
            }
            for psi in psis {
                let a1 = ccw_angle(word[0] * (psi - start.heading)) * r;
                let a3 = ccw_angle(word[2] * (goal.heading - psi)) * r;
                let t1 = drive(start, &[(word[0], a1)], r);
                // the last arc traced backwards from the goal
                let back = drive(Pose { heading: goal.heading + PI, ..goal }, &[(-word[2], a3)], r);
                let t2p = Vec2::new(back.x, back.y);
                let s = (t2p - t1.position()).dot(Vec2::from_angle(psi));
                consider([(word[0], a1), (0.0, s), (word[2], a3)]);
            }
        } else {
            if dist > 4.0 * r || dist < 1e-12 {
                return None;
            }
            let mid = (c1 + c2) * 0.5;
            let h = (4.0 * r * r - dist * dist / 4.0).max(0.0).sqrt();
            let n = Vec2::new(-dc.y, dc.x) * (1.0 / dist);
            for sign in [1.0, -1.0] {
                let c3 = mid + n * (sign * h);
                let q1 = (c1 + c3) * 0.5;
                let q2 = (c3 + c2) * 0.5;
                let h1 = (q1 - c1).y.atan2((q1 - c1).x) + word[0] * FRAC_PI_2;
                let h2 = (q2 - c3).y.atan2((q2 - c3).x) + word[1] * FRAC_PI_2;
                let a1 = ccw_angle(word[0] * (h1 - start.heading)) * r;
                let a2 = ccw_angle(word[1] * (h2 - h1)) * r;
                let a3 = ccw_angle(word[2] * (goal.heading - h2)) * r;
                consider([(word[0], a1), (word[1], a2), (word[2], a3)]);
            }
        }
        best
    }

    pub const WORDS: [[f64; 3]; 6] = [
        [1.0, 0.0, 1.0],
        [-1.0, 0.0, -1.0],
        [1.0, 0.0, -1.0],
        [-1.0, 0.0, 1.0],
        [-1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
    ];

    /// Minimum over the six words.
    pub fn shortest(start: Pose, goal: Pose, r: f64) -> f64 {
        WORDS
            .iter()
            .filter_map(|&w| word_length(start, goal, r, w))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Not-a-knot cubic spline basis at unit spacing on `n` points: the cubic
/// monomials plus truncated cubes at the knots 2..n-3 (the knots next to the
/// ends are removed, which is the not-a-knot condition).
/// Coordinates are rescaled to [0, 1] to keep the joint solve well conditioned.
fn spline_basis(n: usize, x: f64) -> Vec<f64> {
    let h = (n - 1) as f64;
    let u = x / h;
    let mut b = vec![1.0, u, u * u, u * u * u];
    b.extend((2..n - 2).map(|k| (u - k as f64 / h).max(0.0).powi(3)));
    b
}

fn gauss_solve(n: usize, a: &mut [f64], b: &mut [f64]) {
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).unwrap()).unwrap();
        for k in 0..n {
            a.swap(c * n + k, p * n + k);
        }
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r * n + c] / a[c * n + c];
                for k in 0..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    for r in 0..n {
        b[r] /= a[r * n + r];
    }
}

/// Two-dimensional reference interpolation: a tensor-product not-a-knot
/// spline fitted by one joint solve over all support points (or bilinear
/// when either axis has fewer than four points).
pub fn reference_upsample(values: &[f64], shape: (usize, usize), target: (usize, usize)) -> Vec<f64> {
    let (rows, cols) = shape;
    let coord = |p: usize, n_src: usize, n_dst: usize| p as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64;
    let mut out = Vec::with_capacity(target.0 * target.1);
    if rows < 4 || cols < 4 {
        let at = |r: usize, c: usize| values[r * cols + c];
        for p in 0..target.0 {
            let u = coord(p, rows, target.0);
            let i = (u.floor() as usize).min(rows - 2);
            let s = u - i as f64;
            for q in 0..target.1 {
                let v = coord(q, cols, target.1);
                let j = (v.floor() as usize).min(cols - 2);
                let t = v - j as f64;
                out.push(
                    (1.0 - s) * (1.0 - t) * at(i, j) + (1.0 - s) * t * at(i, j + 1) + s * (1.0 - t) * at(i + 1, j) + s * t * at(i + 1, j + 1),
                );
            }
        }
        return out;
    }
    let n = rows * cols;
    let mut a = vec![0.0; n * n];
    for r in 0..rows {
        let br = spline_basis(rows, r as f64);
        for c in 0..cols {
            let bc = spline_basis(cols, c as f64);
            for (k, x) in br.iter().enumerate() {
                for (l, y) in bc.iter().enumerate() {
                    a[(r * cols + c) * n + k * cols + l] = x * y;
                }
            }
        }
    }
    let mut coef = values.to_vec();
    gauss_solve(n, &mut a, &mut coef);
    for p in 0..target.0 {
        let br = spline_basis(rows, coord(p, rows, target.0));
        for q in 0..target.1 {
            let bc = spline_basis(cols, coord(q, cols, target.1));
            let mut v = 0.0;
            for (k, x) in br.iter().enumerate() {
                for (l, y) in bc.iter().enumerate() {
                    v += coef[k * cols + l] * x * y;
                }
            }
            out.push(v);
        }
    }
    out
}

/// Closed-form steady-state articulation angles under constant steering:
/// each trailer axle circles at `R_j = sqrt(R_{j-1}^2 - l_j^2)` and trails its
/// predecessor by `asin(l_j / R_{j-1})`.
pub fn steady_articulation(config: &HavConfig, steer: f64) -> Vec<f64> {
    let mut radius = config.truck_wheelbase / steer.tan().abs();
    let sign = -steer.signum();
    config
        .trailer_wheelbases
        .iter()
        .map(|&l| {
            let delta = (l / radius).asin();
            radius = (radius * radius - l * l).sqrt();
            sign * delta
        })
        .collect()
}

/// Independent safety scan of the committed state: no hitch beyond a right
/// angle and no overlapping footprints under the minimal image.
pub fn safety_violations(sim: &Simulation) -> Vec<String> {
    let world: &TorusWorld = sim.world();
    let agents = sim.agents();
    let mut out = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        let mut prev = a.state.truck_heading;
        for &h in &a.state.trailer_headings {
            let d = (h - prev).sin().atan2((h - prev).cos());
            if d.abs() > FRAC_PI_2 {
                out.push(format!("vehicle {i} hitch {d}"));
            }
            prev = h;
        }
    }
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            let ri = footprint(&agents[i].config);
            let rj = footprint(&agents[j].config);
            let mut d = agents[j].state.position - agents[i].state.position;
            let e = world.edge();
            d.x -= e * (d.x / e).round();
            d.y -= e * (d.y / e).round();
            if d.norm() < ri + rj {
                out.push(format!("vehicles {i},{j} overlap at distance {}", d.norm()));
            }
        }
    }
    out
}

pub fn footprint(c: &HavConfig) -> f64 {
    c.truck_wheelbase.max(c.trailer_wheelbases.iter().sum())
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut m = k;
            while m + 1 < idx.len() && v[idx[m + 1]] == v[idx[k]] {
                m += 1;
            }
            let avg = (k + m) as f64 / 2.0 + 1.0;
            for &i in &idx[k..=m] {
                r[i] = avg;
            }
            k = m + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
