//! Context maps over the discrete (speed, steering) action grid, danger
//! masking, weighted interest merging and interpolated action selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, HavConfig};

/// Discrete action axes. Both axes include their endpoints; the steering axis
/// always has an odd number of values so that straight driving is on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    speeds: Vec<f64>,
    steers: Vec<f64>,
    min_speed: f64,
    max_speed: f64,
    max_steer: f64,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

impl ActionGrid {
    pub fn new(n_speed: usize, n_steer: usize, min_speed: f64, max_speed: f64, max_steer: f64) -> Result<Self> {
        if n_speed < 2 {
            return Err(Error::InvalidParameter(format!("speed resolution {n_speed} < 2")));
        }
        if n_steer < 3 || n_steer % 2 == 0 {
            return Err(Error::InvalidParameter(format!("steering resolution {n_steer} must be odd and >= 3")));
        }
        if !(min_speed >= 0.0 && max_speed > min_speed) || !(max_steer > 0.0) {
            return Err(Error::InvalidParameter("degenerate action bounds".into()));
        }
        let mut steers = linspace(-max_steer, max_steer, n_steer);
        steers[n_steer / 2] = 0.0;
        Ok(Self { speeds: linspace(min_speed, max_speed, n_speed), steers, min_speed, max_speed, max_steer })
    }

    pub fn for_vehicle(config: &HavConfig, n_speed: usize, n_steer: usize) -> Result<Self> {
        Self::new(n_speed, n_steer, config.min_speed, config.max_speed, config.max_steer)
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn steers(&self) -> &[f64] {
        &self.steers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.speeds.len(), self.steers.len())
    }

    pub fn len(&self) -> usize {
        self.speeds.len() * self.steers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column index of the zero-steering action.
    pub fn straight_column(&self) -> usize {
        self.steers.len() / 2
    }

    pub fn action(&self, speed_idx: usize, steer_idx: usize) -> Action {
        Action::new(self.speeds[speed_idx], self.steers[steer_idx])
    }

    /// All actions in row-major (speed, steer) order.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.speeds.iter().flat_map(move |&v| self.steers.iter().map(move |&s| Action::new(v, s)))
    }

    pub fn min_speed(&self) -> f64 {
        self.min_speed
    }

    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn max_steer(&self) -> f64 {
        self.max_steer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Interest,
    Danger,
}

/// Values over an action grid, stored row-major with speed as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMap {
    pub kind: MapKind,
    shape: (usize, usize),
    values: Vec<f64>,
}

impl ContextMap {
    pub fn filled(kind: MapKind, shape: (usize, usize), value: f64) -> Self {
        Self { kind, shape, values: vec![value; shape.0 * shape.1] }
    }

    pub fn zeros(kind: MapKind, grid: &ActionGrid) -> Self {
        Self::filled(kind, grid.shape(), 0.0)
    }

    pub fn from_values(kind: MapKind, shape: (usize, usize), values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.0 * shape.1 {
            return Err(Error::ShapeMismatch { expected: shape, got: (values.len(), 1) });
        }
        Ok(Self { kind, shape, values })
    }

    /// Evaluates `f` at every grid action.
    pub fn from_fn(kind: MapKind, grid: &ActionGrid, mut f: impl FnMut(Action) -> f64) -> Self {
        let values = grid.actions().map(&mut f).collect();
        Self { kind, shape: grid.shape(), values }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, speed_idx: usize, steer_idx: usize) -> f64 {
        self.values[speed_idx * self.shape.1 + steer_idx]
    }

    pub fn set(&mut self, speed_idx: usize, steer_idx: usize, value: f64) {
        self.values[speed_idx * self.shape.1 + steer_idx] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeParams {
    pub danger_threshold: f64,
    pub interp_speed: usize,
    pub interp_steer: usize,
    pub goal_weight: f64,
    pub straightening_weight: f64,
    pub progress_weight: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            danger_threshold: 0.1,
            interp_speed: 20,
            interp_steer: 40,
            goal_weight: 1.0,
            straightening_weight: 0.15,
            progress_weight: 1.0,
        }
    }
}

/// Solves the dense system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap_or(col);
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * b[k]).sum();
        b[row] = (b[row] - tail) / a[row * n + row];
    }
    b
}

/// Second derivatives of the not-a-knot cubic spline through `y` at unit
/// spacing. Needs at least four points.
fn spline_curvatures(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    // third derivative continuous across the second and the second-to-last knot
    a[0] = 1.0;
    a[1] = -2.0;
    a[2] = 1.0;
    for i in 1..n - 1 {
        a[i * n + i - 1] = 1.0;
        a[i * n + i] = 4.0;
        a[i * n + i + 1] = 1.0;
        rhs[i] = 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
    }
    a[(n - 1) * n + n - 3] = 1.0;
    a[(n - 1) * n + n - 2] = -2.0;
    a[(n - 1) * n + n - 1] = 1.0;
    solve(a, rhs)
}

/// Dense `n_dst x n_src` interpolation weights along one axis: not-a-knot
/// cubic spline or piecewise linear. Endpoints map onto endpoints.
fn axis_weights(n_src: usize, n_dst: usize, cubic: bool) -> Vec<f64> {
    let last = n_src - 1;
    let mut w = vec![0.0; n_dst * n_src];
    for j in 0..n_src {
        let mut y = vec![0.0; n_src];
        y[j] = 1.0;
        let m = if cubic { spline_curvatures(&y) } else { vec![0.0; n_src] };
        for p in 0..n_dst {
            let u = if n_dst == 1 { 0.0 } else { p as f64 * last as f64 / (n_dst - 1) as f64 };
            let i = (u.floor() as usize).min(last - 1);
            let t = u - i as f64;
            let s = 1.0 - t;
            w[p * n_src + j] = s * y[i] + t * y[i + 1] + ((s * s * s - s) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0;
        }
    }
    w
}

/// Separable upsampling: not-a-knot cubic spline when both axes have at
/// least four support points, bilinear otherwise. Exact at support points.
pub fn upsample(values: &[f64], shape: (usize, usize), target: (usize, usize)) -> Vec<f64> {
    let (rows, cols) = shape;
    assert_eq!(values.len(), rows * cols, "values do not match shape");
    assert!(rows >= 2 && cols >= 2 && target.0 >= rows && target.1 >= cols, "bad upsampling shape");
    let cubic = rows >= 4 && cols >= 4;
    let wr = axis_weights(rows, target.0, cubic);
    let wc = axis_weights(cols, target.1, cubic);

    // along the steering axis first
    let mut tmp = vec![0.0; rows * target.1];
    for r in 0..rows {
        let src = &values[r * cols..(r + 1) * cols];
        for q in 0..target.1 {
            tmp[r * target.1 + q] = wc[q * cols..(q + 1) * cols].iter().zip(src).map(|(w, v)| w * v).sum();
        }
    }
    let mut out = vec![0.0; target.0 * target.1];
    for p in 0..target.0 {
        for q in 0..target.1 {
            out[p * target.1 + q] = (0..rows).map(|r| wr[p * rows + r] * tmp[r * target.1 + q]).sum();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: Action,
    /// Every grid action was blocked and the vehicle stands still.
    pub all_blocked: bool,
    pub blocked_fraction: f64,
    /// Block mask over the grid, row-major (speed, steer).
    pub blocked: Vec<bool>,
    /// Upsampled filtered interest, row-major (speed, steer).
    pub upsampled: Vec<f64>,
    pub upsampled_shape: (usize, usize),
    /// Upsampled index of the chosen action, if one was chosen.
    pub chosen: Option<usize>,
    admissible: Vec<bool>,
    bounds: (f64, f64, f64),
}

impl Selection {
    pub fn action_at(&self, idx: usize) -> Action {
        let (tv, tp) = self.upsampled_shape;
        let (vmin, vmax, smax) = self.bounds;
        let (p, q) = (idx / tp, idx % tp);
        let speed = vmin + p as f64 / (tv - 1) as f64 * (vmax - vmin);
        let steer = -smax + q as f64 / (tp - 1) as f64 * (2.0 * smax);
        Action::new(speed, steer)
    }

    /// Whether upsampled cell `idx` may be chosen (its nearest grid action is unblocked).
    pub fn is_admissible(&self, idx: usize) -> bool {
        self.admissible.get(idx).copied().unwrap_or(false)
    }

    /// Every grid action with positive speed is blocked.
    pub fn moving_blocked(&self, grid: &ActionGrid) -> bool {
        let n_steer = grid.shape().1;
        grid.speeds()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .all(|(p, _)| self.blocked[p * n_steer..(p + 1) * n_steer].iter().all(|&b| b))
    }

    /// Admissible upsampled candidates with positive interest, best first.
    pub fn ranked_candidates(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.upsampled.len())
            .filter(|&i| self.admissible[i] && self.upsampled[i] > 0.0)
            .collect();
        idx.sort_by(|&a, &b| compare_candidates(self, b, a));
        idx
    }
}

/// Orders two upsampled cells: higher interest, then higher speed, then
/// smaller steering magnitude, then lower steering index.
fn compare_candidates(sel: &Selection, a: usize, b: usize) -> std::cmp::Ordering {
    let tp = sel.upsampled_shape.1;
    let centre = (tp - 1) as f64 / 2.0;
    let key = |i: usize| {
        let (p, q) = (i / tp, i % tp);
        (p, -((q as f64 - centre).abs()), -(q as f64))
    };
    let (ka, kb) = (key(a), key(b));
    sel.upsampled[a]
        .total_cmp(&sel.upsampled[b])
        .then(ka.0.cmp(&kb.0))
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
}

/// Merges interest and danger maps and picks the executable action.
///
/// Blocked cells (any danger above the threshold) are zeroed before
/// upsampling. Only upsampled points whose nearest grid action is unblocked
/// and whose interest is positive can be chosen; with nothing admissible the
/// vehicle stands still.
pub fn merge_and_select(
    interests: &[(&ContextMap, f64)],
    dangers: &[&ContextMap],
    grid: &ActionGrid,
    params: &MergeParams,
) -> Result<Selection> {
    let shape = grid.shape();
    for m in interests.iter().map(|(m, _)| *m).chain(dangers.iter().copied()) {
        if m.shape != shape {
            return Err(Error::ShapeMismatch { expected: shape, got: m.shape });
        }
    }
    let n = grid.len();
    let mut blocked = vec![false; n];
    for d in dangers {
        for (b, &v) in blocked.iter_mut().zip(&d.values) {
            *b |= v > params.danger_threshold;
        }
    }
    let mut filtered = vec![0.0; n];
    for (m, w) in interests {
        for (f, &v) in filtered.iter_mut().zip(&m.values) {
            *f += w * v;
        }
    }
    for (f, &b) in filtered.iter_mut().zip(&blocked) {
        if b {
            *f = 0.0;
        }
    }
    let blocked_count = blocked.iter().filter(|&&b| b).count();
    let target = (params.interp_speed.max(shape.0), params.interp_steer.max(shape.1));
    let bounds = (grid.min_speed(), grid.max_speed(), grid.max_steer());
    let mut sel = Selection {
        action: Action::STOP,
        all_blocked: blocked_count == n,
        blocked_fraction: blocked_count as f64 / n as f64,
        blocked: Vec::new(),
        upsampled: Vec::new(),
        upsampled_shape: target,
        chosen: None,
        admissible: Vec::new(),
        bounds,
    };
    sel.blocked = blocked;
    if sel.all_blocked {
        return Ok(sel);
    }
    let blocked = &sel.blocked;
    sel.upsampled = upsample(&filtered, shape, target);
    let nearest = |p: usize, n_src: usize, n_dst: usize| {
        ((p as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64).round() as usize).min(n_src - 1)
    };
    sel.admissible = (0..target.0 * target.1)
        .map(|i| {
            let (p, q) = (i / target.1, i % target.1);
            !blocked[nearest(p, shape.0, target.0) * shape.1 + nearest(q, shape.1, target.1)]
        })
        .collect();
    let best = (0..sel.upsampled.len())
        .filter(|&i| sel.admissible[i] && sel.upsampled[i] > 0.0)
        .max_by(|&a, &b| compare_candidates(&sel, a, b));
    if let Some(i) = best {
        sel.chosen = Some(i);
        sel.action = sel.action_at(i);
    }
    Ok(sel)
}
