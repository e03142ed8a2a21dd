//! Per-vehicle and per-run metrics, failure rates at run and vehicle level,
//! and macro-averaged aggregation with confidence intervals.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sim::{Classification, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HavRecord {
    pub traveled_distance: f64,
    /// Elapsed time minus time spent waiting at a reached goal.
    pub moving_time: f64,
    pub waiting_time: f64,
    /// Shortest path length of each leg when its goal was assigned; zero for
    /// a leg that was never assigned.
    pub planned_lengths: [f64; 2],
    pub goals_reached: u8,
    /// Standing at its current goal when the run ended.
    pub arrived: bool,
}

impl HavRecord {
    pub fn reached_both(&self) -> bool {
        self.goals_reached >= 2
    }

    /// A vehicle affected by a failure has not reached its current goal.
    pub fn affected(&self) -> bool {
        !self.arrived
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub hav_count: usize,
    pub density: f64,
    pub outcome: Option<Outcome>,
    pub steps: u64,
    pub params_hash: String,
    pub havs: Vec<HavRecord>,
}

impl RunRecord {
    pub fn classification(&self) -> Option<Classification> {
        self.outcome.map(|o| o.classification)
    }

    pub fn is_success(&self) -> bool {
        self.classification() == Some(Classification::Success)
    }

    /// Fraction of vehicles affected by the failure.
    pub fn affected_fraction(&self) -> f64 {
        if self.havs.is_empty() {
            return 0.0;
        }
        self.havs.iter().filter(|h| h.affected()).count() as f64 / self.havs.len() as f64
    }

    /// Mean over the vehicles with a defined average speed.
    pub fn mean_speed(&self) -> Option<f64> {
        mean_of((0..self.havs.len()).filter_map(|i| average_speed(self, i)))
    }

    pub fn mean_path_deviation(&self) -> Option<f64> {
        mean_of((0..self.havs.len()).filter_map(|i| path_deviation(self, i)))
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Traveled distance over time not spent waiting at a reached goal.
pub fn average_speed(record: &RunRecord, hav: usize) -> Option<f64> {
    let h = &record.havs[hav];
    (h.moving_time > 0.0).then(|| h.traveled_distance / h.moving_time)
}

/// Traveled distance over the summed shortest lengths of the assigned legs.
pub fn path_deviation(record: &RunRecord, hav: usize) -> Option<f64> {
    let h = &record.havs[hav];
    let planned: f64 = h.planned_lengths.iter().sum();
    (planned > 0.0).then(|| h.traveled_distance / planned)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub half_width: f64,
    pub n: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// Mean with a 95% normal-approximation confidence interval. `None` for an
/// empty sample; a single value has zero width.
pub fn mean_ci(values: &[f64]) -> Option<Estimate> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let half_width = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.959_963_984_540_054 * (var / n as f64).sqrt()
    };
    Some(Estimate { mean, half_width, n })
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, seed: u64) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * resamples as f64) as usize).min(resamples - 1)];
    Some((at(0.025), at(0.975)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub successes: usize,
    pub deadlocks: usize,
    pub livelocks: usize,
    /// Runs without an outcome (aborted or unfinished).
    pub unfinished: usize,
    /// Macro averages over all runs.
    pub speed_all: Option<Estimate>,
    pub deviation_all: Option<Estimate>,
    /// Macro averages over successful runs only.
    pub speed_success: Option<Estimate>,
    pub deviation_success: Option<Estimate>,
    /// Affected vehicle fraction within deadlocked, livelocked and all failed runs.
    pub affected_deadlock: Option<Estimate>,
    pub affected_livelock: Option<Estimate>,
    pub affected_failed: Option<Estimate>,
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

impl Summary {
    pub fn success_rate(&self) -> f64 {
        pct(self.successes, self.runs)
    }

    pub fn deadlock_rate(&self) -> f64 {
        pct(self.deadlocks, self.runs)
    }

    pub fn livelock_rate(&self) -> f64 {
        pct(self.livelocks, self.runs)
    }

    pub fn failure_rate(&self) -> f64 {
        pct(self.deadlocks + self.livelocks, self.runs)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let est = |e: &Option<Estimate>| match e {
            Some(e) => format!("{:.6} +- {:.6} (n={})", e.mean, e.half_width, e.n),
            None => "n/a".to_string(),
        };
        let _ = writeln!(s, "runs = {}", self.runs);
        let _ = writeln!(s, "success = {} ({:.2}%)", self.successes, self.success_rate());
        let _ = writeln!(s, "deadlock = {} ({:.2}%)", self.deadlocks, self.deadlock_rate());
        let _ = writeln!(s, "livelock = {} ({:.2}%)", self.livelocks, self.livelock_rate());
        let _ = writeln!(s, "unfinished = {}", self.unfinished);
        let _ = writeln!(s, "speed_all = {}", est(&self.speed_all));
        let _ = writeln!(s, "speed_success = {}", est(&self.speed_success));
        let _ = writeln!(s, "deviation_all = {}", est(&self.deviation_all));
        let _ = writeln!(s, "deviation_success = {}", est(&self.deviation_success));
        let _ = writeln!(s, "affected_deadlock = {}", est(&self.affected_deadlock));
        let _ = writeln!(s, "affected_livelock = {}", est(&self.affected_livelock));
        let _ = writeln!(s, "affected_failed = {}", est(&self.affected_failed));
        s
    }
}

/// Macro-averaged summary: metrics per run first, then across runs.
pub fn aggregate(records: &[RunRecord]) -> Summary {
    let count = |c: Classification| records.iter().filter(|r| r.classification() == Some(c)).count();
    let collect = |pred: &dyn Fn(&RunRecord) -> bool, f: &dyn Fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().filter(|r| pred(r)).filter_map(f).collect()
    };
    let all = |_: &RunRecord| true;
    let success = |r: &RunRecord| r.is_success();
    let of = |c: Classification| move |r: &RunRecord| r.classification() == Some(c);
    let failed = |r: &RunRecord| matches!(r.classification(), Some(Classification::Deadlock | Classification::Livelock));
    let affected = |r: &RunRecord| Some(r.affected_fraction());
    Summary {
        runs: records.len(),
        successes: count(Classification::Success),
        deadlocks: count(Classification::Deadlock),
        livelocks: count(Classification::Livelock),
        unfinished: records.iter().filter(|r| r.outcome.is_none()).count(),
        speed_all: mean_ci(&collect(&all, &RunRecord::mean_speed)),
        deviation_all: mean_ci(&collect(&all, &RunRecord::mean_path_deviation)),
        speed_success: mean_ci(&collect(&success, &RunRecord::mean_speed)),
        deviation_success: mean_ci(&collect(&success, &RunRecord::mean_path_deviation)),
        affected_deadlock: mean_ci(&collect(&of(Classification::Deadlock), &affected)),
        affected_livelock: mean_ci(&collect(&of(Classification::Livelock), &affected)),
        affected_failed: mean_ci(&collect(&failed, &affected)),
    }
}
