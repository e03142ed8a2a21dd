//! Batch experiments: configuration with dotted-key overrides, cell planning
//! and seeding, parallel execution, output files and manifest replay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, average_speed, path_deviation, RunRecord, Summary};
use crate::scenario::Scenario;
use crate::sim::{SimParams, Simulation};

/// Seed offset between grid cells.
pub const CELL_SEED_STRIDE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Single,
    Batch,
    Grid,
    ParamStudy,
}

impl Mode {
    pub fn default_max_steps(self) -> u64 {
        match self {
            Mode::ParamStudy => 10_000,
            _ => 20_000,
        }
    }
}

/// One-at-a-time parameter sweep over a dotted configuration key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamStudy {
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub hav_counts: Vec<usize>,
    pub densities: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    /// Step limit; the mode's default when absent.
    pub max_steps: Option<u64>,
    pub output_dir: PathBuf,
    /// Write a per-step trajectory log for every run.
    pub trajectories: bool,
    pub sim: SimParams,
    pub study: Option<ParamStudy>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            mode: Mode::Single,
            hav_counts: vec![5],
            densities: vec![0.12],
            runs: 1,
            base_seed: 0,
            max_steps: None,
            output_dir: PathBuf::from("results"),
            trajectories: false,
            sim: SimParams::default(),
            study: None,
        }
    }
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets a dotted key inside a TOML table, creating intermediate tables.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("nonempty split");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("`{p}` in `{key}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Builds a configuration from TOML text plus `key=value` overrides.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, v.clone())?;
        }
        let config: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn effective_max_steps(&self) -> u64 {
        self.max_steps.unwrap_or_else(|| self.mode.default_max_steps())
    }

    /// Simulation parameters with the effective step limit.
    pub fn sim_params(&self) -> SimParams {
        SimParams { max_steps: self.effective_max_steps(), ..self.sim.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.effective_max_steps() < 1 {
            return bad("max_steps must be at least 1".into());
        }
        if self.hav_counts.is_empty() || self.hav_counts.contains(&0) {
            return bad("hav_counts must be a nonempty list of positive counts".into());
        }
        if self.densities.is_empty() || self.densities.iter().any(|&d| !(d > 0.0 && d <= 0.5)) {
            return bad("densities must be a nonempty list in (0, 0.5]".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("invalid experiment name `{}`", self.name));
        }
        self.sim_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        match (&self.mode, &self.study) {
            (Mode::ParamStudy, None) => return bad("param-study mode needs a [study] table".into()),
            (Mode::ParamStudy, Some(s)) if s.values.is_empty() => return bad("study.values is empty".into()),
            (Mode::ParamStudy, Some(_)) => {
                for cell in self.param_cells()? {
                    cell.params.validate().map_err(|e| Error::Config(format!("{}: {e}", cell.name)))?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn param_cells(&self) -> Result<Vec<Cell>> {
        let study = self.study.as_ref().ok_or_else(|| Error::Config("missing [study] table".into()))?;
        let key = study.parameter.strip_prefix("sim.").unwrap_or(&study.parameter);
        let base = match toml::Value::try_from(self.sim_params()) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config("parameters do not form a table".into())),
        };
        let label = key.rsplit('.').next().unwrap_or(key);
        let seeds: Vec<u64> = (0..self.runs as u64).map(|r| self.base_seed + r).collect();
        study
            .values
            .iter()
            .map(|v| {
                let mut t = base.clone();
                set_dotted(&mut t, key, v.clone())?;
                let params: SimParams = toml::Value::Table(t)
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", study.parameter)))?;
                let value = v.to_string();
                Ok(Cell {
                    name: sanitize(&format!("{label}={value}")),
                    hav_count: self.hav_counts[0],
                    density: self.densities[0],
                    value: Some(value),
                    seeds: seeds.clone(),
                    params,
                })
            })
            .collect()
    }

    /// The experiment's cells in output order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let params = self.sim_params();
        let n0 = self.hav_counts[0];
        let d0 = self.densities[0];
        let seq = |count: usize, offset: u64| (0..count as u64).map(|r| self.base_seed + offset + r).collect();
        Ok(match self.mode {
            Mode::Single => vec![Cell {
                name: "single".into(),
                hav_count: n0,
                density: d0,
                value: None,
                seeds: vec![self.base_seed],
                params,
            }],
            Mode::Batch => vec![Cell {
                name: cell_name(n0, d0),
                hav_count: n0,
                density: d0,
                value: None,
                seeds: seq(self.runs, 0),
                params,
            }],
            Mode::Grid => {
                let mut cells = Vec::new();
                for &n in &self.hav_counts {
                    for &d in &self.densities {
                        let offset = cells.len() as u64 * CELL_SEED_STRIDE;
                        cells.push(Cell {
                            name: cell_name(n, d),
                            hav_count: n,
                            density: d,
                            value: None,
                            seeds: seq(self.runs, offset),
                            params: params.clone(),
                        });
                    }
                }
                cells
            }
            Mode::ParamStudy => self.param_cells()?,
        })
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "=._-+".contains(c) { c } else { '_' }).collect()
}

/// Density as a compact percentage, e.g. `0.15` -> `15`.
fn percent(density: f64) -> String {
    let p = (density * 100.0 * 1e6).round() / 1e6;
    format!("{p}")
}

pub fn cell_name(hav_count: usize, density: f64) -> String {
    format!("n{hav_count}_rho{}", percent(density))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub hav_count: usize,
    pub density: f64,
    /// Parameter value of a study cell.
    pub value: Option<String>,
    pub seeds: Vec<u64>,
    pub params: SimParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Finished { record: RunRecord, scenario_hash: String, trajectory: Option<Vec<u8>> },
    GenerationFailed { seed: u64, message: String },
    SafetyViolation { seed: u64, message: String },
}

impl RunResult {
    pub fn record(&self) -> Option<&RunRecord> {
        match self {
            RunResult::Finished { record, .. } => Some(record),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

impl CellResult {
    pub fn records(&self) -> Vec<RunRecord> {
        self.runs.iter().filter_map(|r| r.record().cloned()).collect()
    }

    pub fn generation_failures(&self) -> usize {
        self.runs.iter().filter(|r| matches!(r, RunResult::GenerationFailed { .. })).count()
    }
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    hex::encode(&Sha256::digest(scenario.to_toml().as_bytes())[..8])
}

/// Generates and simulates one run.
pub fn execute_run(hav_count: usize, density: f64, seed: u64, params: &SimParams, trajectory: bool) -> RunResult {
    let scenario = match Scenario::generate(seed, hav_count, density) {
        Ok(s) => s,
        Err(e) => return RunResult::GenerationFailed { seed, message: e.to_string() },
    };
    let mut sim = match Simulation::new(&scenario, params.clone()) {
        Ok(s) => s,
        Err(e) => return RunResult::GenerationFailed { seed, message: e.to_string() },
    };
    let mut log = Vec::new();
    let result = if trajectory { sim.run_logged(&mut log) } else { sim.run() };
    match result {
        Ok(_) => RunResult::Finished {
            record: sim.record(),
            scenario_hash: scenario_hash(&scenario),
            trajectory: trajectory.then_some(log),
        },
        Err(e) => RunResult::SafetyViolation { seed, message: e.to_string() },
    }
}

/// Executes every run of every cell on the worker pool. Results are ordered
/// by (cell, run), independent of completion order.
pub fn execute(cells: &[Cell], trajectories: bool) -> Vec<CellResult> {
    let jobs: Vec<(usize, u64)> =
        cells.iter().enumerate().flat_map(|(c, cell)| cell.seeds.iter().map(move |&s| (c, s))).collect();
    let mut results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &cells[c];
            execute_run(cell.hav_count, cell.density, seed, &cell.params, trajectories)
        })
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    for cell in cells.iter().rev() {
        let runs = results.split_off(results.len() - cell.seeds.len());
        let records: Vec<RunRecord> = runs.iter().filter_map(|r| r.record().cloned()).collect();
        out.push(CellResult { cell: cell.clone(), summary: aggregate(&records), runs });
    }
    out.reverse();
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub directory: PathBuf,
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn safety_violations(&self) -> Vec<String> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.runs.iter().filter_map(move |r| match r {
                    RunResult::SafetyViolation { seed, message } => Some(format!("{} seed {seed}: {message}", c.cell.name)),
                    _ => None,
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    run: usize,
    seed: u64,
    scenario_hash: &'a str,
    hav_count: usize,
    density: f64,
    outcome: String,
    outcome_step: Option<u64>,
    hav: usize,
    traveled_distance: f64,
    moving_time: f64,
    waiting_time: f64,
    planned_length_1: f64,
    planned_length_2: f64,
    goals_reached: u8,
    arrived: bool,
    average_speed: Option<f64>,
    path_deviation: Option<f64>,
    params_hash: &'a str,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_runs_csv(path: &Path, result: &CellResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut failures = Vec::new();
    for (run, r) in result.runs.iter().enumerate() {
        match r {
            RunResult::Finished { record, scenario_hash, .. } => {
                for hav in 0..record.havs.len() {
                    let h = &record.havs[hav];
                    w.serialize(CsvRow {
                        run,
                        seed: record.seed,
                        scenario_hash,
                        hav_count: record.hav_count,
                        density: record.density,
                        outcome: record.classification().map_or("unfinished".into(), |c| c.to_string()),
                        outcome_step: record.outcome.map(|o| o.step),
                        hav,
                        traveled_distance: h.traveled_distance,
                        moving_time: h.moving_time,
                        waiting_time: h.waiting_time,
                        planned_length_1: h.planned_lengths[0],
                        planned_length_2: h.planned_lengths[1],
                        goals_reached: h.goals_reached,
                        arrived: h.arrived,
                        average_speed: average_speed(record, hav),
                        path_deviation: path_deviation(record, hav),
                        params_hash: &record.params_hash,
                    })
                    .map_err(csv_error)?;
                }
            }
            RunResult::GenerationFailed { seed, message } => failures.push(format!("run {run} seed {seed}: generation failed: {message}")),
            RunResult::SafetyViolation { seed, message } => failures.push(format!("run {run} seed {seed}: {message}")),
        }
    }
    w.flush()?;
    if !failures.is_empty() {
        fs::write(path.with_file_name("failures.txt"), failures.join("\n") + "\n")?;
    }
    Ok(())
}

fn cell_summary_text(result: &CellResult) -> String {
    let c = &result.cell;
    let mut s = String::new();
    let _ = writeln!(s, "cell = {}", c.name);
    let _ = writeln!(s, "hav_count = {}", c.hav_count);
    let _ = writeln!(s, "density = {}", c.density);
    if let Some(v) = &c.value {
        let _ = writeln!(s, "value = {v}");
    }
    let _ = writeln!(s, "generation_failures = {}", result.generation_failures());
    s + &result.summary.to_text()
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// One row per cell: failure rates and headline metrics.
pub fn summary_table(results: &[CellResult]) -> String {
    let mut s = String::from(
        "cell,hav_count,density,value,runs,success_pct,deadlock_pct,livelock_pct,speed,deviation,affected_deadlock,affected_livelock\n",
    );
    for r in results {
        let m = &r.summary;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.2},{:.2},{:.2},{},{},{},{}",
            r.cell.name,
            r.cell.hav_count,
            r.cell.density,
            r.cell.value.as_deref().unwrap_or(""),
            m.runs,
            m.success_rate(),
            m.deadlock_rate(),
            m.livelock_rate(),
            opt(m.speed_all.map(|e| e.mean)),
            opt(m.deviation_all.map(|e| e.mean)),
            opt(m.affected_deadlock.map(|e| e.mean)),
            opt(m.affected_livelock.map(|e| e.mean)),
        );
    }
    s
}

#[derive(Serialize, Deserialize)]
struct ManifestCell {
    name: String,
    hav_count: usize,
    density: f64,
    value: Option<String>,
    params_hash: String,
    seeds: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ExperimentConfig,
    cells: Vec<ManifestCell>,
}

fn manifest_text(config: &ExperimentConfig, cells: &[Cell]) -> String {
    let mut config = config.clone();
    config.max_steps = Some(config.effective_max_steps());
    config.sim.max_steps = config.effective_max_steps();
    let m = Manifest {
        config,
        cells: cells
            .iter()
            .map(|c| ManifestCell {
                name: c.name.clone(),
                hav_count: c.hav_count,
                density: c.density,
                value: c.value.clone(),
                params_hash: c.params.hash(),
                seeds: c.seeds.clone(),
            })
            .collect(),
    };
    toml::to_string(&m).expect("manifest serializes")
}

/// Writes every output file for finished cells under `<out>/<name>/`.
pub fn write_outputs(config: &ExperimentConfig, results: &[CellResult]) -> Result<PathBuf> {
    let dir = config.output_dir.join(&config.name);
    fs::create_dir_all(&dir)?;
    let cells: Vec<Cell> = results.iter().map(|r| r.cell.clone()).collect();
    for r in results {
        let cdir = dir.join(&r.cell.name);
        fs::create_dir_all(&cdir)?;
        write_runs_csv(&cdir.join("runs.csv"), r)?;
        fs::write(cdir.join("summary.txt"), cell_summary_text(r))?;
        fs::write(cdir.join("manifest.txt"), manifest_text(config, std::slice::from_ref(&r.cell)))?;
        for (k, run) in r.runs.iter().enumerate() {
            if let RunResult::Finished { trajectory: Some(log), .. } = run {
                fs::write(cdir.join(format!("trajectory_{k}.csv")), log)?;
            }
        }
    }
    fs::write(dir.join("summary.csv"), summary_table(results))?;
    fs::write(dir.join("manifest.txt"), manifest_text(config, &cells))?;
    Ok(dir)
}

/// Plans, executes and writes an experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let cells = config.cells()?;
    let trajectories = config.trajectories || config.mode == Mode::Single;
    let results = execute(&cells, trajectories);
    let directory = write_outputs(config, &results)?;
    Ok(ExperimentReport { directory, cells: results })
}

/// Reads the configuration stored in a manifest.
pub fn load_manifest(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    m.config.validate()?;
    Ok(m.config)
}

/// Re-runs the experiment described by a manifest, optionally into another
/// output directory.
pub fn replay(manifest: &Path, output_dir: Option<&Path>) -> Result<ExperimentReport> {
    let mut config = load_manifest(manifest)?;
    if let Some(out) = output_dir {
        config.output_dir = out.to_path_buf();
    }
    run_experiment(&config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(k: &str, v: &str) -> (String, toml::Value) {
        (k.to_string(), parse_value(v))
    }

    #[test]
    fn values_parse_as_toml_or_string() {
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("[2, 5]"), toml::Value::Array(vec![2.into(), 5.into()]));
        assert_eq!(parse_value("grid"), toml::Value::String("grid".into()));
        assert_eq!(parse_value("true"), toml::Value::Boolean(true));
    }

    #[test]
    fn overrides_reach_nested_parameters() {
        let c = ExperimentConfig::from_toml_with_overrides(
            "mode = \"batch\"\nruns = 3\n",
            &[ov("sim.behavior.evade_weight", "3.5"), ov("hav_counts", "[2]"), ov("sim.speed_resolution", "3"), ov("sim.behavior.collision_margin", "1")],
        )
        .unwrap();
        assert_eq!(c.sim.behavior.evade_weight, 3.5);
        assert_eq!(c.hav_counts, vec![2]);
        assert_eq!(c.runs, 3);
        assert_eq!(c.sim.speed_resolution, 3);
        assert_eq!(c.sim.behavior.evade_lookahead, 8.0);
        assert_eq!(c.sim.behavior.collision_margin, 1.0);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = |text: &str, o: &[(String, toml::Value)]| ExperimentConfig::from_toml_with_overrides(text, o).is_err();
        assert!(bad("runs = 0", &[]));
        assert!(bad("", &[ov("sim.behavior.no_such_field", "1")]));
        assert!(bad("mode = \"sideways\"", &[]));
        assert!(bad("mode = \"param-study\"", &[]));
        assert!(bad("", &[ov("densities", "[0.9]")]));
        assert!(bad("", &[ov("sim.steer_resolution", "4")]));
        assert!(bad("runs = [", &[]));
        assert!(bad("", &[ov("runs.x", "1")]));
    }

    #[test]
    fn grid_cells_and_seeds() {
        let c = ExperimentConfig::from_toml_with_overrides(
            "mode = \"grid\"\nhav_counts = [2, 5, 10]\ndensities = [0.05, 0.15, 0.25]\nruns = 50\nbase_seed = 7\n",
            &[],
        )
        .unwrap();
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells.iter().map(|c| c.seeds.len()).sum::<usize>(), 450);
        assert_eq!(cells[0].name, "n2_rho5");
        assert_eq!(cells[4].name, "n5_rho15");
        assert_eq!(cells[4].seeds[3], 7 + 4 * CELL_SEED_STRIDE + 3);
        assert_eq!(c.effective_max_steps(), 20_000);
    }

    #[test]
    fn study_cells_share_seeds() {
        let c = ExperimentConfig::from_toml_with_overrides(
            "mode = \"param-study\"\nruns = 4\n[study]\nparameter = \"behavior.evade_weight\"\nvalues = [1.0, 2.0, 4.0]\n",
            &[],
        )
        .unwrap();
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|x| x.seeds == cells[0].seeds));
        assert_eq!(cells[2].params.behavior.evade_weight, 4.0);
        assert_eq!(cells[2].name, "evade_weight=4.0");
        assert_eq!(cells[0].params.max_steps, 10_000);
        assert!(ExperimentConfig::from_toml_with_overrides(
            "mode = \"param-study\"\n[study]\nparameter = \"behavior.nope\"\nvalues = [1]\n",
            &[],
        )
        .is_err());
    }

    #[test]
    fn execution_order_is_by_cell_and_run() {
        let c = ExperimentConfig::from_toml_with_overrides(
            "mode = \"grid\"\nhav_counts = [1, 2]\ndensities = [0.1]\nruns = 3\nmax_steps = 200\n",
            &[],
        )
        .unwrap();
        let results = execute(&c.cells().unwrap(), false);
        assert_eq!(results.len(), 2);
        for r in &results {
            let seeds: Vec<u64> = r.records().iter().map(|x| x.seed).collect();
            assert_eq!(seeds, r.cell.seeds);
            assert!(r.records().iter().all(|x| x.hav_count == r.cell.hav_count));
        }
    }

    #[test]
    fn density_labels() {
        assert_eq!(cell_name(10, 0.15), "n10_rho15");
        assert_eq!(cell_name(2, 0.125), "n2_rho12.5");
    }
}
