use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hav_swarm::experiment::{parse_value, replay, run_experiment, summary_table, ExperimentConfig, ExperimentReport};

#[derive(Parser)]
#[command(name = "havsim", version, about = "Headless truck-trailer swarm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One scenario, or a batch of seeds with --runs > 1.
    Run(Common),
    /// Every combination of hav counts and densities.
    Grid(Common),
    /// Sweep one parameter over a list of values on a shared scenario set.
    ParamStudy {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter key, e.g. sim.behavior.evade_weight.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values, or a TOML array.
        #[arg(long)]
        values: Option<String>,
    },
    /// Re-run the experiment recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any configuration key: --set sim.behavior.evade_weight=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// One count, or a comma-separated list for grids.
    #[arg(long = "hav-count")]
    hav_count: Option<String>,
    /// Area fraction, or a comma-separated list for grids.
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long = "max-steps")]
    max_steps: Option<u64>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-step trajectory logs for every run.
    #[arg(long)]
    trajectories: bool,
}

enum Failure {
    Config(String),
    Safety(Vec<String>),
}

fn list_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    if raw.starts_with('[') {
        parse_value(raw)
    } else {
        toml::Value::Array(raw.split(',').map(|s| parse_value(s.trim())).collect())
    }
}

fn build_config(common: &Common, mode: &str, extra: Vec<(String, toml::Value)>) -> Result<ExperimentConfig, Failure> {
    let mut ov: Vec<(String, toml::Value)> = vec![("mode".into(), toml::Value::String(mode.into()))];
    if let Some(s) = common.seed {
        ov.push(("base_seed".into(), toml::Value::Integer(s as i64)));
    }
    if let Some(n) = &common.hav_count {
        ov.push(("hav_counts".into(), list_value(n)));
    }
    if let Some(d) = &common.density {
        ov.push(("densities".into(), list_value(d)));
    }
    if let Some(r) = common.runs {
        ov.push(("runs".into(), toml::Value::Integer(r as i64)));
    }
    if let Some(m) = common.max_steps {
        ov.push(("max_steps".into(), toml::Value::Integer(m as i64)));
    }
    if let Some(n) = &common.name {
        ov.push(("name".into(), toml::Value::String(n.clone())));
    }
    if let Some(o) = &common.out {
        ov.push(("output_dir".into(), toml::Value::String(o.display().to_string())));
    }
    if common.trajectories {
        ov.push(("trajectories".into(), toml::Value::Boolean(true)));
    }
    ov.extend(extra);
    for s in &common.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        ov.push((k.trim().to_string(), parse_value(v.trim())));
    }
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    ExperimentConfig::from_toml_with_overrides(&text, &ov).map_err(|e| Failure::Config(e.to_string()))
}

fn finish(report: ExperimentReport) -> Result<(), Failure> {
    print!("{}", summary_table(&report.cells));
    println!("outputs written to {}", report.directory.display());
    let violations = report.safety_violations();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Safety(violations))
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let report = match cli.command {
        Command::Run(common) => {
            let mode = if common.runs.unwrap_or(1) > 1 { "batch" } else { "single" };
            let mut config = build_config(&common, mode, vec![])?;
            if config.runs > 1 && mode == "single" {
                config.mode = hav_swarm::experiment::Mode::Batch;
            }
            run_experiment(&config)
        }
        Command::Grid(common) => run_experiment(&build_config(&common, "grid", vec![])?),
        Command::ParamStudy { common, param, values } => {
            let mut extra = Vec::new();
            if let Some(p) = param {
                extra.push(("study.parameter".into(), toml::Value::String(p)));
            }
            if let Some(v) = values {
                extra.push(("study.values".into(), list_value(&v)));
            }
            run_experiment(&build_config(&common, "param-study", extra)?)
        }
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()),
    }
    .map_err(|e| Failure::Config(e.to_string()))?;
    finish(report)
}

fn main() -> ExitCode {
    // usage errors share the config-error status; 2 is reserved for safety
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Safety(v)) => {
            for line in &v {
                eprintln!("safety violation: {line}");
            }
            ExitCode::from(2)
        }
    }
}
