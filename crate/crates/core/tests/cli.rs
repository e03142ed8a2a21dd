use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn havsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_havsim")).args(args).output().expect("binary runs")
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn single_run_succeeds_and_writes_a_deterministic_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for sub in ["a", "b"] {
        let o = havsim(&["run", "--seed", "4", "--hav-count", "1", "--out", &format!("{out}/{sub}")]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let cell = dir.path().join("a/experiment/single");
    assert_eq!(csv_column(&cell.join("runs.csv"), "outcome"), vec!["success"]);
    let a = fs::read(cell.join("trajectory_0.csv")).unwrap();
    let b = fs::read(dir.path().join("b/experiment/single/trajectory_0.csv")).unwrap();
    assert!(a.len() > 1000);
    assert_eq!(a, b);
}

#[test]
fn grid_runs_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = havsim(&[
        "grid", "--hav-count", "2,5,10", "--density", "0.05,0.15,0.25", "--runs", "50", "--max-steps", "20",
        "--name", "g", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let root = dir.path().join("g");
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 9);
    let mut runs = 0;
    for n in [2, 5, 10] {
        for rho in [5, 15, 25] {
            let cell = root.join(format!("n{n}_rho{rho}"));
            let seeds = csv_column(&cell.join("runs.csv"), "seed");
            let mut distinct = seeds.clone();
            distinct.dedup();
            runs += distinct.len();
            assert_eq!(seeds.len(), distinct.len() * n);
            assert!(cell.join("summary.txt").exists() && cell.join("manifest.txt").exists());
        }
    }
    assert_eq!(runs, 450);
}

#[test]
fn param_study_cells_share_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let o = havsim(&[
        "param-study", "--param", "sim.behavior.evade_weight", "--values", "0.5,1,2", "--runs", "6",
        "--hav-count", "3", "--density", "0.15", "--max-steps", "300", "--name", "ps", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hashes: Vec<Vec<String>> = ["0.5", "1", "2"]
        .iter()
        .map(|v| csv_column(&dir.path().join(format!("ps/evade_weight={v}/runs.csv")), "scenario_hash"))
        .collect();
    assert_eq!(hashes[0].len(), 18);
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[1], hashes[2]);
    let params: Vec<String> = ["0.5", "2"]
        .iter()
        .map(|v| csv_column(&dir.path().join(format!("ps/evade_weight={v}/runs.csv")), "params_hash")[0].clone())
        .collect();
    assert_ne!(params[0], params[1]);
}

#[test]
fn replaying_a_manifest_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = havsim(&[
        "grid", "--hav-count", "2,5", "--density", "0.05,0.2", "--runs", "4", "--max-steps", "1500",
        "--trajectories", "--name", "rep", "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = dir.path().join("second");
    let manifest = first.join("rep/manifest.txt");
    let o = havsim(&["replay", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (a, b) = (files_under(&first.join("rep")), files_under(&second.join("rep")));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    let mut compared = 0;
    for (name, bytes) in &a {
        // manifests record their own output directory
        if name.file_name().unwrap() == "manifest.txt" {
            continue;
        }
        assert!(bytes == &b[name], "{} differs", name.display());
        compared += 1;
    }
    assert!(compared > 10);
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(havsim(&["run", "--set", "no_such_key=1", "--out", out]).status.code(), Some(1));
    assert_eq!(havsim(&["run", "--runs", "0", "--out", out]).status.code(), Some(1));
    assert_eq!(havsim(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(havsim(&["replay", "/nonexistent/manifest.txt"]).status.code(), Some(1));
    assert_eq!(havsim(&["param-study", "--runs", "2", "--out", out]).status.code(), Some(1));
    // disabling every safeguard makes dense swarms collide
    let o = havsim(&[
        "grid", "--hav-count", "10", "--density", "0.25", "--runs", "2", "--max-steps", "2000", "--set",
        "sim.merge.danger_threshold=1000", "--set", "sim.validate_actions=false", "--set", "sim.behavior.evade_weight=0",
        "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("experiment/n10_rho25/failures.txt").exists());
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "name = \"fromfile\"\nhav_counts = [2]\ndensities = [0.1]\nruns = 2\nmax_steps = 200\noutput_dir = \"{}\"\n\n[sim.behavior]\nevade_weight = 1.5\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let o = havsim(&["run", "--config", cfg.to_str().unwrap(), "--runs", "3", "--set", "sim.controller.cross_track_gain=0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(dir.path().join("fromfile/manifest.txt")).unwrap();
    assert!(manifest.contains("evade_weight = 1.5"));
    assert!(manifest.contains("runs = 3"));
    assert!(manifest.contains("mode = \"batch\""));
}
