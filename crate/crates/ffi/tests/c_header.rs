//! Compiles and runs a small C program against the generated header and the
//! shared library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "hav_ffi.h"

int main(void) {
    HavSimulation *sim = NULL;
    if (hav_simulation_generate(8, 1, 0.1, "max_steps = 20000", &sim) != HAV_STATUS_OK) return 10;
    HavOutcome outcome = HAV_OUTCOME_RUNNING;
    if (hav_simulation_run(sim, &outcome) != HAV_STATUS_OK) return 11;
    if (outcome != HAV_OUTCOME_SUCCESS) return 12;
    HavPose pose;
    if (hav_simulation_pose(sim, 0, &pose) != HAV_STATUS_OK) return 13;
    hav_simulation_free(sim);

    if (hav_simulation_generate(8, 0, 0.1, NULL, &sim) != HAV_STATUS_INVALID_ARGUMENT) return 14;
    char msg[128];
    size_t n = hav_last_error_message(msg, sizeof msg);
    if (n == 0 || strlen(msg) == 0) return 15;

    HavPose a = {0.0, 0.0, 0.0}, b = {12.0, 0.0, 0.0};
    double len = 0.0;
    if (hav_dubins_length(a, b, 5.0, &len) != HAV_STATUS_OK || len < 11.999 || len > 12.001) return 16;
    printf("ok %s\n", hav_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests live in target/<profile>/deps; the shared library one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libhav_swarm_ffi.so").exists(), "shared library missing in {}", lib_dir.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lhav_swarm_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&bin).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
