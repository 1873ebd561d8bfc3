#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

pub struct Run {
    pub code: i32,
    pub stderr: String,
}

pub fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sta-shuttle"));
    for var in [
        "STA_SHUTTLE_CONFIG",
        "STA_SHUTTLE_OUT",
        "STA_SHUTTLE_SEED",
        "STA_SHUTTLE_THREADS",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    path
}

pub fn run_with(mut cmd: Command, args: &[&str]) -> Run {
    let out = cmd.args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Run `sub` with `config` written next to `out`.
pub fn run(sub: &str, config: &Value, out: &Path) -> Run {
    let dir = out.parent().unwrap();
    std::fs::create_dir_all(dir).unwrap();
    let name = format!("{}.json", out.file_name().unwrap().to_string_lossy());
    let path = write_config(dir, &name, config);
    run_with(
        binary(),
        &[sub, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
    )
}

/// File name to contents for every file in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Names of files that differ or exist on one side only.
pub fn differing(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    a.keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn assert_same(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>, what: &str) {
    let diff = differing(a, b);
    assert!(diff.is_empty(), "{what}: files differ: {diff:?}");
}

pub fn task(distance: f64, duration: f64) -> Value {
    json!({ "mass": 1.0, "omega": 1.0, "distance": distance, "duration": duration })
}

pub fn lattice() -> Value {
    json!({ "kind": "lattice", "depth": 0.5, "wavenumber": 1.0 })
}

pub fn ou_position() -> Value {
    json!({ "target": "position", "kind": { "kind": "ou", "variance": 1.0, "correlation_time": 1.0 }, "lambda": 0.01 })
}

/// One small job per command (and per analysis kind), used for
/// reproducibility checks.
pub fn jobs() -> Vec<(&'static str, Value)> {
    let t = task(1.0, 6.0);
    vec![
        (
            "design",
            json!({ "task": t, "design": { "nulls": [{ "omega": 1.0, "flat": true }] } }),
        ),
        (
            "simulate",
            json!({ "task": t, "simulate": { "engine": "both", "snapshots": [2.0] } }),
        ),
        (
            "spectrum",
            json!({ "task": t, "spectrum": { "omega_min": 0.1, "omega_max": 3.0, "points": 64,
                "discontinuities": "flagged", "window": { "epsilon": 1e-4 } } }),
        ),
        (
            "noise",
            json!({ "task": t, "seed": 11, "noise": { "lattice": lattice(), "model": ou_position(),
                "analysis": { "kind": "sensitivity", "realizations": 40 } } }),
        ),
        (
            "noise",
            json!({ "task": t, "seed": 5, "noise": { "lattice": lattice(), "model": ou_position(),
                "analysis": { "kind": "psd", "samples": 32768, "dt": 0.05 } } }),
        ),
        (
            "noise",
            json!({ "task": t, "seed": 5, "noise": { "lattice": lattice(), "model": ou_position(),
                "analysis": { "kind": "heating", "second": { "kind": "ou", "variance": 1.0, "correlation_time": 0.5 },
                    "options": { "duration": 20.0, "realizations": 40, "samples": 10, "batches": 4 } } } }),
        ),
        (
            "oct",
            json!({ "task": t, "oct": { "kind": "bang_bang", "delta": 0.25 } }),
        ),
        (
            "oct",
            json!({ "task": t, "oct": { "kind": "smooth", "constraint": { "max_relative_displacement": 0.1 } } }),
        ),
        (
            "oct",
            json!({ "task": t, "seed": 3, "oct": { "kind": "robust", "cost": { "window": 1.0 },
                "options": { "family_dim": 2, "restarts": 2, "max_iters": 150 } } }),
        ),
        (
            "sweep",
            json!({ "task": t, "sweep": { "durations": { "start": 3.0, "stop": 6.0, "count": 3 }, "simulate": {} } }),
        ),
        (
            "sweep",
            json!({ "task": t, "seed": 2, "sweep": { "durations": [3.0, 4.0], "noise": { "lattice": lattice(),
                "model": ou_position(), "analysis": { "kind": "sensitivity", "realizations": 20 } } } }),
        ),
    ]
}
