mod common;

use common::{assert_same, binary, jobs, read_json, run, run_with, snapshot, task, write_config};
use serde_json::{json, Value};

#[test]
fn design_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("design");
    let r = run("design", &json!({ "task": task(1.0, 3.0), "design": {} }), &out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let files = snapshot(&out);
    let names: Vec<&str> = files.keys().map(String::as_str).collect();
    assert_eq!(
        names,
        ["feasibility.json", "resolved_config.json", "trap.csv", "trap.json"]
    );
    let report = read_json(&out.join("feasibility.json"));
    assert!(report["bound_ratio"].as_f64().unwrap() >= 1.0);
    let trap = read_json(&out.join("trap.json"));
    assert_eq!(trap["role"], "trap");
}

#[test]
fn design_rejects_too_many_nulls() {
    let tmp = tempfile::tempdir().unwrap();
    let nulls: Vec<Value> = (1..=9).map(|k| json!({ "omega": k as f64 })).collect();
    let r = run(
        "design",
        &json!({ "task": task(1.0, 40.0), "design": { "nulls": nulls } }),
        &tmp.path().join("o"),
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn zero_distance_design_warns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("zero");
    let r = run("design", &json!({ "task": task(0.0, 2.0), "design": {} }), &out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("warning"), "{}", r.stderr);
    let trap = read_json(&out.join("trap.json"));
    assert!(trap["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c.as_f64() == Some(0.0)));
}

#[test]
fn schema_violations_exit_with_config_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("design", json!({ "task": task(1.0, 3.0), "design": {}, "colour": 1 })),
        (
            "design",
            json!({ "task": task(1.0, 3.0), "design": {}, "spectrum": { "omega_min": 0.0, "omega_max": 1.0 } }),
        ),
        ("simulate", json!({ "task": task(1.0, 3.0), "design": {} })),
        ("design", json!({ "task": task(1.0, 3.0) })),
        ("design", json!({ "task": task(1.0, -3.0), "design": {} })),
        (
            "design",
            json!({ "task": task(1.0, 3.0), "design": { "continuity_order": 4 } }),
        ),
        (
            "sweep",
            json!({ "task": task(1.0, 3.0), "sweep": { "durations": [], "simulate": {} } }),
        ),
    ];
    for (i, (sub, config)) in cases.iter().enumerate() {
        let r = run(sub, config, &tmp.path().join(format!("case{i}")));
        assert_eq!(r.code, 2, "case {i}: {}", r.stderr);
    }
    let r = run_with(binary(), &["design", "--config", "/nonexistent/job.json"]);
    assert_eq!(r.code, 2);
    let r = run_with(binary(), &["design"]);
    assert_eq!(r.code, 2);
}

#[test]
fn simulate_statuses() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = tmp.path().join("ok");
    let r = run(
        "simulate",
        &json!({ "task": task(1.0, std::f64::consts::TAU), "simulate": { "engine": "both", "snapshots": [1.0, 3.0] } }),
        &ok,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = read_json(&ok.join("report.json"));
    for engine in ["classical", "quantum"] {
        assert!(report[engine]["final_excess_energy"].as_f64().unwrap().abs() < 1e-8);
    }
    assert!(ok.join("snapshot_001.csv").exists());
    assert!(ok.join("trajectory.csv").exists());

    let escape = json!({
        "task": task(3.0, 0.5),
        "simulate": { "path": { "kind": "boundary" }, "potential": { "kind": "gaussian", "depth": 2.0, "waist": 1.0 } }
    });
    let r = run("simulate", &escape, &tmp.path().join("escape"));
    assert_eq!(r.code, 3, "{}", r.stderr);

    // Slow round trip out to x = 20, far beyond a grid sized for d = 0.
    let excursion = tmp.path().join("excursion.json");
    let path = json!({ "role": "trap", "duration": 10.0, "coefficients": [0.0, 0.0, 320.0, -640.0, 320.0] });
    std::fs::write(&excursion, path.to_string()).unwrap();
    let contaminated = json!({
        "task": task(0.0, 10.0),
        "simulate": { "path": { "kind": "poly", "file": excursion }, "engine": "quantum" }
    });
    let r = run("simulate", &contaminated, &tmp.path().join("contaminated"));
    assert_eq!(r.code, 4, "{}", r.stderr);
}

#[test]
fn every_command_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, (sub, config)) in jobs().iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        let ra = run(sub, config, &a);
        assert_eq!(ra.code, 0, "{sub} #{i}: {}", ra.stderr);
        let rb = run(sub, config, &b);
        assert_eq!(rb.code, 0, "{sub} #{i}: {}", rb.stderr);
        let (fa, fb) = (snapshot(&a), snapshot(&b));
        assert!(fa.contains_key("resolved_config.json"));
        assert_same(&fa, &fb, &format!("{sub} #{i}"));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let (sub, config) = &jobs()[3];
    let path = write_config(tmp.path(), "job.json", config);
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let r = run_with(
            binary(),
            &[
                sub,
                "--config",
                path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ],
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        outs.push(snapshot(&out));
    }
    assert_same(&outs[0], &outs[1], "threads");
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (sub, config) = &jobs()[3];
    let first = tmp.path().join("first");
    assert_eq!(run(sub, config, &first).code, 0);
    let resolved = read_json(&first.join("resolved_config.json"));
    assert_eq!(resolved["seed"], 11);
    assert_eq!(resolved["noise"]["model"]["seed"], 11);
    assert_eq!(resolved["noise"]["analysis"]["options"]["quantum"], false);
    let again = tmp.path().join("again");
    let r = run_with(
        binary(),
        &[
            sub,
            "--config",
            first.join("resolved_config.json").to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_same(&snapshot(&first), &snapshot(&again), "rerun");
}

#[test]
fn environment_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (sub, config) = &jobs()[3];
    let path = write_config(tmp.path(), "job.json", config);
    let by_flag = tmp.path().join("flag");
    let r = run_with(
        binary(),
        &[
            sub,
            "--config",
            path.to_str().unwrap(),
            "--out",
            by_flag.to_str().unwrap(),
            "--seed",
            "99",
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);

    let by_env = tmp.path().join("env");
    let mut cmd = binary();
    cmd.env("STA_SHUTTLE_CONFIG", &path)
        .env("STA_SHUTTLE_OUT", &by_env)
        .env("STA_SHUTTLE_SEED", "99");
    let r = run_with(cmd, &[sub]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_same(&snapshot(&by_flag), &snapshot(&by_env), "env");

    let default_seed = tmp.path().join("default");
    assert_eq!(run(sub, config, &default_seed).code, 0);
    assert_ne!(
        std::fs::read(default_seed.join("sensitivity.json")).unwrap(),
        std::fs::read(by_env.join("sensitivity.json")).unwrap()
    );
}

#[test]
fn sweep_resumes_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = json!({ "task": task(1.0, 6.0),
        "sweep": { "durations": [2.0, 4.0, 6.0, 8.0], "simulate": { "engine": "both" } } });
    let full = tmp.path().join("full");
    assert_eq!(run("sweep", &config, &full).code, 0);
    let complete = snapshot(&full);
    let csv = String::from_utf8(complete["sweep.csv"].clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.starts_with("t_f,engine,final_excess_energy"));

    let manifest = String::from_utf8(complete["sweep_manifest.jsonl"].clone()).unwrap();
    let kept: Vec<&str> = manifest.lines().take(3).collect();
    let partial = format!("{}\n{{\"index\":2,\"t_f\"", kept.join("\n"));
    std::fs::write(full.join("sweep_manifest.jsonl"), partial).unwrap();
    std::fs::remove_file(full.join("sweep.csv")).unwrap();

    let r = run("sweep", &config, &full);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("resumed 2 of 4"), "{}", r.stderr);
    assert_same(&snapshot(&full), &complete, "resume");

    let other = json!({ "task": task(1.0, 6.0), "sweep": { "durations": [2.0, 4.0], "simulate": {} } });
    assert_eq!(run("sweep", &other, &full).code, 2);
}

#[test]
fn single_point_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = json!({ "path": { "kind": "boundary" }, "engine": "both" });
    let s = tmp.path().join("sim");
    assert_eq!(
        run("simulate", &json!({ "task": task(1.0, 2.5), "simulate": sim }), &s).code,
        0
    );
    let w = tmp.path().join("sweep");
    assert_eq!(
        run(
            "sweep",
            &json!({ "task": task(1.0, 9.0), "sweep": { "durations": [2.5], "simulate": sim } }),
            &w
        )
        .code,
        0
    );

    let report = read_json(&s.join("report.json"));
    let mut reader = csv::Reader::from_path(w.join("sweep.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let engine = &row[1];
        for key in [
            "final_excess_energy",
            "initial_excess_energy",
            "max_transient_energy",
            "max_relative_displacement",
        ] {
            let col = headers.iter().position(|h| h == key).unwrap();
            let value: f64 = row[col].parse().unwrap();
            assert_eq!(value, report[engine][key].as_f64().unwrap(), "{engine} {key}");
        }
    }
}

#[test]
fn oct_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bb");
    assert_eq!(
        run(
            "oct",
            &json!({ "task": task(1.0, 6.0), "oct": { "kind": "bang_bang", "delta": 0.25 } }),
            &out
        )
        .code,
        0
    );
    let report = read_json(&out.join("bang_bang.json"));
    assert!((report["t_f"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!(report["verified_excess"].as_f64().unwrap() <= 1e-8 * 0.5);
    assert_eq!(report["trap_jumps"].as_array().unwrap().len(), 3);

    let out = tmp.path().join("tight");
    let config = json!({ "task": task(1.0, 4.004), "oct": { "kind": "smooth", "constraint": { "max_relative_displacement": 0.25 } } });
    let r = run("oct", &config, &out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = read_json(&out.join("smooth.json"));
    assert_eq!(report["status"], "infeasible");
    assert!(report["smallest_feasible_t_f"].as_f64().unwrap() > 4.0);
}

#[test]
fn correlated_noise_sweep_is_non_monotonic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ou_scan");
    let config = json!({
        "task": task(1.0, 2.0),
        "seed": 7,
        "sweep": {
            "durations": [2.0, 3.5, 6.0, 9.0],
            "noise": {
                "lattice": { "kind": "lattice", "depth": 50.0, "wavenumber": 0.1 },
                "model": { "target": "position", "kind": { "kind": "ou", "variance": 1.0, "correlation_time": 8.0 }, "lambda": 0.01 },
                "analysis": { "kind": "sensitivity", "realizations": 400 }
            }
        }
    });
    let r = run("sweep", &config, &out);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut table = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let e: Vec<f64> = table.records().map(|row| row.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(e.len(), 4);
    assert!(e[0] < e[1] && e[1] > e[2] && e[2] < e[3], "scan {e:?}");
}

#[test]
fn shipped_configs_run() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for sub in ["design", "simulate", "spectrum", "oct"] {
        let path = configs.join(format!("{sub}.json"));
        let out = tmp.path().join(sub);
        let r = run_with(
            binary(),
            &[sub, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()],
        );
        assert_eq!(r.code, 0, "{sub}: {}", r.stderr);
    }
}
