use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use itokit::nnscore::Trainer;
use itokit_cli::config::{load, parse};
use serde_json::{json, Value};
use tempfile::TempDir;

fn itokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itokit"))
        .args(args)
        .env_remove("ITOKIT_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run_ok(verb: &str, config: &Path, out: &Path) {
    let o = itokit(&[verb, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{verb} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn bad_config_exits_with_2_and_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (json!({"grid": {"kind": "Karras", "nn": 5}}), "grid"),
        (json!({"tau": -1.0}), "tau"),
        (json!({"method": "BBDM", "scheduler": {"kind": "Inversed"}}), "scheduler"),
        (json!({"train": {"batch": 0}}), "train.batch"),
    ];
    for (i, (cfg, key)) in cases.iter().enumerate() {
        let path = write_config(dir.path(), &format!("bad{i}.json"), cfg);
        let o = itokit(&["sample", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{cfg}: {err}");
    }
    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let o = itokit(&["sample", "--config", dir.path().join("broken.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = itokit(&["sample", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupted_kernel_exits_with_3_and_names_the_cell() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "validate": {
            "cells": [
                {"method": "DM_VP"},
                {"method": "FM", "scheduler": {"kind": "Inversed"}}
            ],
            "times": [0.5],
            "n_steps": 200,
            "n_paths": 20000,
            "fixture_variance_scale": 1.5
        }
    });
    let path = write_config(dir.path(), "v.json", &cfg);
    let out = dir.path().join("out");
    let o = itokit(&["validate-kernels", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FM/Inversed") && err.contains("DM_VP/Linear"), "{err}");
    // the report is still written
    let (_, rows) = read_csv(&out.join("validate.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.last().unwrap() == "fail"));

    // same cells without corruption pass
    let mut clean = cfg.clone();
    clean["validate"]["fixture_variance_scale"] = json!(1.0);
    let path = write_config(dir.path(), "clean.json", &clean);
    run_ok("validate-kernels", &path, &dir.path().join("clean"));
}

#[test]
fn io_failures_exit_with_4() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({"n_paths": 10, "grid": {"n": 5}}));
    let o = itokit(&["sample", "--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let missing = write_config(dir.path(), "w.json", &json!({"weights": "nope.bin", "n_paths": 10}));
    let o = itokit(&["sample", "--config", missing.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.bin"));

    let o = itokit(&["sample", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn rerun_from_echo_reproduces_every_byte() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"method": "IR_SDE", "sampler": "EulerSDE", "n_paths": 300, "save_paths": 5, "grid": {"n": 21}, "seed": 9}),
    );
    let first = dir.path().join("first");
    run_ok("sample", &cfg, &first);
    let echo = read_json(&first.join("metrics.json"))["config"].clone();
    let again = write_config(dir.path(), "echo.json", &echo);
    let second = dir.path().join("second");
    run_ok("sample", &again, &second);
    assert_eq!(sorted_files(&first), ["metrics.json", "trajectories.csv", "trajectories.json"]);
    for name in sorted_files(&first) {
        assert_eq!(fs::read(first.join(&name)).unwrap(), fs::read(second.join(&name)).unwrap(), "{name}");
    }
    // the echo is a fixed point
    assert_eq!(load(&again).unwrap().resolve().unwrap().config, parse(&echo.to_string()).unwrap());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({"n_paths": 50, "grid": {"n": 11}, "seed": 1}));
    let a = dir.path().join("a");
    let o = itokit(&["sample", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--seed", "77"]);
    assert!(o.status.success());
    assert_eq!(read_json(&a.join("metrics.json"))["seed"], json!(77));
    assert_eq!(read_json(&a.join("metrics.json"))["config"]["seed"], json!(77));
}

#[test]
fn single_path_bridge_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"method": "BBDM", "sampler": "EulerODE", "n_paths": 1, "grid": {"kind": "Linear", "n": 51}, "y": [0.25]}),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok("sample", &cfg, &a);
    let o = itokit(&["sample", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "123"]);
    assert!(o.status.success());
    let (header, ra) = read_csv(&a.join("trajectories.csv"));
    let (_, rb) = read_csv(&b.join("trajectories.csv"));
    assert_eq!(header, ["path", "step", "t", "x_0"]);
    assert_eq!(ra.len(), 51);
    // no noise enters: the seed does not matter
    assert_eq!(ra, rb);
    assert_eq!(ra[0][3].parse::<f64>().unwrap(), 0.25);
    let m = read_json(&a.join("metrics.json"));
    let c = &m["coordinates"][0];
    assert!(c["var"].is_null() && c["var_ratio"].is_null());
    assert!(c["w1"].as_f64().unwrap().is_finite());
}

#[test]
fn zero_step_training_writes_initial_weights() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write_config(dir.path(), "t.json", &json!({"method": "ResShift", "seed": 4, "train": {"steps": 0}}));
    let out = dir.path().join("out");
    run_ok("train", &cfg_path, &out);
    let r = load(&cfg_path).unwrap().resolve().unwrap();
    let mut expect = Vec::new();
    Trainer::new(r.train).unwrap().net().write_to(&mut expect).unwrap();
    assert_eq!(fs::read(out.join("weights.bin")).unwrap(), expect);
    let (header, rows) = read_csv(&out.join("curve.csv"));
    assert_eq!(header, ["step", "loss"]);
    assert!(rows.is_empty());
    let summary = read_json(&out.join("train.json"));
    assert_eq!(summary["end_step"], json!(0));
    assert!(summary["final_loss"].is_null());
}

#[test]
fn resumed_training_continues_the_same_curve() {
    let dir = TempDir::new().unwrap();
    // the learning-rate schedule must span the whole run in both halves
    let schedule = json!({"kind": "Cosine", "horizon": 40, "floor": 0.0});
    let train = |steps: usize| json!({"steps": steps, "batch": 16, "hidden": [8], "lr_schedule": schedule});
    let full = write_config(dir.path(), "full.json", &json!({"method": "BBDM", "seed": 2, "train": train(40)}));
    let half = write_config(dir.path(), "half.json", &json!({"method": "BBDM", "seed": 2, "train": train(20)}));
    run_ok("train", &full, &dir.path().join("full"));
    run_ok("train", &half, &dir.path().join("half"));
    let mut resumed = train(40);
    resumed["resume"] = json!({"weights": "half/weights.bin", "checkpoint": "half/checkpoint.bin"});
    let cont = write_config(dir.path(), "cont.json", &json!({"method": "BBDM", "seed": 2, "train": resumed}));
    run_ok("train", &cont, &dir.path().join("cont"));

    let (_, whole) = read_csv(&dir.path().join("full/curve.csv"));
    let (_, first) = read_csv(&dir.path().join("half/curve.csv"));
    let (_, rest) = read_csv(&dir.path().join("cont/curve.csv"));
    assert_eq!(whole.len(), 40);
    assert_eq!(first, whole[..20]);
    assert_eq!(rest, whole[20..]);
    assert_eq!(
        fs::read(dir.path().join("full/weights.bin")).unwrap(),
        fs::read(dir.path().join("cont/weights.bin")).unwrap()
    );
    assert_eq!(read_json(&dir.path().join("cont/train.json"))["start_step"], json!(20));
}

#[test]
fn learned_weights_drive_sampling() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "t.json", &json!({"method": "BBDM", "train": {"steps": 30, "batch": 16, "hidden": [8]}}));
    run_ok("train", &cfg, &dir.path().join("net"));
    let s = write_config(
        dir.path(),
        "s.json",
        &json!({"method": "BBDM", "weights": "net/weights.bin", "n_paths": 100, "grid": {"n": 11}, "train": {"hidden": [8]}}),
    );
    run_ok("sample", &s, &dir.path().join("s"));
    assert_eq!(read_json(&dir.path().join("s/metrics.json"))["provenance"], json!("learned"));
}

#[test]
fn sweep_tables_have_one_entry_per_combination() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        &json!({
            "n_paths": 200,
            "sweep": {"methods": ["DM_VP", "FM", "BBDM"], "samplers": ["EulerODE", "Heun2", "Ancestral"], "nfes": [4, 10]}
        }),
    );
    let out = dir.path().join("out");
    run_ok("sweep", &cfg, &out);
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header, ["nfe", "sampler", "method", "steps", "w1", "mean_error", "var_ratio", "error"]);
    assert_eq!(rows.len(), 2 * 3 * 3);
    for row in &rows {
        let nfe: usize = row[0].parse().unwrap();
        let steps: usize = row[3].parse().unwrap();
        let evals = if row[1] == "Heun2" { 2 } else { 1 };
        assert_eq!(steps, nfe.div_ceil(evals));
        assert!(row[4].parse::<f64>().unwrap() >= 0.0, "{row:?}");
    }
    let (header, table) = read_csv(&out.join("sweep_table.csv"));
    assert_eq!(header, ["nfe", "sampler", "DM_VP", "FM", "BBDM"]);
    assert_eq!(table.len(), 6);
    assert_eq!(read_json(&out.join("sweep.json"))["rows"].as_array().unwrap().len(), 18);
}

#[test]
fn temperature_outputs_cover_every_pair() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        &json!({"n_paths": 300, "grid": {"kind": "Linear", "n": 31}, "temperature": {"methods": ["InDI", "GOUB"], "taus": [0.1, 1.0]}}),
    );
    let out = dir.path().join("out");
    run_ok("temperature-study", &cfg, &out);
    let (header, rows) = read_csv(&out.join("temperature.csv"));
    assert_eq!(header[..3], ["method", "tau", "sampler"]);
    assert_eq!(rows.len(), 4);
    let (_, series) = read_csv(&out.join("temperature_series.csv"));
    assert_eq!(series.len(), 4 * 31);
    let doc = read_json(&out.join("temperature.json"));
    assert_eq!(doc["times"].as_array().unwrap().len(), 31);
    assert_eq!(doc["command"], json!("temperature-study"));
}

fn trajectory_rows(path: &Path) -> Vec<(usize, usize, f64)> {
    let (_, rows) = read_csv(path);
    rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), r[3].parse().unwrap())).collect()
}

/// Smaller runs of the shipped trajectory presets.
fn trajectory_run(name: &str) -> (Vec<(usize, usize, f64)>, Value) {
    let dir = TempDir::new().unwrap();
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(preset).unwrap()).unwrap();
    cfg["n_paths"] = json!(400);
    let path = write_config(dir.path(), "c.json", &cfg);
    run_ok("sample", &path, &dir.path().join("out"));
    (trajectory_rows(&dir.path().join("out/trajectories.csv")), read_json(&dir.path().join("out/metrics.json")))
}

fn spread_at(rows: &[(usize, usize, f64)], step: usize) -> f64 {
    let xs: Vec<f64> = rows.iter().filter(|r| r.1 == step).map(|r| r.2).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[test]
fn trajectory_presets_show_expected_shapes() {
    let (vp, vp_metrics) = trajectory_run("trajectories_dm_vp.json");
    let (bb, bb_metrics) = trajectory_run("trajectories_bbdm.json");
    let (ir, _) = trajectory_run("trajectories_ir_sde.json");
    let last = vp.iter().map(|r| r.1).max().unwrap();
    assert_eq!(vp.iter().filter(|r| r.1 == 0).count(), 40);

    // diffusion starts from broad noise, the bridge from the observation itself
    assert!(spread_at(&vp, 0) > 0.8);
    assert_eq!(spread_at(&bb, 0), 0.0);
    // the mean-reverting process starts near y with temperature-sized spread
    let s = spread_at(&ir, 0);
    assert!(s > 0.15 && s < 0.6, "{s}");

    // all end near the posterior
    for m in [&vp_metrics, &bb_metrics] {
        let w1 = m["coordinates"][0]["w1"].as_f64().unwrap();
        assert!(w1 < 0.15, "{w1}");
    }
    assert!(spread_at(&bb, last) > 0.1);
}
