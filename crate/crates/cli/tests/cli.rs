use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn htcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htcp"))
        .args(args)
        .env_remove("HTCP_THREADS")
        .output()
        .expect("binary runs")
}

/// Writes `config`, runs `sub --config .. --out ..`, returns the exit code.
fn run(tmp: &TempDir, sub: &str, config: &Value, extra: &[&str]) -> (i32, std::path::PathBuf) {
    let cfg = tmp.path().join(format!("{sub}.json"));
    fs::write(&cfg, config.to_string()).unwrap();
    let out = tmp.path().join(format!("out-{sub}-{}", extra.join("")));
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = htcp(&args);
    (o.status.code().unwrap(), out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn pareto_compound_tail() -> Value {
    json!({
        "command": "verify",
        "family": { "kind": "pareto_lomax", "alpha": 2.5 },
        "grid": { "step": 0.1, "n_cells": 6000 },
        "check": "theorem11",
        "params": { "lambda": 1.0 },
        "window": { "x_lo": 50.0, "x_hi": 400.0 }
    })
}

fn exp_walk(command: &str) -> Value {
    json!({
        "command": command,
        "family": { "kind": "shifted", "shift": -2.0, "base": { "kind": "exponential", "rate": 1.0 } },
        "grid": { "origin": -2.0, "step": 0.02, "n_cells": 1100 },
        "params": { "paths": 20000, "seed": 3 }
    })
}

#[test]
fn compound_tail_verdict_passes() {
    let tmp = TempDir::new().unwrap();
    let (code, out) = run(&tmp, "verify", &pareto_compound_tail(), &[]);
    assert_eq!(code, 0);
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["passed"], true);
    let limit = v["verdicts"][0]["limit_estimate"].as_f64().unwrap();
    assert!((limit - 1.0).abs() < 0.05, "{limit}");
    let csv = fs::read_to_string(out.join("theorem11.csv")).unwrap();
    assert!(csv.starts_with("x,ratio\n"));
    let manifest = read_json(&out.join("manifest.json"));
    let names: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"verdict.json") && names.contains(&"theorem11.csv"));
}

#[test]
fn exponential_is_not_subexponential() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "command": "verify",
        "family": { "kind": "exponential", "rate": 1.0 },
        "grid": { "step": 0.01, "n_cells": 4000 },
        "check": "subexponential",
        "window": { "x_lo": 5.0, "x_hi": 30.0 }
    });
    let (code, out) = run(&tmp, "verify", &config, &[]);
    assert_eq!(code, 2);
    assert_eq!(read_json(&out.join("verdict.json"))["passed"], false);
}

#[test]
fn series_cap_is_a_compute_error() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "command": "compound",
        "family": { "kind": "exponential", "rate": 1.0 },
        "grid": { "step": 0.1, "n_cells": 200 },
        "params": { "series": "poisson", "lambda": 1000.0 }
    });
    let (code, out) = run(&tmp, "compound", &config, &[]);
    assert_eq!(code, 1);
    assert_eq!(read_json(&out.join("error.json"))["code"], "series_cap");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn compound_writes_density() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "command": "compound",
        "family": { "kind": "exponential", "rate": 1.0 },
        "grid": { "step": 0.01, "n_cells": 4000 },
        "params": { "series": "negative_binomial", "alpha": 1.0, "lambda": 0.5 }
    });
    let (code, out) = run(&tmp, "compound", &config, &[]);
    assert_eq!(code, 0);
    let report = read_json(&out.join("report.json"));
    let total = report["mass"].as_f64().unwrap()
        + report["defect"].as_f64().unwrap()
        + report["residual_weight"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(out.join("density.csv")).unwrap().lines().count() > 4000);
}

#[test]
fn negative_steps_put_all_mass_at_zero() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "command": "walk",
        "family": { "kind": "uniform", "lo": -2.0, "hi": -0.5 },
        "grid": { "origin": -2.0, "step": 0.05, "n_cells": 100 }
    });
    let (code, out) = run(&tmp, "walk", &config, &[]);
    assert_eq!(code, 0);
    let walk = read_json(&out.join("walk.json"));
    assert_eq!(walk["atom"], 1.0);
    assert_eq!(walk["b_partial"], 0.0);
    assert!(out.join("pi.csv").exists());
}

#[test]
fn walk_ladder_agrees_with_spitzer() {
    let tmp = TempDir::new().unwrap();
    let mut config = exp_walk("walk");
    config["params"] = json!({
        "spitzer_depth": 150,
        "ladder": { "f_plus": { "kind": "exponential", "rate": 1.0 }, "lambda_rw": 0.20318786997998006 }
    });
    let (code, out) = run(&tmp, "walk", &config, &[]);
    assert_eq!(code, 0);
    let walk = read_json(&out.join("walk.json"));
    let l1 = walk["ladder"]["density_l1_to_spitzer"].as_f64().unwrap();
    assert!(l1 < 1e-4, "{l1}");
}

#[test]
fn bad_configs_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let mut unknown = pareto_compound_tail();
    unknown["grid"]["cells"] = json!(10);
    assert_eq!(run(&tmp, "verify", &unknown, &[]).0, 64);

    let mut bad_check = pareto_compound_tail();
    bad_check["check"] = json!("no_such_check");
    assert_eq!(run(&tmp, "verify", &bad_check, &[]).0, 64);

    assert_eq!(run(&tmp, "walk", &pareto_compound_tail(), &[]).0, 64);

    let missing = htcp(&["verify", "--config", "/nonexistent/config.json", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(64));

    assert_eq!(htcp(&["verify"]).status.code(), Some(64));
    assert_eq!(htcp(&["--help"]).status.code(), Some(0));
}

#[test]
fn schema_lists_checks() {
    let o = htcp(&["schema", "--check", "theorem42"]);
    assert_eq!(o.status.code(), Some(0));
    let schema: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(schema["properties"]["spitzer_depth"].is_object());
    assert_eq!(htcp(&["schema", "--check", "nope"]).status.code(), Some(64));
}

#[test]
fn simulation_is_reproducible_across_threads() {
    let tmp = TempDir::new().unwrap();
    let config = exp_walk("simulate");
    let (c1, one) = run(&tmp, "simulate", &config, &["--threads", "1"]);
    let (c3, three) = run(&tmp, "simulate", &config, &["--threads", "3"]);
    assert_eq!((c1, c3), (0, 0));
    assert_eq!(
        fs::read(one.join("manifest.json")).unwrap(),
        fs::read(three.join("manifest.json")).unwrap()
    );

    let (c, reseeded) = run(&tmp, "simulate", &config, &["--seed", "4"]);
    assert_eq!(c, 0);
    assert_ne!(
        fs::read(one.join("ecdf.csv")).unwrap(),
        fs::read(reseeded.join("ecdf.csv")).unwrap()
    );
    assert_eq!(read_json(&reseeded.join("montecarlo.json"))["seed"], 4);
}
