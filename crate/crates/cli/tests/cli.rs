use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qfp-herald"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_space() -> Value {
    json!({ "components": 3, "n_modes": 12, "passband": 8, "n_squeezed": 3, "n_c": 12 })
}

fn small_config(dir: &Path) -> PathBuf {
    write_json(
        dir,
        "config.json",
        &json!({
            "schema_version": "1.0",
            "space": small_space(),
            "pso": { "swarm_size": 12, "iterations": 20 },
            "target": { "kind": "even_cat", "alpha": 1.0 }
        }),
    )
}

fn hand_design(dir: &Path, name: &str, params: Vec<f64>, n_c: usize) -> PathBuf {
    let mut space = small_space();
    space["n_c"] = json!(n_c);
    write_json(
        dir,
        name,
        &json!({
            "schema_version": "1.0",
            "kind": "design",
            "space": space,
            "target": { "kind": "even_cat", "alpha": 1.0 },
            "params": params
        }),
    )
}

fn mild_params(r: [f64; 3]) -> Vec<f64> {
    let mut params = vec![0.3, 1.0, 0.25, 2.0];
    params.extend((0..8).map(|k| 0.4 * k as f64));
    params.extend(r);
    params
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn design_writes_a_seeded_result() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("result.json");
    let res = run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "7",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let v = read(&out);
    assert_eq!(v["kind"], "design_result");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["schema_version"], "1.0");
    assert_eq!(v["tables"]["kappa"][0], 4);
    assert_eq!(v["trace"].as_array().unwrap().len(), 21);
    let state = &v["best_by_cost"]["state"];
    assert!(state["probability"].as_f64().unwrap() > 0.0);
    assert!(state["coefficients"][0]["re"].is_f64());
    assert_eq!(
        v["best_by_cost"]["params"].as_array().unwrap().len(),
        4 + 8 + 3
    );
}

#[test]
fn missing_seed_is_drawn_and_recorded() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let out = dir.path().join("result.json");
    let res = run(&["design", "--config", p(&config), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let seed = read(&out)["seed"].as_u64().unwrap();
    let again = dir.path().join("again.json");
    let seed_arg = seed.to_string();
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        &seed_arg,
        "--out",
        p(&again),
    ]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let one = dir.path().join("one.json");
    let four = dir.path().join("four.json");
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "5",
        "--threads",
        "1",
        "--out",
        p(&one),
    ]);
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "5",
        "--threads",
        "4",
        "--out",
        p(&four),
    ]);
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&four).unwrap());
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let malformed = dir.path().join("bad.json");
    std::fs::write(
        &malformed,
        "{\n  \"schema_version\": \"1.0\",\n  \"space\": {,\n}",
    )
    .unwrap();
    let res = run(&["design", "--config", p(&malformed)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("line 3, column"), "{}", stderr(&res));

    let mut space = small_space();
    space["n_squeezed"] = json!(4);
    let even = write_json(
        dir.path(),
        "even.json",
        &json!({ "schema_version": "1.0", "space": space,
                 "target": { "kind": "even_cat", "alpha": 1.0 } }),
    );
    let res = run(&["design", "--config", p(&even)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("odd"), "{}", stderr(&res));

    let newer = write_json(
        dir.path(),
        "newer.json",
        &json!({ "schema_version": "2.0", "space": small_space(),
                 "target": { "kind": "even_cat", "alpha": 1.0 } }),
    );
    let res = run(&["design", "--config", p(&newer)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("newer"));

    let unknown = write_json(
        dir.path(),
        "unknown.json",
        &json!({ "schema_version": "1.0", "space": small_space(), "swarm": 3,
                 "target": { "kind": "even_cat", "alpha": 1.0 } }),
    );
    assert_eq!(code(&run(&["design", "--config", p(&unknown)])), 2);

    let zero_swarm = write_json(
        dir.path(),
        "zero.json",
        &json!({ "schema_version": "1.0", "space": small_space(), "pso": { "swarm_size": 0 },
                 "target": { "kind": "even_cat", "alpha": 1.0 } }),
    );
    assert_eq!(code(&run(&["design", "--config", p(&zero_swarm)])), 2);
}

#[test]
fn evaluate_reproduces_design_record() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let result = dir.path().join("result.json");
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "11",
        "--out",
        p(&result),
    ]);
    let eval = dir.path().join("eval.json");
    let res = run(&["evaluate", p(&result), "--out", p(&eval)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let design = read(&result);
    let evaluation = read(&eval);
    let state = &design["best_by_cost"]["state"];
    for key in ["probability", "fidelity", "cost"] {
        assert_eq!(state[key], evaluation[key], "{key}");
    }
    assert_eq!(state["coefficients"], evaluation["coefficients"]);
    assert_eq!(evaluation["probe_n_c"], 22);
}

#[test]
fn evaluate_reports_convergence() {
    let dir = TempDir::new().unwrap();
    let weak = hand_design(dir.path(), "weak.json", mild_params([0.1, 0.2, 0.1]), 12);
    let out = dir.path().join("weak_eval.json");
    let res = run(&["evaluate", p(&weak), "--n-c", "20", "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let v = read(&out);
    assert_eq!(v["converged"], true);
    assert_eq!(v["space"]["n_c"], 20);
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 21);

    let strong = hand_design(dir.path(), "strong.json", mild_params([1.5, 1.5, 1.5]), 4);
    let out = dir.path().join("strong_eval.json");
    let res = run(&["evaluate", p(&strong), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(read(&out)["converged"], false);
}

#[test]
fn evaluate_vacuum_exits_three() {
    let dir = TempDir::new().unwrap();
    let vacuum = hand_design(dir.path(), "vacuum.json", vec![0.0; 15], 12);
    let res = run(&["evaluate", p(&vacuum)]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}

#[test]
fn wavefunction_of_vacuum() {
    let dir = TempDir::new().unwrap();
    let vacuum = write_json(
        dir.path(),
        "vacuum.json",
        &json!({ "schema_version": "1.0", "kind": "state",
                 "coefficients": [{ "re": 1.0, "im": 0.0 }, { "re": 0.0, "im": 0.0 }] }),
    );
    let out = dir.path().join("wf");
    let res = run(&[
        "wavefunction",
        p(&vacuum),
        "--q-min",
        "-2",
        "--q-max",
        "2",
        "--points",
        "5",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = std::fs::read_to_string(out.join("wavefunction.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q,re_psi,im_psi,abs_psi_sq"));
    let center: Vec<f64> = lines
        .nth(2)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(center[0], 0.0);
    assert!((center[3] - std::f64::consts::PI.powf(-0.5)).abs() < 1e-12);
    let fock = std::fs::read_to_string(out.join("fock.csv")).unwrap();
    assert_eq!(fock, "n,probability\n0,1\n1,0\n");
    assert!(!out.join("target_fock.csv").exists());

    let res = run(&[
        "wavefunction",
        p(&vacuum),
        "--points",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn wavefunction_of_even_cat_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let result = dir.path().join("result.json");
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "2",
        "--out",
        p(&result),
    ]);
    let out = dir.path().join("result");
    let res = run(&[
        "wavefunction",
        p(&result),
        "--points",
        "121",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for name in ["wavefunction.csv", "target_wavefunction.csv"] {
        let rows: Vec<Vec<f64>> = std::fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 121);
        for (a, b) in rows.iter().zip(rows.iter().rev()) {
            assert_eq!(a[0], -b[0]);
            assert!((a[3] - b[3]).abs() < 1e-9, "{name} at q = {}", a[0]);
        }
    }
}

#[test]
fn oracle_check_passes_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let res = run(&["oracle-check", "--seed", "4", "--out", p(&a)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    run(&["oracle-check", "--seed", "4", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read(&a);
    assert_eq!(v["trials"], 50);
    assert_eq!(v["pass"], true);
    assert!(v["max_delta_population"].as_f64().unwrap() <= 1e-6);

    let res = run(&["oracle-check", "--trials", "0", "--seed", "1"]);
    assert_eq!(code(&res), 0);
    assert!(stderr(&res).contains("vacuous"));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn tables_reports_sizes() {
    let res = run(&["tables", "--n-s", "1", "--n-squeezed", "3", "--n-c", "4"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["kappa"], json!([4, 8, 12, 16, 20]));
    assert_eq!(v["total_rows"], 60);

    assert_eq!(code(&run(&["tables", "--n-squeezed", "4"])), 2);
}

#[test]
fn report_bundles_results() {
    let dir = TempDir::new().unwrap();
    let config = small_config(dir.path());
    let results = dir.path().join("results");
    std::fs::create_dir(&results).unwrap();
    let result = results.join("a1.json");
    run(&[
        "design",
        "--config",
        p(&config),
        "--seed",
        "3",
        "--out",
        p(&result),
    ]);
    run(&["wavefunction", p(&result), "--out", p(&results.join("a1"))]);
    run(&["evaluate", p(&result), "--out", p(&results.join("b.json"))]);
    std::fs::write(results.join("notes.json"), "{\"hello\": 1}").unwrap();

    let bundle = dir.path().join("bundle.json");
    let res = run(&["report", p(&results), "--out", p(&bundle)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(stderr(&res).contains("skipped"));
    let v = read(&bundle);
    assert_eq!(v["kind"], "bundle");
    let records = v["records"].as_array().unwrap();
    assert!(records.len() >= 2);
    assert_eq!(records[0]["selection"], "cost");
    assert_eq!(records[0]["alpha"], 1.0);
    assert!(records[0]["wavefunction_csv"]
        .as_str()
        .unwrap()
        .ends_with("wavefunction.csv"));
    assert_eq!(records.last().unwrap()["selection"], "evaluation");

    std::fs::write(
        results.join("z.json"),
        "{\"schema_version\": \"9.0\", \"kind\": \"evaluation\"}",
    )
    .unwrap();
    assert_eq!(code(&run(&["report", p(&results)])), 2);
}
