use std::path::Path;
use std::process::{Command, Output};

fn bornforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bornforge")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn born_qubit_reproduces_born_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = bornforge(&[
        "born",
        "--n",
        "2",
        "--state",
        "[[0.8366,0],[0,0.5477]]",
        "--trials",
        "1000000",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result = json(&dir.path().join("result.json"));
    let f0 = result["report"]["frequencies"][0].as_f64().unwrap();
    assert!((f0 - 0.7).abs() < 0.003, "{f0}");

    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("trial_count,tv_distance,freq_1,freq_2\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(!csv.contains('\r'));
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn eigenstates_give_certain_outcomes() {
    let out = bornforge(&["born", "--state", "[[1,0],[0,0]]", "--trials", "5000"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["frequencies"], serde_json::json!([1.0, 0.0]));

    let out = bornforge(&["simplex", "--state", "[1,0,0]", "--trials", "5000"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["frequencies"], serde_json::json!([1.0, 0.0, 0.0]));
}

#[test]
fn simplex_three_outcomes_pass() {
    let out = bornforge(&["simplex", "--state", "[0.5,0.3,0.2]", "--trials", "1000000"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn input_errors_exit_with_one() {
    assert_eq!(code(&bornforge(&["born", "--n", "2", "--trials", "0"])), 1);
    let out = bornforge(&["simplex", "--state", "[0.5,0.6]"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not normalized"));
    assert_eq!(code(&bornforge(&["born", "--state", "random"])), 1);
    assert_eq!(code(&bornforge(&["born", "--n", "3", "--state", "[[1,0],[0,0]]"])), 1);
    assert_eq!(code(&bornforge(&["simplex", "--state", "[[1,0],[0,0]]"])), 1);
    assert_eq!(code(&bornforge(&["frobnicate"])), 1);
    assert_eq!(code(&bornforge(&["born", "--trials", "many"])), 1);
}

#[test]
fn omega_check_commands() {
    for n in ["2", "4"] {
        let out = bornforge(&["omega-check", "--n", n, "--samples", "100000", "--bins", "50"]);
        assert_eq!(code(&out), 0);
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(v["p_value"].as_f64().unwrap() > 0.001);
    }
    let out = bornforge(&["omega-check", "--samples", "10", "--bins", "50"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient samples"));
}

#[test]
fn random_state_is_echoed_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out =
            bornforge(&["born", "--n", "3", "--trials", "20000", "--seed", "9", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let state = &json(&a.path().join("manifest.json"))["config"]["state"];
    assert_eq!(state.as_array().unwrap().len(), 3);
    assert!(state[0].is_array());
    for f in ["result.json", "trace.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_bornforge"))
            .args(["simplex", "--state", "[0.4,0.4,0.2]", "--trials", "300000", "--seed", "5"])
            .env("BORNFORGE_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(one.stdout, run("3").stdout);
    assert_eq!(one.stdout, run("0").stdout);
    assert_eq!(code(&run("lots")), 1);
}

const ONE_BORN: &str = r#"
[[experiment]]
kind = "born"
state = [[0.6, 0.0], [0.0, 0.8]]
trials = 20000
"#;

#[test]
fn suite_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.toml");
    std::fs::write(&config, ONE_BORN).unwrap();
    let out_dir = dir.path().join("out");
    let out = bornforge(&[
        "suite",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> =
        std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["00-born.json", "00-born.trace.csv", "manifest.json"]);
    let manifest = json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["results"][0]["result"], "00-born.json");
    assert!(manifest["duration_secs"].is_number());
}

#[test]
fn suite_accepts_json_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("suite.json");
    std::fs::write(
        &config,
        r#"{"seed": 4, "experiments": [{"kind": "alpha", "n": 3, "pairs": 1000, "range": [0.0, 0.5], "proportional": true}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bornforge(&["suite", "--config", config.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("00-alpha.json").exists());
}

#[test]
fn suite_reports_config_errors_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[[experiment]]\nkind = \"teleport\"\n").unwrap();
    let out = bornforge(&[
        "suite",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("teleport"), "{err}");
}

#[test]
fn failing_criterion_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fail.toml");
    // A uniform mixture never violates linearity, so expecting a violation fails.
    std::fs::write(
        &config,
        r#"
[[experiment]]
kind = "mixture-violation"
components = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
weights = [0.5, 0.5]
trials = 20000
epsilon = 0.1
weight = 0.0
"#,
    )
    .unwrap();
    let out = bornforge(&[
        "suite",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}
