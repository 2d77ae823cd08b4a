use std::path::Path;
use std::process::{Command, Output};

fn hwcoord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwcoord"))
        .args(args)
        .output()
        .expect("spawn hwcoord")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn short_config(dir: &Path) -> String {
    let path = dir.join("sim.toml");
    std::fs::write(
        &path,
        "horizon_steps = 120\narrival_rate = 3000.0\npenetration = 0.8\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_twice_gives_identical_hashes_and_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let trace = dir.path().join("run.jsonl");
    let trace = trace.to_str().unwrap();
    let a = stdout_json(&hwcoord(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--planner",
        "BK_PBS",
        "--trace",
        trace,
    ]));
    let b = stdout_json(&hwcoord(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--planner",
        "bk-pbs",
    ]));
    assert_eq!(a["hash"], b["hash"]);
    assert_eq!(a["planner"], "BK_PBS");
    assert!(a["spawned"].as_u64().unwrap() > 0);

    let r = stdout_json(&hwcoord(&["replay", "--trace", trace]));
    assert_eq!(r["matches"], true);
    assert_eq!(r["stored_hash"], a["hash"]);
    assert!(r["transitions_checked"].as_u64().unwrap() > 0);
}

#[test]
fn different_seeds_give_different_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let a = stdout_json(&hwcoord(&["simulate", "--config", &cfg, "--seed", "1"]));
    let b = stdout_json(&hwcoord(&["simulate", "--config", &cfg, "--seed", "2"]));
    assert_ne!(a["hash"], b["hash"]);
}

#[test]
fn invalid_config_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "penetration = 1.5\n").unwrap();
    let out = hwcoord(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"no_such_field": 1}"#).unwrap();
    let out = hwcoord(&["simulate", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(
        hwcoord(&["simulate", "--planner", "RL"]).status.code(),
        Some(1)
    );
    let missing = dir.path().join("missing.toml");
    let out = hwcoord(&["sweep", "--spec", missing.to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tampered_trace_fails_replay_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let trace = dir.path().join("run.jsonl");
    let out = hwcoord(&[
        "simulate",
        "--config",
        &cfg,
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let out = hwcoord(&["replay", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_results_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "alphas = [0.4, 0.8]\nlambdas = [2500.0]\nseeds = [0, 1]\nplanners = [\"BK_M_ASTAR\", \"IDM_MOBIL\"]\n\n[base]\nhorizon_steps = 60\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = hwcoord(&[
        "sweep",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "planner,alpha,lambda,seeds,ctrl_collision_rate,mean_delay_s,throughput_vph"
    );
    assert_eq!(lines.count(), 4);
    for name in [
        "per_seed.csv",
        "heatmap_bk_m_astar.csv",
        "heatmap_idm_mobil.csv",
    ] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn collect_data_then_predict_eval() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.csv");
    let clf = dir.path().join("clf.json");
    let out = hwcoord(&[
        "collect-data",
        "--episodes",
        "4",
        "--out",
        ds.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = stdout_json(&hwcoord(&[
        "predict-eval",
        "--dataset",
        ds.to_str().unwrap(),
        "--epochs",
        "5",
        "--save-classifier",
        clf.to_str().unwrap(),
    ]));
    for part in ["ramp", "main"] {
        let oracle = report["partitions"][part]["rollout_oracle"]["accuracy"]
            .as_f64()
            .unwrap();
        assert!(oracle >= 0.95, "{part}: {oracle}");
    }
    assert!(clf.exists());

    // the saved classifier drives the LogisticClassifier predictor
    let cfg = dir.path().join("clf.toml");
    std::fs::write(
        &cfg,
        format!(
            "horizon_steps = 40\npredictor = \"LogisticClassifier\"\nclassifier_path = {:?}\n",
            clf.to_str().unwrap()
        ),
    )
    .unwrap();
    stdout_json(&hwcoord(&["simulate", "--config", cfg.to_str().unwrap()]));
}
