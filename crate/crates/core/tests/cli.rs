use std::path::Path;
use std::process::{Command, Output};

fn ailrs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ailrs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn ailrs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, json: &str) {
    std::fs::write(dir.join("c.json"), json).unwrap();
}

#[test]
fn expert_bc_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, r#"{"eval": {"episodes": 4}}"#);
    let steps: [&[&str]; 4] = [
        &[
            "gen-expert",
            "--config",
            "c.json",
            "--episodes",
            "4",
            "--seed",
            "3",
            "--out",
            "demos.jsonl",
        ],
        &[
            "train",
            "--algo",
            "bc",
            "--config",
            "c.json",
            "--demos",
            "demos.jsonl",
            "--run-dir",
            "run",
        ],
        &[
            "eval",
            "--config",
            "c.json",
            "--ckpt",
            "run/ckpt_final/checkpoint.json",
            "--out",
            "report.csv",
        ],
        &["report", "--run-dir", "run"],
    ];
    for args in steps {
        let out = ailrs(d, args);
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    }
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(
        lines[0],
        "policy_name,episodes,lane_changes_mean,lane_change_reward_mean,collision_rate,count_ratio,reward_ratio,seed"
    );
    assert!(lines[1].starts_with("expert,4,"));
    assert!(lines[2].starts_with("bc:"));
    assert!(d.join("run/lane_change_ratios.csv").exists());
    assert!(d.join("run/run_config.json").exists());
}

#[test]
fn short_ailrs_run_writes_log_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(
        d,
        r#"{"train": {"iterations": 2, "checkpoint_every": 1, "directions": 4, "top_k": 2},
            "eval": {"episodes": 4}}"#,
    );
    let out = ailrs(
        d,
        &[
            "gen-expert",
            "--config",
            "c.json",
            "--episodes",
            "2",
            "--out",
            "demos.jsonl",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let out = ailrs(
        d,
        &[
            "train",
            "--algo",
            "ailrs",
            "--config",
            "c.json",
            "--demos",
            "demos.jsonl",
            "--run-dir",
            "run",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let log = std::fs::read_to_string(d.join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.starts_with(
        "iteration,mean_return,max_return,sigma_r,disc_loss,lane_changes,lane_change_reward,wall_ms\n"
    ));
    for name in ["ckpt_1", "ckpt_2", "ckpt_final"] {
        assert!(
            d.join("run").join(name).join("checkpoint.json").exists(),
            "{name}"
        );
    }
    let out = ailrs(d, &["report", "--run-dir", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read_to_string(d.join("run/training_curve.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn missing_demos_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ailrs(
        dir.path(),
        &[
            "train",
            "--algo",
            "bc",
            "--demos",
            "absent.jsonl",
            "--run-dir",
            "run",
        ],
    );
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("absent.jsonl"), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1, "{msg}");
}

#[test]
fn distinct_diagnostics_for_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = ailrs(d, &["fly"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));

    let out = ailrs(d, &["gen-expert", "--out", "x.jsonl", "--bogus"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--bogus"));

    write_config(d, r#"{"train": {"top_k": 100}}"#);
    let out = ailrs(d, &["gen-expert", "--config", "c.json", "--out", "x.jsonl"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("invalid config"), "{}", stderr(&out));

    let out = ailrs(
        d,
        &["gen-expert", "--config", "nowhere.json", "--out", "x.jsonl"],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.json"));
}

#[test]
fn demos_from_another_env_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ailrs(
        d,
        &["gen-expert", "--episodes", "1", "--out", "demos.jsonl"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    write_config(d, r#"{"env": {"traffic_density": 5.0}}"#);
    let out = ailrs(
        d,
        &[
            "train",
            "--algo",
            "bc",
            "--config",
            "c.json",
            "--demos",
            "demos.jsonl",
            "--run-dir",
            "run",
        ],
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("different env config"),
        "{}",
        stderr(&out)
    );
}
