use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_racelab");

const SMALL: &str = "track = \"oval\"\n[train]\nn_envs = 2\nrollout_horizon = 64\nbatch_size = 64\n\
                     epochs_per_update = 1\nmax_steps = 256\neval_interval = 256\neval_max_steps = 100\n\
                     shared_layers = [8]\nvalue_layers = []\n";

fn racelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(cwd).env_remove("RACELAB_OUTPUT_ROOT").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(racelab(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(racelab(&["train", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(racelab(&["train", "--mode", "rwd"], dir.path()).status.code(), Some(1));
}

#[test]
fn generated_oval_has_stadium_length() {
    let dir = tempfile::tempdir().unwrap();
    let o = racelab(&["track", "generate", "oval", "--out", "oval.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let length: f64 = text.split("L = ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!((length - (200.0 + 60.0 * std::f64::consts::PI)).abs() < 0.05, "{text}");
    let o = racelab(&["track", "validate", "oval.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validate_lists_problems_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"name":"bad","closed":false,"points":[{"x":0,"y":0,"half_width":0},{"x":10,"y":0,"half_width":5}]}"#,
    )
    .unwrap();
    let o = racelab(&["track", "validate", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("half_width"), "{}", stderr(&o));
}

#[test]
fn full_scale_circuit_is_long_enough() {
    let dir = tempfile::tempdir().unwrap();
    let o = racelab(&["track", "info", "paper_scale"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("length:")).unwrap();
    let length: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(length >= 3900.0, "{line}");
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(racelab(&["train", "--config", "missing.toml"], p).status.code(), Some(1));
    std::fs::write(p.join("unknown.toml"), "[train]\nlearning_speed = 3\n").unwrap();
    assert_eq!(racelab(&["train", "--config", "unknown.toml"], p).status.code(), Some(1));
    assert_eq!(racelab(&["train", "--resume", "--out", "nowhere"], p).status.code(), Some(1));
    assert_eq!(racelab(&["analyze"], p).status.code(), Some(1));
    assert_eq!(racelab(&["eval", "--checkpoint", "missing.ckpt"], p).status.code(), Some(1));
}

#[test]
fn train_eval_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("small.toml"), SMALL).unwrap();
    let o = racelab(&["train", "--config", "small.toml", "--deterministic", "--out", "run"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(p.join("run/config.toml").exists());
    assert!(p.join("run/train_log.jsonl").exists());
    // the output directory is never reused silently
    let o = racelab(&["train", "--config", "small.toml", "--out", "run"], p);
    assert_eq!(o.status.code(), Some(1));

    let ckpt = p.join("run/checkpoints/step_000000000256.ckpt");
    let ckpt = ckpt.to_string_lossy();
    let o = racelab(&["eval", "--checkpoint", &ckpt, "--episodes", "2", "--out", "ev"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(p.join("ev/index.json").exists());
    assert!(p.join("ev/episode_001.csv").exists());

    // an active-mode policy cannot drive the passive action space
    let o = racelab(&["eval", "--checkpoint", &ckpt, "--mode", "passive_4wd", "--out", "ev2"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension"), "{}", stderr(&o));

    let o = racelab(&["analyze", "ev/episode_000.csv", "--log", "run/train_log.jsonl", "--out", "an"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("warnings: 0"));
    assert!(p.join("an/learning_curve.csv").exists());
    assert!(p.join("an/episode_000_gg.svg").exists());

    let o = racelab(&["train", "--resume", "--max-steps", "384", "--out", "run"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("384 steps"), "{}", stdout(&o));
}

#[test]
fn output_root_relocates_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("small.toml"), SMALL).unwrap();
    let o = Command::new(BIN)
        .args(["train", "--config", "small.toml", "--out", "run"])
        .current_dir(p)
        .env("RACELAB_OUTPUT_ROOT", p.join("root"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(p.join("root/run/config.toml").exists());
}
