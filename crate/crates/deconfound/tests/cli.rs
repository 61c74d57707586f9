use std::path::Path;
use std::process::{Command, Output};

fn deconfound(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deconfound"))
        .current_dir(dir)
        .env_clear()
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn step_by_step_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = deconfound(d, &["demo-collect", "--scenario", "confounded", "--seed", "2", "--transitions", "800", "--out", "demos.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let quick = ["--set", "train.epochs=2", "--set", "train.hidden=8"];

    let mut args = vec!["train-graph-policy", "--demos", "demos.txt", "--out", "gp.ckpt", "--log", "gp.csv"];
    args.extend(quick);
    assert_eq!(code(&deconfound(d, &args)), 0);
    let mut args = vec!["train-bc", "--demos", "demos.txt", "--out", "bc.ckpt"];
    args.extend(quick);
    assert_eq!(code(&deconfound(d, &args)), 0);

    let out = deconfound(
        d,
        &["intervene-exec", "--policy", "gp.ckpt", "--seed", "2", "--episodes", "3", "--prior", "0.5,0.5,0.5", "--out", "trace.csv", "--set", "eval.episodes=2"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("graph "));
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);

    let out = deconfound(
        d,
        &["intervene-query", "--policy", "gp.ckpt", "--seed", "2", "--out", "query.csv", "--set", "query.budget=4", "--set", "eval.episodes=2"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("queries 4"));

    for path in ["demos.txt", "gp.ckpt", "gp.csv", "bc.ckpt", "query.csv"] {
        assert!(d.join(path).is_file(), "{path}");
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = deconfound(dir.path(), &["demo-collect", "--out", "x.txt", "--set", "train.epoch=3", "--set", "mi.k=0"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train.epoch") && !err.contains("mi.k"), "{err}");

    let out = deconfound(dir.path(), &["demo-collect", "--out", "x.txt", "--set", "mi.k=0", "--set", "eval.episodes=0"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mi.k") && err.contains("eval.episodes"), "{err}");

    assert_eq!(code(&deconfound(dir.path(), &["run"])), 2);
    std::fs::write(dir.path().join("bad.txt"), "experiment.kind = gap_curve\ndemos.file = missing.txt\n").unwrap();
    assert_eq!(code(&deconfound(dir.path(), &["run", "--config", "bad.txt"])), 2);
    assert_eq!(code(&deconfound(dir.path(), &["demo-collect", "--scenario", "sideways", "--out", "x.txt"])), 2);
}

#[test]
fn runtime_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = deconfound(dir.path(), &["train-bc", "--demos", "nowhere.txt", "--out", "bc.ckpt"]);
    assert_eq!(code(&out), 3);

    std::fs::write(dir.path().join("garbage.txt"), "not a demo file\n").unwrap();
    std::fs::write(
        dir.path().join("run.txt"),
        "experiment.kind = gap_curve\nexperiment.seeds = 0\nexperiment.output_dir = out\ndemos.file = garbage.txt\n",
    )
    .unwrap();
    let out = deconfound(dir.path(), &["run", "--config", "run.txt"]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("out/FAILED").is_file());
    assert!(dir.path().join("out/bundle.txt").is_file());
}

#[test]
fn empty_report_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = deconfound(dir.path(), &["report", "--out", "rep"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().all(|l| l.contains("not_evaluated")));
    let summary = std::fs::read_to_string(dir.path().join("rep/report_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}
