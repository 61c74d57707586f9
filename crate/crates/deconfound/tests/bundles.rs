use std::path::Path;

use deconfound::bundle::{aggregate, checklist, report, BundleError, ResultBundle, Verdict};
use deconfound::experiments::Row;
use deconfound::stats::wilcoxon_greater;
use deconfound::{run, Cache, ExperimentConfig, ExperimentKind};

fn tiny(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.seeds = vec![0, 1];
    c.output_dir = dir.to_path_buf();
    c.sizes = vec![400];
    c.transitions = 400;
    c.train.epochs = 2;
    c.train.hidden = vec![8];
    c.eval_episodes = 2;
    c
}

#[test]
fn rerun_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(ExperimentKind::GapCurve, dir.path());
    let first = run(&config, &Cache::default()).unwrap();
    let csv = std::fs::read(dir.path().join("results.csv")).unwrap();
    run(&config, &Cache::default()).unwrap();
    assert_eq!(csv, std::fs::read(dir.path().join("results.csv")).unwrap());
    // One row per (size, scenario, seed) for each metric.
    let returns = first.rows.iter().filter(|r| r.metric == "mean_return").count();
    assert_eq!(returns, 2 * 2);

    let threaded = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        threads: 2,
        output_dir: threaded.path().to_path_buf(),
        ..config
    };
    run(&config, &Cache::default()).unwrap();
    assert_eq!(csv, std::fs::read(threaded.path().join("results.csv")).unwrap());
}

#[test]
fn saved_bundle_loads_with_the_same_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny(ExperimentKind::EntangledAblation, dir.path());
    let config = ExperimentConfig {
        exec_episodes: 3,
        query: deconfound_core::intervention::QueryConfig {
            budget: 3,
            ..Default::default()
        },
        ..config
    };
    let ran = run(&config, &Cache::default()).unwrap();
    let loaded = ResultBundle::load(dir.path()).unwrap();
    assert_eq!(loaded.config, ran.config);
    assert_eq!(loaded.rows, ran.rows);
    assert_eq!(loaded.aggregates, ran.aggregates);
    assert_eq!(loaded.aggregates.len(), 4, "2 x 2 table of modes and representations");
    for seed in [0, 1] {
        let seed_dir = dir.path().join(format!("seed_{seed}"));
        for file in ["rows.csv", "trace_exec_entangled.csv", "trace_query_disentangled.csv", "demos_confounded_400.txt"] {
            assert!(seed_dir.join(file).is_file(), "{file}");
        }
    }
}

#[test]
fn failed_seeds_leave_a_partial_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.txt");
    std::fs::write(&garbage, "demo-file v1\nnot a scenario\n").unwrap();
    let mut config = tiny(ExperimentKind::GapCurve, &dir.path().join("out"));
    config.demo_file = Some(garbage);
    match run(&config, &Cache::default()) {
        Err(BundleError::Partial { total, failures, .. }) => {
            assert_eq!(total, 2);
            assert_eq!(failures.len(), 2);
        }
        other => panic!("expected a partial result, got {other:?}"),
    }
    let loaded = ResultBundle::load(&dir.path().join("out")).unwrap();
    assert_eq!(loaded.failures.len(), 2);
    assert!(loaded.rows.is_empty());
}

fn row(seed: u64, condition: &str, metric: &str, value: f64) -> Row {
    Row {
        seed,
        condition: condition.into(),
        metric: metric.into(),
        value,
    }
}

fn golden(kind: ExperimentKind, rows: Vec<Row>) -> ResultBundle {
    let mut config = ExperimentConfig::new(kind);
    config.seeds = (0..20).collect();
    ResultBundle {
        aggregates: aggregate(&rows),
        config,
        rows,
        artifact_version: "golden".into(),
        timestamp_unix: 0,
        failures: Vec::new(),
    }
}

/// Paired returns whose differences spread over `shift ± 12`.
fn gap_rows(shift: f64) -> Vec<Row> {
    let mut rows = Vec::new();
    for s in 0..20u64 {
        let noise = ((s * 7919) % 13) as f64 - 6.0;
        let orig = -120.0 + noise;
        let conf = -120.0 - shift + 3.0 * noise;
        rows.push(row(s, "size=5000;scenario=original", "mean_return", orig));
        rows.push(row(s, "size=5000;scenario=confounded", "mean_return", conf));
        rows.push(row(s, "size=5000;scenario=original", "heldout_accuracy", 0.90));
        rows.push(row(s, "size=5000;scenario=confounded", "heldout_accuracy", 0.95));
    }
    rows
}

#[test]
fn golden_bundles_match_hand_computed_verdicts() {
    let root = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (name, shift) in [("wide", 30.0), ("narrow", 20.0)] {
        let b = golden(ExperimentKind::GapCurve, gap_rows(shift));
        let dir = root.path().join(name);
        b.save(&dir).unwrap();
        paths.push(dir);
    }

    // The noise terms do not average to exactly zero, so recompute the gap from the rows.
    let rows = gap_rows(30.0);
    let pick = |c: &str| -> Vec<f64> { rows.iter().filter(|r| r.condition == c && r.metric == "mean_return").map(|r| r.value).collect() };
    let (o, c) = (pick("size=5000;scenario=original"), pick("size=5000;scenario=confounded"));
    let gap = o.iter().sum::<f64>() / 20.0 - c.iter().sum::<f64>() / 20.0;
    let p = wilcoxon_greater(&o, &c);
    assert!(gap >= 25.0 && p < 0.01, "gap {gap}, p {p}");

    let wide = report(&paths[..1]).unwrap();
    assert_eq!(wide.checklist.len(), 9);
    assert_eq!(wide.checklist[0].verdict, Verdict::Pass);
    assert!(wide.checklist[1..].iter().all(|r| r.verdict == Verdict::NotEvaluated));
    let narrow = report(&paths[1..]).unwrap();
    assert_eq!(narrow.checklist[0].verdict, Verdict::Fail);

    // A2: 17 of 20 hits is 85%; returns average -130.
    let mut rows = Vec::new();
    for s in 0..20u64 {
        let c = "scenario=confounded";
        rows.push(row(s, c, "true_graph", if s < 17 { 1.0 } else { 0.0 }));
        rows.push(row(s, c, "mode_return", if s % 2 == 0 { -125.0 } else { -135.0 }));
        rows.push(row(s, c, "episodes", 50.0));
    }
    let pass = golden(ExperimentKind::PolicyExecIntervention, rows.clone());
    assert_eq!(checklist(&[pass])[1].verdict, Verdict::Pass);
    for r in rows.iter_mut().filter(|r| r.metric == "true_graph" && r.seed >= 15) {
        r.value = 0.0;
    }
    let fail = golden(ExperimentKind::PolicyExecIntervention, rows);
    assert_eq!(checklist(&[fail])[1].verdict, Verdict::Fail, "15 of 20 is under 80%");
}

#[test]
fn other_schema_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    golden(ExperimentKind::GapCurve, gap_rows(30.0)).save(dir.path()).unwrap();
    let manifest = dir.path().join("bundle.txt");
    let text = std::fs::read_to_string(&manifest).unwrap().replace("schema_version 1", "schema_version 7");
    std::fs::write(&manifest, text).unwrap();
    assert!(matches!(ResultBundle::load(dir.path()), Err(BundleError::Migration { found: 7, .. })));
}
