//! Running an experiment across seeds, the on-disk result bundle, and the merged report with
//! the acceptance checklist.
//!
//! A bundle directory holds:
//!
//! - `bundle.txt`: schema version, kind, seeds, status and provenance;
//! - `config.txt`: the full configuration snapshot;
//! - `results.csv`: one row per (seed, condition, metric);
//! - `summary.csv`: aggregates over seeds, recomputed from `results.csv` on load;
//! - `FAILED`: present only when some seeds failed, one line per failure;
//! - `seed_<s>/`: per-seed artifacts and that seed's `rows.csv`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::experiments::{run_seed, Cache, Row, SeedRun};
use crate::formats::real;
use crate::stats::{median, summarize, wilcoxon_greater, Summary};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub condition: String,
    pub metric: String,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    pub artifact_version: String,
    pub timestamp_unix: u64,
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: schema version {found}, this build reads version {SCHEMA_VERSION}; rerun the experiment to migrate", path.display())]
    Migration { path: PathBuf, found: u32 },
    #[error("{}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("{} of {} seeds failed; partial results are in {}", failures.len(), total, dir.display())]
    Partial {
        dir: PathBuf,
        total: usize,
        failures: Vec<(u64, String)>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Aggregates per (condition, metric) in order of first appearance.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<f64>> = HashMap::new();
    for r in rows {
        let key = (r.condition.clone(), r.metric.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let summary = summarize(&groups[&key]);
            Aggregate {
                condition: key.0,
                metric: key.1,
                summary,
            }
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, BundleError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<(), BundleError> {
    let mut w = csv_writer(path)?;
    w.write_record(["seed", "condition", "metric", "value"])?;
    for r in rows {
        w.write_record([r.seed.to_string(), r.condition.clone(), r.metric.clone(), real(r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, BundleError> {
    let mut r = csv::Reader::from_path(path)?;
    let malformed = |message: String| BundleError::Malformed {
        path: path.to_path_buf(),
        message,
    };
    if r.headers()?.iter().collect::<Vec<_>>() != ["seed", "condition", "metric", "value"] {
        return Err(malformed("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).ok_or_else(|| malformed(format!("row {}: missing field {k}", i + 1)));
        rows.push(Row {
            seed: field(0)?.parse().map_err(|_| malformed(format!("row {}: bad seed", i + 1)))?,
            condition: field(1)?.to_string(),
            metric: field(2)?.to_string(),
            value: field(3)?.parse().map_err(|_| malformed(format!("row {}: bad value", i + 1)))?,
        });
    }
    Ok(rows)
}

fn write_summary(path: &Path, aggregates: &[Aggregate]) -> Result<(), BundleError> {
    let mut w = csv_writer(path)?;
    w.write_record(["condition", "metric", "n", "mean", "std", "sem", "median"])?;
    for a in aggregates {
        let s = &a.summary;
        w.write_record([a.condition.clone(), a.metric.clone(), s.n.to_string(), real(s.mean), real(s.std), real(s.sem), real(s.median)])?;
    }
    w.flush()?;
    Ok(())
}

impl ResultBundle {
    pub fn seeds(&self) -> &[u64] {
        &self.config.seeds
    }

    fn manifest(&self) -> String {
        let seeds: Vec<String> = self.config.seeds.iter().map(u64::to_string).collect();
        format!(
            "result-bundle\nschema_version {SCHEMA_VERSION}\nkind {}\nseeds {}\nstatus {}\nartifact_version {}\ntimestamp_unix {}\n",
            self.config.kind,
            seeds.join(","),
            if self.failures.is_empty() { "complete" } else { "partial" },
            self.artifact_version,
            self.timestamp_unix
        )
    }

    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), self.config.to_text())?;
        write_rows(&dir.join("results.csv"), &self.rows)?;
        write_summary(&dir.join("summary.csv"), &self.aggregates)?;
        let failed = dir.join("FAILED");
        if self.failures.is_empty() {
            if failed.exists() {
                std::fs::remove_file(&failed)?;
            }
        } else {
            let mut f = std::fs::File::create(&failed)?;
            for (seed, message) in &self.failures {
                writeln!(f, "seed {seed}: {message}")?;
            }
        }
        // Written last: a bundle without a manifest is an interrupted run.
        std::fs::write(dir.join("bundle.txt"), self.manifest())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let manifest_path = dir.join("bundle.txt");
        let manifest = std::fs::read_to_string(&manifest_path)?;
        let malformed = |message: &str| BundleError::Malformed {
            path: manifest_path.clone(),
            message: message.into(),
        };
        let fields: HashMap<&str, &str> = manifest.lines().filter_map(|l| l.split_once(' ')).collect();
        let version: u32 = fields
            .get("schema_version")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| malformed("missing schema_version"))?;
        if version != SCHEMA_VERSION {
            return Err(BundleError::Migration {
                path: manifest_path,
                found: version,
            });
        }
        // A snapshot is not revalidated: referenced files may have moved since the run.
        let config = ExperimentConfig::parse_snapshot(&std::fs::read_to_string(dir.join("config.txt"))?).map_err(|e| {
            BundleError::Malformed {
                path: dir.join("config.txt"),
                message: e.to_string(),
            }
        })?;
        let rows = read_rows(&dir.join("results.csv"))?;
        let failures = match std::fs::read_to_string(dir.join("FAILED")) {
            Ok(text) => text
                .lines()
                .filter_map(|l| {
                    let rest = l.strip_prefix("seed ")?;
                    let (seed, message) = rest.split_once(": ")?;
                    Some((seed.parse().ok()?, message.to_string()))
                })
                .collect(),
            Err(_) => Vec::new(),
        };
        Ok(Self {
            aggregates: aggregate(&rows),
            config,
            rows,
            artifact_version: fields.get("artifact_version").unwrap_or(&"unknown").to_string(),
            timestamp_unix: fields.get("timestamp_unix").and_then(|v| v.parse().ok()).unwrap_or(0),
            failures,
        })
    }
}

/// Runs `config` over its seeds and writes the bundle to `config.output_dir`.
///
/// When some seeds fail, the bundle still holds every finished seed and a `FAILED` marker,
/// and the error carries the failures.
pub fn run(config: &ExperimentConfig, cache: &Cache) -> Result<ResultBundle, BundleError> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), config.to_text())?;
    let work = |seed: u64| -> (u64, Result<Vec<Row>, String>) {
        let mut seed_run = SeedRun::new(config, seed, cache);
        let result = run_seed(&mut seed_run).map_err(|e| e.to_string()).and_then(|_| {
            // Each worker writes only inside its own seed directory.
            write_rows(&seed_run.dir.join("rows.csv"), &seed_run.rows).map_err(|e| e.to_string())?;
            Ok(seed_run.rows)
        });
        (seed, result)
    };
    let results: Vec<(u64, Result<Vec<Row>, String>)> = if config.threads == 1 {
        config.seeds.iter().map(|&s| work(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        pool.install(|| config.seeds.par_iter().map(|&s| work(s)).collect())
    };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(mut r) => rows.append(&mut r),
            Err(message) => failures.push((seed, message)),
        }
    }
    let bundle = ResultBundle {
        aggregates: aggregate(&rows),
        config: config.clone(),
        rows,
        artifact_version: ARTIFACT_VERSION.to_string(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        failures,
    };
    bundle.save(dir)?;
    if bundle.failures.is_empty() {
        Ok(bundle)
    } else {
        Err(BundleError::Partial {
            dir: dir.clone(),
            total: config.seeds.len(),
            failures: bundle.failures,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotEvaluated => "not_evaluated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecklistRow {
    pub id: &'static str,
    pub title: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

pub const CRITERIA: [(&str, &str); 9] = [
    ("A1", "causal-misidentification gap"),
    ("A2", "policy-execution intervention"),
    ("A3", "entanglement ablation"),
    ("A4", "expert-query intervention vs DAgger"),
    ("A5", "passive-discovery failure"),
    ("A6", "energy-model factorization"),
    ("A7", "interventional identifiability oracle"),
    ("A8", "numerics and determinism"),
    ("A9", "variational discovery prior"),
];

pub const MIN_SEEDS: usize = 20;

/// Per-seed values of one (condition, metric) cell across all bundles of `kind`; later
/// bundles override earlier ones seed by seed.
pub struct Lookup<'a> {
    bundles: &'a [ResultBundle],
}

impl<'a> Lookup<'a> {
    pub fn new(bundles: &'a [ResultBundle]) -> Self {
        Self { bundles }
    }

    pub fn has(&self, kind: ExperimentKind) -> bool {
        self.bundles.iter().any(|b| b.config.kind == kind)
    }

    pub fn config(&self, kind: ExperimentKind) -> Option<&'a ExperimentConfig> {
        self.bundles.iter().rev().find(|b| b.config.kind == kind).map(|b| &b.config)
    }

    pub fn cell(&self, kind: ExperimentKind, condition: &str, metric: &str) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for b in self.bundles.iter().filter(|b| b.config.kind == kind) {
            for r in b.rows.iter().filter(|r| r.condition == condition && r.metric == metric) {
                out.insert(r.seed, r.value);
            }
        }
        out
    }

    pub fn values(&self, kind: ExperimentKind, condition: &str, metric: &str) -> Vec<f64> {
        self.cell(kind, condition, metric).into_values().collect()
    }

    /// Conditions of `kind` starting with `prefix`, in first-seen order.
    pub fn conditions(&self, kind: ExperimentKind, prefix: &str) -> Vec<String> {
        let mut seen = Vec::new();
        for b in self.bundles.iter().filter(|b| b.config.kind == kind) {
            for r in &b.rows {
                if r.condition.starts_with(prefix) && !seen.contains(&r.condition) {
                    seen.push(r.condition.clone());
                }
            }
        }
        seen
    }
}

fn paired(a: &BTreeMap<u64, f64>, b: &BTreeMap<u64, f64>) -> (Vec<f64>, Vec<f64>) {
    a.iter().filter_map(|(s, x)| b.get(s).map(|y| (*x, *y))).unzip()
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

type Check = (Verdict, String);

fn missing(kind: ExperimentKind) -> Check {
    (Verdict::NotEvaluated, format!("no {kind} bundle"))
}

fn too_few(n: usize) -> Check {
    (Verdict::NotEvaluated, format!("{n} seeds, {MIN_SEEDS} required"))
}

fn check_a1(l: &Lookup) -> Check {
    let kind = ExperimentKind::GapCurve;
    if !l.has(kind) {
        return missing(kind);
    }
    let orig = l.cell(kind, "size=5000;scenario=original", "mean_return");
    let conf = l.cell(kind, "size=5000;scenario=confounded", "mean_return");
    let (ro, rc) = paired(&orig, &conf);
    if ro.len() < MIN_SEEDS {
        return too_few(ro.len());
    }
    let (ao, ac) = paired(
        &l.cell(kind, "size=5000;scenario=original", "heldout_accuracy"),
        &l.cell(kind, "size=5000;scenario=confounded", "heldout_accuracy"),
    );
    let gap = mean_of(&ro) - mean_of(&rc);
    let acc_gap = mean_of(&ac) - mean_of(&ao);
    let p = wilcoxon_greater(&ro, &rc);
    (
        verdict(gap >= 25.0 && acc_gap >= -0.02 && p < 0.01),
        format!(
            "return gap {gap:.1} (>= 25), accuracy confounded - original {:+.2} pp (>= -2), Wilcoxon p {p:.2e} (< 0.01), {} seeds",
            100.0 * acc_gap,
            ro.len()
        ),
    )
}

fn check_a2(l: &Lookup) -> Check {
    let kind = ExperimentKind::PolicyExecIntervention;
    if !l.has(kind) {
        return missing(kind);
    }
    let cond = "scenario=confounded";
    let hits = l.values(kind, cond, "true_graph");
    if hits.len() < MIN_SEEDS {
        return too_few(hits.len());
    }
    let rate = mean_of(&hits);
    let ret = mean_of(&l.values(kind, cond, "mode_return"));
    let episodes = l.values(kind, cond, "episodes").into_iter().fold(0.0, f64::max);
    (
        verdict(rate >= 0.8 && (-157.0..=-117.0).contains(&ret) && episodes <= 50.0),
        format!(
            "true graph in {:.0}% of {} seeds (>= 80%), mode-graph return {ret:.1} (in [-157, -117]), {episodes} episodes (<= 50)",
            100.0 * rate,
            hits.len()
        ),
    )
}

fn check_a3(l: &Lookup) -> Check {
    let kind = ExperimentKind::EntangledAblation;
    if !l.has(kind) {
        return missing(kind);
    }
    let cell = |mode: &str, rep: &str| l.values(kind, &format!("mode={mode};representation={rep}"), "mode_return");
    let cells = [
        ("policy_execution", "disentangled", -137.0),
        ("policy_execution", "entangled", -145.0),
        ("expert_query", "disentangled", -140.0),
        ("expert_query", "entangled", -165.0),
    ];
    let mut means = Vec::new();
    for (mode, rep, _) in cells {
        let v = cell(mode, rep);
        if v.len() < MIN_SEEDS {
            return too_few(v.len());
        }
        means.push(mean_of(&v));
    }
    let exec_gap = means[0] - means[1];
    let query_gap = means[2] - means[3];
    let within = cells.iter().zip(&means).all(|((_, _, target), m)| (m - target).abs() <= 25.0);
    (
        verdict(exec_gap >= 5.0 && query_gap >= 5.0 && within),
        format!(
            "execution {:.1} vs {:.1} (gap {exec_gap:.1}), queries {:.1} vs {:.1} (gap {query_gap:.1}); gaps >= 5 and means within 25 of -137/-145/-140/-165",
            means[0], means[1], means[2], means[3]
        ),
    )
}

fn check_a4(l: &Lookup) -> Check {
    let (q, d) = (ExperimentKind::ExpertQueryIntervention, ExperimentKind::DaggerCurve);
    if !l.has(q) {
        return missing(q);
    }
    if !l.has(d) {
        return missing(d);
    }
    let cond = "scenario=confounded";
    let (mode, bc) = paired(&l.cell(q, cond, "mode_return"), &l.cell(q, cond, "bc_confounded_return"));
    if mode.len() < MIN_SEEDS {
        return too_few(mode.len());
    }
    let queries = l.values(q, cond, "queries").into_iter().fold(0.0, f64::max);
    let gain: Vec<f64> = mode.iter().zip(&bc).map(|(m, b)| m - b).collect();
    let dagger_at = l.values(d, "summary", "return_at_matched_budget");
    let reach = l.values(d, "summary", "queries_to_reach");
    if dagger_at.len() < MIN_SEEDS {
        return too_few(dagger_at.len());
    }
    let budget = l.config(d).map_or(0, |c| c.dagger_matched_budget);
    let (gain_m, query_m, dagger_m, reach_m) = (median(&gain), median(&mode), median(&dagger_at), median(&reach));
    (
        verdict(queries <= 20.0 && gain_m >= 20.0 && dagger_m < query_m && reach_m > 100.0),
        format!(
            "median gain over confounded BC {gain_m:.1} with <= {queries} queries (>= 20 with <= 20), DAgger at {budget} labels {dagger_m:.1} vs {query_m:.1} (lower), DAgger labels to close {reach_m} (> 100)"
        ),
    )
}

fn check_a5(l: &Lookup) -> Check {
    let kind = ExperimentKind::PassiveDiscovery;
    if !l.has(kind) {
        return missing(kind);
    }
    let dims = l.conditions(kind, "dim=");
    if dims.is_empty() {
        return (Verdict::NotEvaluated, "no MI rows".into());
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for d in &dims {
        let m = mean_of(&l.values(kind, d, "marginal_mi_bits"));
        let c = mean_of(&l.values(kind, d, "conditional_mi_bits"));
        ok &= m > 0.3 && c < 0.1;
        let role = d.split("role=").nth(1).unwrap_or(d);
        parts.push(format!("{role} {m:.3}/{c:.3}"));
    }
    (verdict(ok), format!("marginal/conditional bits: {} (> 0.3 / < 0.1)", parts.join(", ")))
}

fn max_of(l: &Lookup, condition: &str, metric: &str) -> Option<f64> {
    let v = l.values(ExperimentKind::PropositionSuite, condition, metric);
    (!v.is_empty()).then(|| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

fn min_of(l: &Lookup, condition: &str, metric: &str) -> Option<f64> {
    let v = l.values(ExperimentKind::PropositionSuite, condition, metric);
    (!v.is_empty()).then(|| v.into_iter().fold(f64::INFINITY, f64::min))
}

fn check_a6(l: &Lookup) -> Check {
    let kind = ExperimentKind::PropositionSuite;
    if !l.has(kind) {
        return missing(kind);
    }
    let c = "check=factorization";
    match (min_of(l, c, "models"), max_of(l, c, "max_tv_product"), max_of(l, c, "max_tv_sampler")) {
        (Some(models), Some(exact), Some(sampler)) => (
            verdict(models >= 100.0 && exact < 1e-12 && sampler < 0.01),
            format!("{models} models: enumerated vs product TV {exact:.1e} (< 1e-12), sampler TV {sampler:.4} (< 0.01)"),
        ),
        _ => (Verdict::NotEvaluated, "no factorization rows".into()),
    }
}

fn check_a7(l: &Lookup) -> Check {
    let kind = ExperimentKind::PropositionSuite;
    if !l.has(kind) {
        return missing(kind);
    }
    let get = |c: &str, m: &str, f: fn(&Lookup, &str, &str) -> Option<f64>| f(l, c, m);
    match (
        get("check=exhaustive_n2", "passed", min_of),
        get("check=random_n3", "passed", min_of),
        get("check=exhaustive_n2", "violations", max_of),
        get("check=random_n3", "violations", max_of),
        get("check=random_n3", "draws", min_of),
    ) {
        (Some(p2), Some(p3), Some(v2), Some(v3), Some(draws)) => (
            verdict(p2 == 1.0 && p3 == 1.0 && v2 == 0.0 && v3 == 0.0 && draws >= 100.0),
            format!("n = 2 exhaustive: {v2} violations; n = 3: {draws} draws, {v3} violations"),
        ),
        _ => (Verdict::NotEvaluated, "no identifiability rows".into()),
    }
}

fn check_a8(l: &Lookup) -> Check {
    let kind = ExperimentKind::PropositionSuite;
    if !l.has(kind) {
        return missing(kind);
    }
    let c = "check=numerics";
    match (min_of(l, c, "nets"), max_of(l, c, "max_gradient_rel_error"), max_of(l, c, "determinism_failures")) {
        (Some(nets), Some(err), Some(fails)) => (
            verdict(nets >= 50.0 && err < 1e-4 && fails == 0.0),
            format!("{nets} nets: max relative gradient error {err:.1e} (< 1e-4), {fails} determinism failures"),
        ),
        _ => (Verdict::NotEvaluated, "no numerics rows".into()),
    }
}

fn check_a9(l: &Lookup) -> Check {
    let kind = ExperimentKind::VariationalPrior;
    if !l.has(kind) {
        return missing(kind);
    }
    let q_true = l.values(kind, "dataset=synthetic", "q_true");
    let q_nuis = l.values(kind, "dataset=synthetic", "q_nuisance_max");
    let uniform = l.values(kind, "prior=uniform", "episodes_to_true_graph");
    let discovered = l.values(kind, "prior=discovered", "episodes_to_true_graph");
    if q_true.is_empty() || uniform.is_empty() || discovered.is_empty() {
        return (Verdict::NotEvaluated, "incomplete rows".into());
    }
    let (qt, qn, u, d) = (median(&q_true), median(&q_nuis), median(&uniform), median(&discovered));
    (
        verdict(qt > 0.9 && qn < 0.5 && d <= u),
        format!("median q(true) {qt:.3} (> 0.9), q(nuisance) {qn:.3} (< 0.5); median episodes to true graph {d} with prior vs {u} uniform"),
    )
}

pub fn checklist(bundles: &[ResultBundle]) -> Vec<ChecklistRow> {
    let l = Lookup::new(bundles);
    let checks: [fn(&Lookup) -> Check; 9] = [check_a1, check_a2, check_a3, check_a4, check_a5, check_a6, check_a7, check_a8, check_a9];
    CRITERIA
        .iter()
        .zip(checks)
        .map(|((id, title), check)| {
            let (verdict, detail) = check(&l);
            ChecklistRow {
                id,
                title,
                verdict,
                detail,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// (experiment, aggregate) across every bundle, in input order.
    pub summary: Vec<(ExperimentKind, Aggregate)>,
    pub checklist: Vec<ChecklistRow>,
}

pub fn report(paths: &[PathBuf]) -> Result<Report, BundleError> {
    let bundles = paths.iter().map(|p| ResultBundle::load(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(report_bundles(&bundles))
}

pub fn report_bundles(bundles: &[ResultBundle]) -> Report {
    let summary = bundles
        .iter()
        .flat_map(|b| b.aggregates.iter().map(|a| (b.config.kind, a.clone())))
        .collect();
    Report {
        summary,
        checklist: checklist(bundles),
    }
}

impl Report {
    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv_writer(&dir.join("report_summary.csv"))?;
        w.write_record(["experiment", "condition", "metric", "n", "mean", "std", "sem", "median"])?;
        for (kind, a) in &self.summary {
            let s = &a.summary;
            w.write_record([
                kind.name().to_string(),
                a.condition.clone(),
                a.metric.clone(),
                s.n.to_string(),
                real(s.mean),
                real(s.std),
                real(s.sem),
                real(s.median),
            ])?;
        }
        w.flush()?;
        let mut w = csv_writer(&dir.join("checklist.csv"))?;
        w.write_record(["criterion", "title", "verdict", "detail"])?;
        for row in &self.checklist {
            w.write_record([row.id, row.title, row.verdict.name(), &row.detail])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.checklist {
            out.push_str(&format!("{} {:<13} {}: {}\n", row.id, row.verdict.name(), row.title, row.detail));
        }
        out
    }
}
