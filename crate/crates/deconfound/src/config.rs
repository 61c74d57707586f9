//! Experiment configuration: flat `section.key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma separated. Every key
//! has a default, so an empty file plus `experiment.kind` is a valid configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use deconfound_core::discovery::fcm::FcmSpec;
use deconfound_core::discovery::VariationalConfig;
use deconfound_core::expert::ScriptedExpert;
use deconfound_core::intervention::{Expectation, InterventionConfig, QueryConfig};
use deconfound_core::nn::Activation;
use deconfound_core::policy::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    GapCurve,
    PolicyExecIntervention,
    ExpertQueryIntervention,
    PassiveDiscovery,
    VariationalPrior,
    DaggerCurve,
    EntangledAblation,
    PropositionSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::GapCurve,
        ExperimentKind::PolicyExecIntervention,
        ExperimentKind::ExpertQueryIntervention,
        ExperimentKind::PassiveDiscovery,
        ExperimentKind::VariationalPrior,
        ExperimentKind::DaggerCurve,
        ExperimentKind::EntangledAblation,
        ExperimentKind::PropositionSuite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::GapCurve => "gap_curve",
            ExperimentKind::PolicyExecIntervention => "policy_exec_intervention",
            ExperimentKind::ExpertQueryIntervention => "expert_query_intervention",
            ExperimentKind::PassiveDiscovery => "passive_discovery",
            ExperimentKind::VariationalPrior => "variational_prior",
            ExperimentKind::DaggerCurve => "dagger_curve",
            ExperimentKind::EntangledAblation => "entangled_ablation",
            ExperimentKind::PropositionSuite => "proposition_suite",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rejected field and the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub fields: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.fields {
            write!(f, "\n  {}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(field: &str, message: impl Into<String>) -> Self {
        Self {
            fields: vec![FieldError {
                field: field.into(),
                message: message.into(),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker threads for the seed fan-out; 0 lets the pool decide.
    pub threads: usize,

    pub expert: ScriptedExpert,
    pub transitions: usize,
    /// Dataset sizes swept by the gap curve.
    pub sizes: Vec<usize>,
    /// Load this demonstration file instead of collecting fresh demonstrations.
    pub demo_file: Option<PathBuf>,

    pub train: TrainConfig,
    pub eval_episodes: usize,
    pub eval_seed: u64,

    pub intervention: InterventionConfig,
    pub exec_episodes: usize,
    pub query: QueryConfig,

    pub dagger_iterations: usize,
    pub dagger_rollouts: usize,
    pub dagger_labels: Option<usize>,
    pub dagger_warm_start: bool,
    /// Budget at which DAgger is compared with the expert-query intervention.
    pub dagger_matched_budget: u64,
    /// The DAgger gap closes once within this many reward units of original-BC.
    pub dagger_margin: f64,

    pub mi_samples: usize,
    pub mi_k: usize,

    pub variational: VariationalConfig,
    pub variational_samples: usize,
    pub variational_mc: usize,
    pub prior_clamp: f64,
    /// Longest run of execution episodes when measuring episodes-to-true-graph.
    pub prior_max_episodes: usize,

    pub fcm: FcmSpec,
    pub proposition_trials_n2: usize,
    pub proposition_draws_n3: usize,
    pub factorization_models: usize,
    pub factorization_draws: usize,
    pub gradient_nets: usize,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        let train = TrainConfig::default();
        Self {
            kind,
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("results").join(kind.name()),
            threads: 0,
            expert: ScriptedExpert::default(),
            transitions: 5000,
            sizes: vec![500, 1000, 2000, 5000],
            demo_file: None,
            variational: VariationalConfig {
                train: train.clone(),
                ..VariationalConfig::default()
            },
            train,
            eval_episodes: 30,
            eval_seed: 0x4556_414C,
            intervention: InterventionConfig::default(),
            exec_episodes: 50,
            query: QueryConfig::default(),
            dagger_iterations: 10,
            dagger_rollouts: 1,
            dagger_labels: Some(20),
            dagger_warm_start: false,
            dagger_matched_budget: 20,
            dagger_margin: 15.0,
            mi_samples: 10_000,
            mi_k: deconfound_core::discovery::mi::DEFAULT_K,
            variational_samples: 5000,
            variational_mc: 256,
            prior_clamp: 0.05,
            prior_max_episodes: 50,
            fcm: FcmSpec::default(),
            proposition_trials_n2: 3,
            proposition_draws_n3: 100,
            factorization_models: 100,
            factorization_draws: 100_000,
            gradient_nets: 50,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_inner(text, true)
    }

    /// Parses a stored snapshot without validating it against the current filesystem.
    pub fn parse_snapshot(text: &str) -> Result<Self, ConfigError> {
        Self::parse_inner(text, false)
    }

    fn parse_inner(text: &str, validate: bool) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim().to_string();
                    if entries.insert(k.clone(), v.trim().to_string()).is_some() {
                        errors.push(FieldError {
                            field: k,
                            message: format!("set twice (line {})", i + 1),
                        });
                    }
                }
                None => errors.push(FieldError {
                    field: format!("line {}", i + 1),
                    message: "expected `key = value`".into(),
                }),
            }
        }
        let kind = match entries.remove("experiment.kind") {
            Some(v) => match v.parse() {
                Ok(k) => Some(k),
                Err(e) => {
                    errors.push(FieldError {
                        field: "experiment.kind".into(),
                        message: e,
                    });
                    None
                }
            },
            None => {
                errors.push(FieldError {
                    field: "experiment.kind".into(),
                    message: "required".into(),
                });
                None
            }
        };
        let mut config = ExperimentConfig::new(kind.unwrap_or(ExperimentKind::GapCurve));
        for (key, value) in &entries {
            if let Err(message) = config.set(key, value) {
                errors.push(FieldError {
                    field: key.clone(),
                    message,
                });
            }
        }
        if errors.is_empty() && validate {
            if let Err(mut e) = config.validate() {
                errors.append(&mut e.fields);
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError { fields: errors })
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::single("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Assigns one key. Unknown keys are errors so that typos never go unnoticed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "experiment.kind" => self.kind = value.parse()?,
            "experiment.seeds" => self.seeds = parse_seeds(value)?,
            "experiment.output_dir" => self.output_dir = PathBuf::from(value),
            "experiment.threads" => self.threads = num(value)?,

            "expert.slope" => self.expert.slope = num(value)?,
            "expert.pivot" => self.expert.pivot = num(value)?,
            "demos.transitions" => self.transitions = num(value)?,
            "demos.sizes" => self.sizes = list(value)?,
            "demos.file" => self.demo_file = Some(PathBuf::from(value)),

            "train.epochs" => self.train.epochs = num(value)?,
            "train.batch_size" => self.train.batch_size = num(value)?,
            "train.learning_rate" => self.train.learning_rate = num(value)?,
            "train.hidden" => self.train.hidden = list(value)?,
            "train.activation" => {
                self.train.activation = Activation::from_name(value).ok_or_else(|| format!("unknown activation `{value}`"))?
            }
            "train.validation_fraction" => self.train.validation_fraction = num(value)?,
            "train.standardize" => self.train.standardize = flag(value)?,
            "eval.episodes" => self.eval_episodes = num(value)?,
            "eval.seed" => self.eval_seed = num(value)?,

            "intervention.episodes" => self.exec_episodes = num(value)?,
            "intervention.ridge" => self.intervention.ridge = num(value)?,
            "intervention.tau" => self.intervention.tau = num(value)?,
            "intervention.anneal" => self.intervention.anneal = flag(value)?,
            "intervention.tau_final" => self.intervention.tau_final = num(value)?,

            "query.budget" => self.query.budget = num(value)?,
            "query.collect_episodes" => self.query.collect_episodes = num(value)?,
            "query.graph_samples" => self.query.graph_samples = num(value)?,
            "query.rounds" => self.query.rounds = num(value)?,
            "query.random_states" => self.query.random_states = flag(value)?,
            "query.expectation" => {
                self.query.expectation = match value {
                    "exact" => Expectation::Exact,
                    v => match v.strip_prefix("sampled:") {
                        Some(n) => Expectation::Sampled(num(n)?),
                        None => return Err(format!("expected `exact` or `sampled:<count>`, found `{value}`")),
                    },
                }
            }

            "dagger.iterations" => self.dagger_iterations = num(value)?,
            "dagger.rollouts_per_iter" => self.dagger_rollouts = num(value)?,
            "dagger.labels_per_iter" => {
                self.dagger_labels = if value == "all" { None } else { Some(num(value)?) }
            }
            "dagger.warm_start" => self.dagger_warm_start = flag(value)?,
            "dagger.matched_budget" => self.dagger_matched_budget = num(value)?,
            "dagger.margin" => self.dagger_margin = num(value)?,

            "mi.samples" => self.mi_samples = num(value)?,
            "mi.k" => self.mi_k = num(value)?,

            "variational.latent_dim" => self.variational.latent_dim = num(value)?,
            "variational.infer_hidden" => self.variational.infer_hidden = list(value)?,
            "variational.recon_hidden" => self.variational.recon_hidden = list(value)?,
            "variational.epochs" => self.variational.train.epochs = num(value)?,
            "variational.learning_rate" => self.variational.train.learning_rate = num(value)?,
            "variational.prior_strength" => self.variational.prior_strength = num(value)?,
            "variational.gumbel_tau" => self.variational.gumbel_tau = num(value)?,
            "variational.anneal_gumbel" => self.variational.anneal_gumbel = flag(value)?,
            "variational.gumbel_tau_final" => self.variational.gumbel_tau_final = num(value)?,
            "variational.samples" => self.variational_samples = num(value)?,
            "variational.mc_samples" => self.variational_mc = num(value)?,
            "variational.prior_clamp" => self.prior_clamp = num(value)?,
            "variational.max_episodes" => self.prior_max_episodes = num(value)?,

            "proposition.domain" => self.fcm.domain = num(value)?,
            "proposition.z_values" => self.fcm.z_values = num(value)?,
            "proposition.actions" => self.fcm.actions = num(value)?,
            "proposition.faithfulness" => self.fcm.faithfulness = num(value)?,
            "proposition.resample_cap" => self.fcm.resample_cap = num(value)?,
            "proposition.trials_n2" => self.proposition_trials_n2 = num(value)?,
            "proposition.draws_n3" => self.proposition_draws_n3 = num(value)?,
            "proposition.factorization_models" => self.factorization_models = num(value)?,
            "proposition.factorization_draws" => self.factorization_draws = num(value)?,
            "proposition.gradient_nets" => self.gradient_nets = num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut fields = Vec::new();
        let mut bad = |field: &str, ok: bool, message: &str| {
            if !ok {
                fields.push(FieldError {
                    field: field.into(),
                    message: message.into(),
                });
            }
        };
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        bad("experiment.seeds", !self.seeds.is_empty(), "at least one seed is required");
        bad("experiment.seeds", sorted.len() == self.seeds.len(), "seeds must be distinct");
        bad("demos.transitions", self.transitions > 0, "must be positive");
        bad("demos.sizes", !self.sizes.is_empty() && self.sizes.iter().all(|&s| s > 0), "must be a non-empty list of positive sizes");
        if let Some(path) = &self.demo_file {
            bad("demos.file", path.is_file(), "file does not exist");
        }
        bad("expert.slope", self.expert.slope.is_finite(), "must be finite");
        bad("expert.pivot", self.expert.pivot.is_finite(), "must be finite");
        bad("train.epochs", self.train.epochs > 0, "must be positive");
        bad("train.batch_size", self.train.batch_size > 0, "must be positive");
        bad("train.learning_rate", self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite(), "must be positive");
        bad("train.hidden", self.train.hidden.iter().all(|&h| h > 0), "layer widths must be positive");
        bad(
            "train.validation_fraction",
            (0.0..1.0).contains(&self.train.validation_fraction),
            "must lie in [0, 1)",
        );
        bad("eval.episodes", self.eval_episodes > 0, "must be positive");
        bad("intervention.episodes", self.exec_episodes > 0, "must be positive");
        bad("intervention.ridge", self.intervention.ridge > 0.0, "must be positive");
        bad("intervention.tau", self.intervention.tau > 0.0, "must be positive");
        bad("intervention.tau_final", self.intervention.tau_final > 0.0, "must be positive");
        bad("query.budget", self.query.budget > 0, "must be positive");
        bad("query.collect_episodes", self.query.collect_episodes > 0, "must be positive");
        bad("query.graph_samples", self.query.graph_samples > 0, "must be positive");
        bad("query.rounds", self.query.rounds > 0, "must be positive");
        bad("dagger.iterations", self.dagger_iterations >= 1, "at least one iteration");
        bad("dagger.rollouts_per_iter", self.dagger_rollouts >= 1, "must be positive");
        bad("dagger.labels_per_iter", self.dagger_labels != Some(0), "must be positive or `all`");
        bad("mi.samples", self.mi_samples >= deconfound_core::discovery::mi::MIN_SAMPLES, "at least 1000 samples");
        bad("mi.k", self.mi_k >= 1, "must be positive");
        bad("variational.latent_dim", self.variational.latent_dim > 0, "must be positive");
        bad("variational.epochs", self.variational.train.epochs > 0, "must be positive");
        bad("variational.gumbel_tau", self.variational.gumbel_tau > 0.0, "must be positive");
        bad("variational.samples", self.variational_samples > 0, "must be positive");
        bad("variational.mc_samples", self.variational_mc > 0, "must be positive");
        bad("variational.prior_clamp", self.prior_clamp > 0.0 && self.prior_clamp < 0.5, "must lie in (0, 0.5)");
        bad("variational.max_episodes", self.prior_max_episodes > 0, "must be positive");
        bad("proposition.domain", self.fcm.domain >= 2, "at least 2 values");
        bad("proposition.z_values", self.fcm.z_values >= 1, "must be positive");
        bad("proposition.actions", self.fcm.actions >= 2, "at least 2 actions");
        bad("proposition.draws_n3", self.proposition_draws_n3 > 0, "must be positive");
        if fields.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { fields })
        }
    }

    /// Full `key = value` snapshot; parsing it back yields an equal configuration.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let expectation = match self.query.expectation {
            Expectation::Exact => "exact".to_string(),
            Expectation::Sampled(n) => format!("sampled:{n}"),
        };
        let mut kv: Vec<(&str, String)> = vec![
            ("experiment.kind", self.kind.name().into()),
            ("experiment.seeds", seeds),
            ("experiment.output_dir", self.output_dir.display().to_string()),
            ("experiment.threads", self.threads.to_string()),
            ("expert.slope", self.expert.slope.to_string()),
            ("expert.pivot", self.expert.pivot.to_string()),
            ("demos.transitions", self.transitions.to_string()),
            ("demos.sizes", join(&self.sizes)),
        ];
        if let Some(p) = &self.demo_file {
            kv.push(("demos.file", p.display().to_string()));
        }
        kv.extend([
            ("train.epochs", self.train.epochs.to_string()),
            ("train.batch_size", self.train.batch_size.to_string()),
            ("train.learning_rate", self.train.learning_rate.to_string()),
            ("train.hidden", join(&self.train.hidden)),
            ("train.activation", self.train.activation.name().into()),
            ("train.validation_fraction", self.train.validation_fraction.to_string()),
            ("train.standardize", self.train.standardize.to_string()),
            ("eval.episodes", self.eval_episodes.to_string()),
            ("eval.seed", self.eval_seed.to_string()),
            ("intervention.episodes", self.exec_episodes.to_string()),
            ("intervention.ridge", self.intervention.ridge.to_string()),
            ("intervention.tau", self.intervention.tau.to_string()),
            ("intervention.anneal", self.intervention.anneal.to_string()),
            ("intervention.tau_final", self.intervention.tau_final.to_string()),
            ("query.budget", self.query.budget.to_string()),
            ("query.collect_episodes", self.query.collect_episodes.to_string()),
            ("query.graph_samples", self.query.graph_samples.to_string()),
            ("query.rounds", self.query.rounds.to_string()),
            ("query.random_states", self.query.random_states.to_string()),
            ("query.expectation", expectation),
            ("dagger.iterations", self.dagger_iterations.to_string()),
            ("dagger.rollouts_per_iter", self.dagger_rollouts.to_string()),
            (
                "dagger.labels_per_iter",
                self.dagger_labels.map_or("all".to_string(), |n| n.to_string()),
            ),
            ("dagger.warm_start", self.dagger_warm_start.to_string()),
            ("dagger.matched_budget", self.dagger_matched_budget.to_string()),
            ("dagger.margin", self.dagger_margin.to_string()),
            ("mi.samples", self.mi_samples.to_string()),
            ("mi.k", self.mi_k.to_string()),
            ("variational.latent_dim", self.variational.latent_dim.to_string()),
            ("variational.infer_hidden", join(&self.variational.infer_hidden)),
            ("variational.recon_hidden", join(&self.variational.recon_hidden)),
            ("variational.epochs", self.variational.train.epochs.to_string()),
            ("variational.learning_rate", self.variational.train.learning_rate.to_string()),
            ("variational.prior_strength", self.variational.prior_strength.to_string()),
            ("variational.gumbel_tau", self.variational.gumbel_tau.to_string()),
            ("variational.anneal_gumbel", self.variational.anneal_gumbel.to_string()),
            ("variational.gumbel_tau_final", self.variational.gumbel_tau_final.to_string()),
            ("variational.samples", self.variational_samples.to_string()),
            ("variational.mc_samples", self.variational_mc.to_string()),
            ("variational.prior_clamp", self.prior_clamp.to_string()),
            ("variational.max_episodes", self.prior_max_episodes.to_string()),
            ("proposition.domain", self.fcm.domain.to_string()),
            ("proposition.z_values", self.fcm.z_values.to_string()),
            ("proposition.actions", self.fcm.actions.to_string()),
            ("proposition.faithfulness", self.fcm.faithfulness.to_string()),
            ("proposition.resample_cap", self.fcm.resample_cap.to_string()),
            ("proposition.trials_n2", self.proposition_trials_n2.to_string()),
            ("proposition.draws_n3", self.proposition_draws_n3.to_string()),
            ("proposition.factorization_models", self.factorization_models.to_string()),
            ("proposition.factorization_draws", self.factorization_draws.to_string()),
            ("proposition.gradient_nets", self.gradient_nets.to_string()),
        ]);
        kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn flag(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, found `{value}`")),
    }
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(v.trim())).collect()
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (num(a)?, num(b)?);
                if a >= b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = ExperimentConfig::parse("experiment.kind = gap_curve\n").unwrap();
        assert_eq!(c, ExperimentConfig::new(ExperimentKind::GapCurve));
    }

    #[test]
    fn snapshot_roundtrips() {
        let mut c = ExperimentConfig::new(ExperimentKind::DaggerCurve);
        c.seeds = vec![3, 1, 4];
        c.train.hidden = vec![8];
        c.dagger_labels = None;
        c.query.expectation = Expectation::Sampled(16);
        c.intervention.tau = 0.3;
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_offending_field_is_listed() {
        let text = "experiment.kind = gap_curve\nexperiment.seeds = 1,1\ntrain.epochs = many\ntrain.colour = red\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        let fields: Vec<&str> = err.fields.iter().map(|f| f.field.as_str()).collect();
        assert_eq!(fields, ["train.colour", "train.epochs"]);
        let err = ExperimentConfig::parse("experiment.kind = gap_curve\nexperiment.seeds = 1,1\n").unwrap_err();
        assert_eq!(err.fields[0].field, "experiment.seeds");
    }

    #[test]
    fn missing_kind_and_files() {
        let err = ExperimentConfig::parse("# nothing\n").unwrap_err();
        assert_eq!(err.fields[0].field, "experiment.kind");
        let err = ExperimentConfig::parse("experiment.kind = run_all").unwrap_err();
        assert!(err.to_string().contains("unknown experiment kind"));
        let err = ExperimentConfig::parse("experiment.kind = gap_curve\ndemos.file = /no/such/file\n").unwrap_err();
        assert_eq!(err.fields[0].field, "demos.file");
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3, 7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("3..3").is_err());
    }
}
