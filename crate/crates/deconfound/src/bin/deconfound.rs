//! Command-line front end. Every subcommand reads its hyperparameters from an optional config
//! file plus `--set key=value` overrides; nothing is read from the environment.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use deconfound::bundle::{self, BundleError};
use deconfound::config::{ConfigError, ExperimentConfig, ExperimentKind};
use deconfound::formats;
use deconfound::Cache;
use deconfound_core::dagger::{dagger_run, DaggerConfig};
use deconfound_core::discovery::mi::{estimate_mi_k, mi_samples};
use deconfound_core::discovery::{discovered_prior, train_variational, VariationalConfig};
use deconfound_core::env::{Scenario, ScenarioKind, OBS_DIM};
use deconfound_core::expert::{collect_transitions_with, ExpertOracle};
use deconfound_core::intervention::{
    expert_query_intervention, policy_execution_intervention, EnergyModel, InterventionConfig,
};
use deconfound_core::policy::{eval_graph_policy, train_bc, train_graph_policy, TrainConfig};

#[derive(Parser)]
#[command(name = "deconfound", version, about = "Causal confusion experiments on MountainCar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// Key-value config file; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, for example `--set train.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Collect expert transitions into a demo file.
    DemoCollect {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value = "original")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `demos.transitions`.
        #[arg(long)]
        transitions: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a behavioural-cloning policy on a demo file.
    TrainBc {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train the graph-parameterized policy on a demo file.
    TrainGraphPolicy {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Search for the causal graph by executing the graph policy.
    InterveneExec {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "confounded")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `intervention.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Seed p(G) with these comma-separated marginals.
        #[arg(long, value_delimiter = ',')]
        prior: Option<Vec<f64>>,
        /// Trace CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the causal graph with disagreement-selected expert queries.
    InterveneQuery {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "confounded")]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest-neighbour mutual information of each state dimension with the action.
    DiscoverPassive {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the variational causal-discovery model and print the discovered marginals.
    DiscoverVariational {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch ELBO CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run DAgger from a demo file and write its query/return curve.
    BaselineDagger {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Curve CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a configured experiment over all its seeds and write a result bundle.
    Run {
        #[command(flatten)]
        settings: Settings,
    },
    /// Merge result bundles into a summary and the acceptance checklist.
    Report {
        bundles: Vec<PathBuf>,
        /// Also write report_summary.csv and checklist.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<BundleError> for Failure {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(message)) => {
            eprintln!("{message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

impl Settings {
    /// The config file (or defaults) with the overrides applied, validated.
    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::new(kind),
        };
        let mut errors = Vec::new();
        for set in &self.sets {
            let Some((key, value)) = set.split_once('=') else {
                errors.push(format!("  {set}: expected KEY=VALUE"));
                continue;
            };
            if let Err(e) = config.set(key.trim(), value.trim()) {
                errors.push(format!("  {}: {e}", key.trim()));
            }
        }
        if !errors.is_empty() {
            return Err(Failure::Config(format!("invalid configuration:\n{}", errors.join("\n"))));
        }
        config.validate()?;
        Ok(config)
    }
}

fn scenario(name: &str, seed: u64) -> Result<Scenario> {
    let kind = ScenarioKind::from_name(name)
        .ok_or_else(|| Failure::Config(format!("unknown scenario `{name}` (original, confounded, confounded_entangled)")))?;
    Ok(Scenario::new(kind, seed))
}

fn train_config(config: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..config.train.clone()
    }
}

fn load_demos(path: &Path) -> anyhow::Result<deconfound_core::expert::DemoSet> {
    formats::load(path, formats::read_demos).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn save(path: &Path, write: impl FnOnce(&mut std::io::BufWriter<File>) -> std::io::Result<()>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    formats::save(path, write).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(command: Command) -> Result<()> {
    let default_kind = ExperimentKind::GapCurve;
    match command {
        Command::DemoCollect {
            settings,
            scenario: name,
            seed,
            transitions,
            out,
        } => {
            let config = settings.resolve(default_kind)?;
            let scen = scenario(&name, seed)?;
            let count = transitions.unwrap_or(config.transitions);
            let demos = collect_transitions_with(&config.expert, &scen, count, seed).map_err(|e| anyhow!("collecting demos: {e}"))?;
            save(&out, |w| formats::write_demos(w, &demos))?;
            println!("{} transitions in {} episodes -> {}", demos.transitions.len(), episode_count(&demos), out.display());
        }
        Command::TrainBc {
            settings,
            demos,
            seed,
            out,
            log,
        } => {
            let config = settings.resolve(default_kind)?;
            let demos = load_demos(&demos)?;
            let (policy, training) = train_bc(&demos, &train_config(&config, seed)).map_err(|e| anyhow!("training: {e}"))?;
            save(&out, |w| formats::write_bc_policy(w, &policy))?;
            if let Some(log) = log {
                formats::write_training_log(create(&log)?, &training).map_err(anyhow::Error::from)?;
            }
            if let Some(last) = training.epochs.last() {
                println!("epoch {} train_loss {:.6} val_loss {:.6}", last.epoch, last.train_loss, last.val_loss);
            }
        }
        Command::TrainGraphPolicy {
            settings,
            demos,
            seed,
            out,
            log,
        } => {
            let config = settings.resolve(default_kind)?;
            let demos = load_demos(&demos)?;
            let (policy, training) = train_graph_policy(&demos, &train_config(&config, seed)).map_err(|e| anyhow!("training: {e}"))?;
            save(&out, |w| formats::write_graph_policy(w, &policy))?;
            if let Some(log) = log {
                formats::write_training_log(create(&log)?, &training).map_err(anyhow::Error::from)?;
            }
            if let Some(last) = training.epochs.last() {
                println!("epoch {} train_loss {:.6} val_loss {:.6}", last.epoch, last.train_loss, last.val_loss);
            }
        }
        Command::InterveneExec {
            settings,
            policy,
            scenario: name,
            seed,
            episodes,
            prior,
            out,
        } => {
            let config = settings.resolve(default_kind)?;
            let scen = scenario(&name, seed)?;
            let policy = formats::load(&policy, formats::read_graph_policy).map_err(anyhow::Error::from)?;
            let icfg = InterventionConfig {
                prior: prior.map(|m| EnergyModel::from_marginals(&m, config.prior_clamp)),
                ..config.intervention.clone()
            };
            let outcome = policy_execution_intervention(&policy, &scen, episodes.unwrap_or(config.exec_episodes), &icfg, seed)
                .map_err(|e| anyhow!("policy execution: {e}"))?;
            formats::write_trace(create(&out)?, OBS_DIM, &outcome.trace).map_err(anyhow::Error::from)?;
            report_graph(&config, &policy, outcome.graph, &scen, seed);
        }
        Command::InterveneQuery {
            settings,
            policy,
            scenario: name,
            seed,
            out,
        } => {
            let config = settings.resolve(default_kind)?;
            let scen = scenario(&name, seed)?;
            let policy = formats::load(&policy, formats::read_graph_policy).map_err(anyhow::Error::from)?;
            let oracle = ExpertOracle::new(config.expert);
            let outcome = expert_query_intervention(&policy, &scen, &oracle, &config.query, seed)
                .map_err(|e| anyhow!("expert query: {e}"))?;
            formats::write_trace(create(&out)?, OBS_DIM, &outcome.trace).map_err(anyhow::Error::from)?;
            println!("queries {}", oracle.query_count());
            report_graph(&config, &policy, outcome.graph, &scen, seed);
        }
        Command::DiscoverPassive { settings, demos, out } => {
            let config = settings.resolve(default_kind)?;
            let demos = load_demos(&demos)?;
            let mut samples = mi_samples(&demos);
            samples.truncate(config.mi_samples);
            let mut table = Vec::new();
            for dim in 0..OBS_DIM {
                let marginal = estimate_mi_k(&samples, dim, false, config.mi_k).map_err(|e| anyhow!("MI: {e}"))?;
                let conditional = estimate_mi_k(&samples, dim, true, config.mi_k).map_err(|e| anyhow!("MI: {e}"))?;
                println!("dim {dim} marginal {marginal:.4} bits conditional {conditional:.4} bits");
                table.push((dim, marginal, conditional));
            }
            formats::write_mi(create(&out)?, &table).map_err(anyhow::Error::from)?;
        }
        Command::DiscoverVariational {
            settings,
            demos,
            seed,
            out,
            log,
        } => {
            let config = settings.resolve(default_kind)?;
            let demos = load_demos(&demos)?;
            let vc = VariationalConfig {
                train: TrainConfig {
                    seed,
                    ..config.variational.train.clone()
                },
                ..config.variational.clone()
            };
            let (model, elbo) = train_variational(&demos, &vc).map_err(|e| anyhow!("variational training: {e}"))?;
            save(&out, |w| formats::write_variational(w, &model))?;
            if let Some(log) = log {
                formats::write_elbo_log(create(&log)?, &elbo).map_err(anyhow::Error::from)?;
            }
            let q = discovered_prior(&model, config.variational_mc, seed).map_err(|e| anyhow!("prior: {e}"))?;
            let shown: Vec<String> = q.iter().map(|p| format!("{p:.4}")).collect();
            println!("marginals {}", shown.join(","));
        }
        Command::BaselineDagger {
            settings,
            demos,
            seed,
            out,
        } => {
            let config = settings.resolve(ExperimentKind::DaggerCurve)?;
            let demos = load_demos(&demos)?;
            let scen = demos.scenario;
            let dcfg = DaggerConfig {
                iterations: config.dagger_iterations,
                rollouts_per_iter: config.dagger_rollouts,
                labels_per_iter: config.dagger_labels,
                eval_episodes: config.eval_episodes,
                train: train_config(&config, seed),
                warm_start: config.dagger_warm_start,
            };
            let oracle = ExpertOracle::new(config.expert);
            let outcome = dagger_run(&demos, &scen, &oracle, &dcfg, seed, config.eval_seed).map_err(|e| anyhow!("dagger: {e}"))?;
            formats::write_curve(create(&out)?, &outcome.curve).map_err(anyhow::Error::from)?;
            for p in &outcome.curve {
                println!("iteration {} queries {} return {:.2}", p.iteration, p.cumulative_queries, p.mean_return);
            }
        }
        Command::Run { settings } => {
            if settings.config.is_none() {
                return Err(Failure::Config("run needs --config".into()));
            }
            let config = settings.resolve(default_kind)?;
            let cache = Cache::default();
            let result = bundle::run(&config, &cache)?;
            println!(
                "{}: {} rows over {} seeds -> {}",
                config.kind,
                result.rows.len(),
                config.seeds.len(),
                config.output_dir.display()
            );
        }
        Command::Report { bundles, out } => {
            let report = bundle::report(&bundles)?;
            if let Some(dir) = out {
                report.save(&dir)?;
            }
            print!("{}", report.render());
        }
    }
    Ok(())
}

fn episode_count(demos: &deconfound_core::expert::DemoSet) -> usize {
    let mut ids: Vec<u64> = demos.transitions.iter().map(|t| t.episode_id).collect();
    ids.dedup();
    ids.len()
}

fn report_graph(
    config: &ExperimentConfig,
    policy: &deconfound_core::policy::GraphPolicy,
    graph: deconfound_core::CausalGraph,
    scen: &Scenario,
    seed: u64,
) {
    let ret = eval_graph_policy(policy, Some(graph), scen, config.eval_episodes, deconfound_core::rng::derive_seed(config.eval_seed, seed));
    println!("graph {graph} return {:.2}", ret.mean_return);
}
