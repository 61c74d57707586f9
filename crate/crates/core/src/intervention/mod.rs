//! Targeted interventions: the linear energy posterior over graphs, policy-execution and
//! expert-query search, and a brute-force posterior for checking the approximation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::env::{run_episode, Action, CoreState, Scenario};
use crate::expert::ExpertOracle;
use crate::graph::CausalGraph;
use crate::nn::{argmax, log_sum_exp};
use crate::policy::{GraphPolicy, PolicyError};
use crate::rng::{derive_seed, rng_from_seed, sub_rng, SimRng};

mod solve;

pub use solve::solve_spd;

pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterventionError {
    #[error("at least one record is required")]
    NoRecords,
    #[error("record {0} has a non-finite score")]
    NonFiniteScore(usize),
    #[error("graph dimension {got} does not match the model dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("budget {budget} exceeds the {states} collected states")]
    BudgetExceedsStates { budget: usize, states: usize },
    #[error("posterior has no finite positive mass")]
    DegeneratePosterior,
    #[error("exact enumeration supports at most {max} dimensions, got {got}")]
    TooManyGraphs { max: usize, got: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// `p(G) ∝ exp(<w, G> / tau)`, which factorizes into one Bernoulli per bit.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub tau: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

impl EnergyModel {
    pub fn uniform(n: usize) -> Self {
        Self {
            w: vec![0.0; n],
            b: 0.0,
            tau: 1.0,
        }
    }

    /// Model whose bit marginals equal `marginals` at temperature 1. Values are clamped to
    /// `[clamp, 1 - clamp]` so that no bit starts out saturated.
    pub fn from_marginals(marginals: &[f64], clamp: f64) -> Self {
        let w = marginals
            .iter()
            .map(|&p| logit(p.clamp(clamp, 1.0 - clamp)))
            .collect();
        Self { w, b: 0.0, tau: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<(), InterventionError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(InterventionError::Temperature(self.tau));
        }
        Ok(())
    }

    /// `σ(w_i / tau)` for every bit.
    pub fn marginals(&self) -> Vec<f64> {
        self.w.iter().map(|&w| sigmoid(w / self.tau)).collect()
    }

    pub fn sample_graph<R: Rng + ?Sized>(&self, rng: &mut R) -> CausalGraph {
        let mut bits = 0u32;
        for (i, &w) in self.w.iter().enumerate() {
            let u: f64 = rng.random();
            if u < sigmoid(w / self.tau) {
                bits |= 1 << i;
            }
        }
        CausalGraph::from_bits(self.dim(), bits).expect("model dimension within MAX_DIM")
    }

    /// The most probable graph: bit `i` set iff `w_i > 0`.
    pub fn mode(&self) -> CausalGraph {
        let mut bits = 0u32;
        for (i, &w) in self.w.iter().enumerate() {
            if w > 0.0 {
                bits |= 1 << i;
            }
        }
        CausalGraph::from_bits(self.dim(), bits).expect("model dimension within MAX_DIM")
    }

    pub fn energy(&self, g: &CausalGraph) -> f64 {
        self.w
            .iter()
            .enumerate()
            .filter(|(i, _)| g.get(*i))
            .map(|(_, w)| w)
            .sum()
    }

    /// Product of the per-bit Bernoulli probabilities.
    pub fn probability(&self, g: &CausalGraph) -> f64 {
        self.w
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let p = sigmoid(w / self.tau);
                if g.get(i) {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    /// The Boltzmann distribution over all graphs, computed from the energies alone.
    pub fn enumerate(&self) -> Result<Vec<(CausalGraph, f64)>, InterventionError> {
        let n = self.dim();
        if n > MAX_ENUMERATION {
            return Err(InterventionError::TooManyGraphs {
                max: MAX_ENUMERATION,
                got: n,
            });
        }
        let graphs: Vec<CausalGraph> = CausalGraph::enumerate(n).collect();
        let logits: Vec<f64> = graphs.iter().map(|g| self.energy(g) / self.tau).collect();
        let z = log_sum_exp(&logits);
        Ok(graphs
            .into_iter()
            .zip(logits)
            .map(|(g, l)| (g, libm::exp(l - z)))
            .collect())
    }

    /// Fitted score of `g` in the units of the regression target.
    pub fn predict(&self, g: &CausalGraph) -> f64 {
        self.b + self.energy(g)
    }

    fn plus_prior(mut self, prior: &EnergyModel) -> Self {
        self.w.iter_mut().zip(&prior.w).for_each(|(w, p)| *w += p);
        self
    }
}

pub const MAX_ENUMERATION: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionRecord {
    pub graph: CausalGraph,
    pub score: f64,
    pub episode_index: u64,
}

/// Ridge least squares of score on graph bits with an unpenalized intercept.
pub fn fit_energy(records: &[InterventionRecord], ridge: f64, tau: f64) -> Result<EnergyModel, InterventionError> {
    let first = records.first().ok_or(InterventionError::NoRecords)?;
    let n = first.graph.dim();
    for (i, r) in records.iter().enumerate() {
        if !r.score.is_finite() {
            return Err(InterventionError::NonFiniteScore(i));
        }
        if r.graph.dim() != n {
            return Err(InterventionError::Dimension {
                expected: n,
                got: r.graph.dim(),
            });
        }
    }
    let m = records.len() as f64;
    let mut mean_x = vec![0.0; n];
    let mut mean_y = 0.0;
    for r in records {
        for (j, v) in r.graph.to_reals().iter().enumerate() {
            mean_x[j] += v / m;
        }
        mean_y += r.score / m;
    }
    // Centering removes the intercept from the normal equations.
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for r in records {
        let x: Vec<f64> = r.graph.to_reals().iter().zip(&mean_x).map(|(v, m)| v - m).collect();
        let y = r.score - mean_y;
        for a in 0..n {
            rhs[a] += x[a] * y;
            for b in 0..n {
                gram[a * n + b] += x[a] * x[b];
            }
        }
    }
    for a in 0..n {
        gram[a * n + a] += ridge.max(f64::MIN_POSITIVE);
    }
    let w = solve_spd(&gram, &rhs, n).ok_or(InterventionError::DegeneratePosterior)?;
    let b = mean_y - w.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    Ok(EnergyModel { w, b, tau })
}

/// Z-scores of the record scores; a constant trace maps to zeros.
pub fn standardize_scores(records: &[InterventionRecord]) -> (Vec<InterventionRecord>, f64, f64) {
    let m = records.len().max(1) as f64;
    let mean = records.iter().map(|r| r.score).sum::<f64>() / m;
    let var = records.iter().map(|r| (r.score - mean) * (r.score - mean)).sum::<f64>() / m;
    let sd = libm::sqrt(var);
    let out = records
        .iter()
        .map(|r| InterventionRecord {
            score: if sd > 1e-12 { (r.score - mean) / sd } else { 0.0 },
            ..*r
        })
        .collect();
    (out, mean, if sd > 1e-12 { sd } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionConfig {
    pub ridge: f64,
    /// Starting temperature.
    pub tau: f64,
    /// Linearly anneal the temperature to `tau_final` over the run.
    pub anneal: bool,
    pub tau_final: f64,
    /// Starting weights; the regression shrinks toward them instead of toward zero.
    pub prior: Option<EnergyModel>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            tau: 1.0,
            anneal: false,
            tau_final: 0.1,
            prior: None,
        }
    }
}

impl InterventionConfig {
    pub fn tau_at(&self, step: usize, total: usize) -> f64 {
        if !self.anneal || total <= 1 {
            return self.tau;
        }
        let frac = step as f64 / (total - 1) as f64;
        self.tau + (self.tau_final - self.tau) * frac.min(1.0)
    }

    fn initial_model(&self, n: usize, tau: f64) -> EnergyModel {
        let mut em = self.prior.clone().unwrap_or_else(|| EnergyModel::uniform(n));
        em.tau = tau;
        em
    }

    fn validate(&self, n: usize) -> Result<(), InterventionError> {
        for tau in [self.tau, if self.anneal { self.tau_final } else { self.tau }] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(InterventionError::Temperature(tau));
            }
        }
        if let Some(p) = &self.prior {
            if p.dim() != n {
                return Err(InterventionError::Dimension {
                    expected: n,
                    got: p.dim(),
                });
            }
        }
        Ok(())
    }
}

/// One step of an intervention run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode_index: u64,
    pub graph: CausalGraph,
    pub raw_score: f64,
    pub standardized_score: f64,
    /// Weights after the refit, prior included.
    pub w: Vec<f64>,
    pub b: f64,
    pub mode: CausalGraph,
    /// Regression prediction for the mode, in raw score units.
    pub mode_return_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionOutcome {
    pub graph: CausalGraph,
    pub model: EnergyModel,
    pub trace: Vec<TraceRow>,
}

/// Refits on the full record list and reports the new model and trace row.
fn refit(
    records: &[InterventionRecord],
    config: &InterventionConfig,
    tau: f64,
) -> Result<(EnergyModel, Vec<InterventionRecord>, f64, f64), InterventionError> {
    let (standardized, mean, sd) = standardize_scores(records);
    let em = match &config.prior {
        None => fit_energy(&standardized, config.ridge, tau)?,
        Some(prior) => {
            // Fit the residual left after the prior's energy, then add the prior back.
            let residual: Vec<InterventionRecord> = standardized
                .iter()
                .map(|r| InterventionRecord {
                    score: r.score - prior.energy(&r.graph),
                    ..*r
                })
                .collect();
            fit_energy(&residual, config.ridge, tau)?.plus_prior(prior)
        }
    };
    Ok((em, standardized, mean, sd))
}

fn trace_rows(
    records: &[InterventionRecord],
    config: &InterventionConfig,
    taus: impl Fn(usize) -> f64,
) -> Result<(EnergyModel, Vec<TraceRow>), InterventionError> {
    let mut rows = Vec::with_capacity(records.len());
    let mut last = None;
    for k in 1..=records.len() {
        let (em, standardized, mean, sd) = refit(&records[..k], config, taus(k - 1))?;
        let r = records[k - 1];
        let mode = em.mode();
        rows.push(TraceRow {
            episode_index: r.episode_index,
            graph: r.graph,
            raw_score: r.score,
            standardized_score: standardized[k - 1].score,
            w: em.w.clone(),
            b: em.b,
            mode,
            mode_return_estimate: mean + sd * em.predict(&mode),
        });
        last = Some(em);
    }
    Ok((last.ok_or(InterventionError::NoRecords)?, rows))
}

/// Recomputes the final graph and the trace from raw records alone.
pub fn replay(records: &[InterventionRecord], config: &InterventionConfig) -> Result<InterventionOutcome, InterventionError> {
    let total = records.len();
    let (model, trace) = trace_rows(records, config, |k| config.tau_at(k, total))?;
    Ok(InterventionOutcome {
        graph: model.mode(),
        model,
        trace,
    })
}

/// Policy-execution search: sample a graph, roll one episode with it, refit on the returns.
pub fn policy_execution_intervention(
    policy: &GraphPolicy,
    scenario: &Scenario,
    episodes: usize,
    config: &InterventionConfig,
    seed: u64,
) -> Result<InterventionOutcome, InterventionError> {
    let n = policy.n;
    config.validate(n)?;
    let episodes = episodes.max(1);
    let mut em = config.initial_model(n, config.tau_at(0, episodes));
    let mut records = Vec::with_capacity(episodes);
    let rollout_seed = derive_seed(seed, 0x524F_4C4C);
    for i in 0..episodes {
        let mut rng = sub_rng(seed, i as u64);
        em.tau = config.tau_at(i, episodes);
        let g = em.sample_graph(&mut rng);
        let ret = run_episode(&mut policy.with_graph(g), scenario, rollout_seed, i as u64).total_return;
        records.push(InterventionRecord {
            graph: g,
            score: ret,
            episode_index: i as u64,
        });
        em = refit(&records, config, config.tau_at(i, episodes))?.0;
    }
    replay(&records, config)
}

/// How the expectation over graphs is taken in the disagreement score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    /// Every graph, weighted by its probability.
    Exact,
    Sampled(usize),
}

fn weighted_graphs(em: &EnergyModel, mode: Expectation, rng: &mut SimRng) -> Result<Vec<(CausalGraph, f64)>, InterventionError> {
    match mode {
        Expectation::Exact => em.enumerate(),
        Expectation::Sampled(m) => {
            let m = m.max(1);
            Ok((0..m).map(|_| (em.sample_graph(rng), 1.0 / m as f64)).collect())
        }
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * libm::log(p / q))
        .sum()
}

fn disagreement_weighted(policy: &GraphPolicy, x: &[f64], graphs: &[(CausalGraph, f64)]) -> Result<f64, InterventionError> {
    let mut dists = Vec::with_capacity(graphs.len());
    let mut mix = vec![0.0; Action::ALL.len()];
    let total: f64 = graphs.iter().map(|(_, w)| w).sum();
    for (g, w) in graphs {
        let p = policy.action_probs(x, g)?;
        mix.iter_mut().zip(&p).for_each(|(m, p)| *m += w / total * p);
        dists.push(p);
    }
    Ok(dists
        .iter()
        .zip(graphs)
        .map(|(p, (_, w))| w / total * kl(p, &mix))
        .sum::<f64>()
        .max(0.0))
}

/// `E_G KL(π_G(x) ‖ π_mix(x))` with `π_mix` the `p(G)`-weighted mean of the sub-policies.
pub fn disagreement_score(
    policy: &GraphPolicy,
    x: &[f64],
    em: &EnergyModel,
    mode: Expectation,
    rng: &mut SimRng,
) -> Result<f64, InterventionError> {
    let graphs = weighted_graphs(em, mode, rng)?;
    disagreement_weighted(policy, x, &graphs)
}

/// Greedy action of the `p(G)`-weighted mixture.
pub fn mixture_act(policy: &GraphPolicy, x: &[f64], graphs: &[(CausalGraph, f64)]) -> Result<Action, InterventionError> {
    let mut mix = vec![0.0; Action::ALL.len()];
    for (g, w) in graphs {
        let p = policy.action_probs(x, g)?;
        mix.iter_mut().zip(&p).for_each(|(m, p)| *m += w * p);
    }
    Ok(Action::ALL[argmax(&mix)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryConfig {
    pub budget: usize,
    /// Episodes of the mixture policy rolled to gather candidate states.
    pub collect_episodes: usize,
    /// Graphs sampled and scored against the labels after each round.
    pub graph_samples: usize,
    pub expectation: Expectation,
    /// Split the budget over this many rounds, re-rolling the mixture after each refit.
    pub rounds: usize,
    /// Query uniformly chosen states instead of the most contested ones.
    pub random_states: bool,
    pub intervention: InterventionConfig,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            budget: 20,
            collect_episodes: 2,
            graph_samples: 64,
            expectation: Expectation::Exact,
            rounds: 1,
            random_states: false,
            intervention: InterventionConfig::default(),
        }
    }
}

/// A state labelled by the expert during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueriedState {
    pub x: [f64; 3],
    pub state: CoreState,
    pub action: Action,
    pub disagreement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub graph: CausalGraph,
    pub model: EnergyModel,
    pub trace: Vec<TraceRow>,
    pub queried: Vec<QueriedState>,
    pub records: Vec<InterventionRecord>,
}

fn collect_mixture_states(
    policy: &GraphPolicy,
    scenario: &Scenario,
    graphs: &[(CausalGraph, f64)],
    episodes: usize,
    seed: u64,
) -> Result<Vec<([f64; 3], CoreState)>, InterventionError> {
    let mut states = Vec::new();
    let mut failure = None;
    for e in 0..episodes as u64 {
        let mut controller = |x: &[f64; 3], _: &CoreState| match mixture_act(policy, x, graphs) {
            Ok(a) => a,
            Err(err) => {
                failure.get_or_insert(err);
                Action::Noop
            }
        };
        let ep = run_episode(&mut controller, scenario, seed, e);
        states.extend(ep.steps.iter().map(|s| (s.observation.x, s.state)));
    }
    match failure {
        Some(err) => Err(err),
        None => Ok(states),
    }
}

/// Expert-query search: label the states where the sub-policies disagree most, then score
/// sampled graphs by their negated cross-entropy on those labels.
pub fn expert_query_intervention(
    policy: &GraphPolicy,
    scenario: &Scenario,
    oracle: &ExpertOracle,
    config: &QueryConfig,
    seed: u64,
) -> Result<QueryOutcome, InterventionError> {
    if config.budget == 0 {
        return Err(InterventionError::ZeroBudget);
    }
    let n = policy.n;
    let ic = &config.intervention;
    ic.validate(n)?;
    let rounds = config.rounds.clamp(1, config.budget);
    let mut em = ic.initial_model(n, ic.tau);
    let mut queried: Vec<QueriedState> = Vec::with_capacity(config.budget);
    let mut records = Vec::new();
    let mut rng = sub_rng(seed, 0);
    let total_samples = rounds * config.graph_samples.max(1);
    for round in 0..rounds {
        let share = config.budget / rounds + usize::from(round < config.budget % rounds);
        let graphs = weighted_graphs(&em, config.expectation, &mut rng)?;
        let states = collect_mixture_states(
            policy,
            scenario,
            &graphs,
            config.collect_episodes.max(1),
            derive_seed(seed, 0x5354_0000 + round as u64),
        )?;
        if share > states.len() {
            return Err(InterventionError::BudgetExceedsStates {
                budget: config.budget,
                states: states.len(),
            });
        }
        let mut scored = Vec::with_capacity(states.len());
        for (i, (x, s)) in states.iter().enumerate() {
            let d = disagreement_weighted(policy, x, &graphs)?;
            scored.push((i, d, *x, *s));
        }
        if config.random_states {
            let mut pick_rng = sub_rng(seed, 0x5241_4E44 + round as u64);
            rand::seq::SliceRandom::shuffle(scored.as_mut_slice(), &mut pick_rng);
        } else {
            // Stable: equal scores keep collection order.
            scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        }
        for &(_, d, x, s) in scored.iter().take(share) {
            queried.push(QueriedState {
                x,
                state: s,
                action: oracle.query(&s),
                disagreement: d,
            });
        }
        for k in 0..config.graph_samples.max(1) {
            let step = round * config.graph_samples.max(1) + k;
            em.tau = ic.tau_at(step, total_samples);
            let g = em.sample_graph(&mut rng);
            let mut loss = 0.0;
            for q in &queried {
                loss += policy.loss(&q.x, &g, q.action)?;
            }
            records.push(InterventionRecord {
                graph: g,
                score: -loss / queried.len() as f64,
                episode_index: step as u64,
            });
            em = refit(&records, ic, ic.tau_at(step, total_samples))?.0;
        }
    }
    let outcome = replay(&records, ic)?;
    Ok(QueryOutcome {
        graph: outcome.graph,
        model: outcome.model,
        trace: outcome.trace,
        queried,
        records,
    })
}

/// Normalized `prior × likelihood` over all `2^n` graphs, indexed by graph bits.
pub fn exact_posterior(likelihood: &[f64], prior: &[f64]) -> Result<Vec<f64>, InterventionError> {
    if likelihood.len() != prior.len() || !likelihood.len().is_power_of_two() {
        return Err(InterventionError::Dimension {
            expected: prior.len(),
            got: likelihood.len(),
        });
    }
    let n = likelihood.len().trailing_zeros() as usize;
    if n > MAX_ENUMERATION {
        return Err(InterventionError::TooManyGraphs {
            max: MAX_ENUMERATION,
            got: n,
        });
    }
    let mass: Vec<f64> = likelihood.iter().zip(prior).map(|(l, p)| l * p).collect();
    if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(InterventionError::DegeneratePosterior);
    }
    let z: f64 = mass.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(InterventionError::DegeneratePosterior);
    }
    Ok(mass.into_iter().map(|m| m / z).collect())
}

/// Total-variation distance between two distributions over the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>()
}

/// Empirical distribution of `draws` samples, indexed by graph bits.
pub fn empirical_distribution(em: &EnergyModel, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0.0; 1 << em.dim()];
    for _ in 0..draws {
        counts[em.sample_graph(&mut rng).bits() as usize] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c /= draws.max(1) as f64);
    counts
}

#[cfg(test)]
mod tests;
