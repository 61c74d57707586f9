//! Tabular functional causal models over discrete states, and a checker for the claim that
//! a faithful learner matching every interventional query must recover the true graph.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::CausalGraph;

pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FcmError {
    #[error("assignment has {got} variables, the model has {expected}")]
    Arity { expected: usize, got: usize },
    #[error("value {value} of variable {index} is outside the domain 0..{domain}")]
    Domain { index: usize, value: usize, domain: usize },
    #[error("table {0} is not a normalized distribution")]
    Unnormalized(&'static str),
    #[error("no faithful model found after {0} draws")]
    ResampleCap(usize),
    #[error("table shapes do not match the graph")]
    Shape,
}

/// `Z -> X_i` for every state variable, `X_i -> A` where the graph bit is set.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularFCM {
    pub n: usize,
    pub graph: CausalGraph,
    /// Domain size shared by every `X_i`.
    pub domain: usize,
    pub z_prior: Vec<f64>,
    /// `state_tables[i][z]` is the distribution of `X_i` given `Z = z`.
    pub state_tables: Vec<Vec<Vec<f64>>>,
    /// Indexed by the mixed-radix code of the parents' values, lowest set bit first.
    pub action_table: Vec<Vec<f64>>,
}

fn normalized(p: &[f64]) -> bool {
    p.iter().all(|v| *v >= 0.0 && v.is_finite())
        && libm::fabs(p.iter().sum::<f64>() - 1.0) <= NORMALIZATION_TOLERANCE
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>()
}

fn random_distribution<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    // Exponential weights give a uniform draw from the simplex.
    let raw: Vec<f64> = (0..k)
        .map(|_| -libm::log(1.0 - rng.random::<f64>()))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Odometer over `0..domain` for `n` digits, first digit fastest.
pub fn assignments(n: usize, domain: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = domain.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut x = vec![0; n];
        for v in x.iter_mut() {
            *v = code % domain;
            code /= domain;
        }
        x
    })
}

impl TabularFCM {
    pub fn validate(&self) -> Result<(), FcmError> {
        let parents = self.graph.count_ones();
        if self.graph.dim() != self.n
            || self.state_tables.len() != self.n
            || self.action_table.len() != self.domain.pow(parents as u32)
        {
            return Err(FcmError::Shape);
        }
        if !normalized(&self.z_prior) {
            return Err(FcmError::Unnormalized("z_prior"));
        }
        for table in &self.state_tables {
            if table.len() != self.z_prior.len() || !table.iter().all(|p| p.len() == self.domain && normalized(p)) {
                return Err(FcmError::Unnormalized("state"));
            }
        }
        if !self.action_table.iter().all(|p| normalized(p)) {
            return Err(FcmError::Unnormalized("action"));
        }
        Ok(())
    }

    pub fn actions(&self) -> usize {
        self.action_table.first().map_or(0, Vec::len)
    }

    fn check(&self, x: &[usize]) -> Result<(), FcmError> {
        if x.len() != self.n {
            return Err(FcmError::Arity {
                expected: self.n,
                got: x.len(),
            });
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| **v >= self.domain) {
            return Err(FcmError::Domain {
                index,
                value,
                domain: self.domain,
            });
        }
        Ok(())
    }

    /// Row of the action table selected by the parents' values; other variables are ignored.
    pub fn parent_index(&self, x: &[usize]) -> usize {
        let mut code = 0;
        let mut radix = 1;
        for (i, &v) in x.iter().enumerate() {
            if self.graph.get(i) {
                code += v * radix;
                radix *= self.domain;
            }
        }
        code
    }

    /// `p(A | do(X = x))`. Intervening severs `Z -> X`, so only the action table is involved.
    pub fn interventional_query(&self, x: &[usize]) -> Result<Vec<f64>, FcmError> {
        self.check(x)?;
        Ok(self.action_table[self.parent_index(x)].clone())
    }

    /// Draws `A` from the mutilated model with `X` clamped to `x`: `Z` and the state
    /// variables are still sampled, then overwritten.
    pub fn sample_interventional<R: Rng + ?Sized>(&self, x: &[usize], rng: &mut R) -> Result<usize, FcmError> {
        self.check(x)?;
        let (_, mut state) = self.sample_states(rng);
        state.copy_from_slice(x);
        Ok(draw(&self.action_table[self.parent_index(&state)], rng))
    }

    /// One observational draw `(z, x, a)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<usize>, usize) {
        let (z, x) = self.sample_states(rng);
        let a = draw(&self.action_table[self.parent_index(&x)], rng);
        (z, x, a)
    }

    fn sample_states<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<usize>) {
        let z = draw(&self.z_prior, rng);
        let x = self.state_tables.iter().map(|t| draw(&t[z], rng)).collect();
        (z, x)
    }

    /// Exact observational probability of the state assignment `x`.
    pub fn state_probability(&self, x: &[usize]) -> f64 {
        self.z_prior
            .iter()
            .enumerate()
            .map(|(z, pz)| pz * self.state_tables.iter().zip(x).map(|(t, &v)| t[z][v]).product::<f64>())
            .sum()
    }

    /// Observational `p(A | X = x)` computed from the joint.
    pub fn observational_conditional(&self, x: &[usize]) -> Result<Vec<f64>, FcmError> {
        self.check(x)?;
        // A depends on X alone, so conditioning on X reads the same row whatever Z is.
        if self.state_probability(x) > 0.0 {
            Ok(self.action_table[self.parent_index(x)].clone())
        } else {
            Ok(vec![0.0; self.actions()])
        }
    }

    /// Largest change in `p(A | do(X))` from altering variable `i` alone.
    pub fn dependence(&self, i: usize) -> f64 {
        query_dependence(self.n, self.domain, i, |x| {
            self.interventional_query(x).expect("enumerated assignments are in the domain")
        })
    }

    /// Every graph edge moves the interventional distribution by at least `threshold`.
    pub fn is_faithful(&self, threshold: f64) -> bool {
        (0..self.n).all(|i| !self.graph.get(i) || self.dependence(i) >= threshold)
    }

    /// Variables whose intervention leaves the action distribution unchanged.
    pub fn independent_set(&self, tolerance: f64) -> Vec<usize> {
        (0..self.n).filter(|&i| self.dependence(i) <= tolerance).collect()
    }

    /// A random model on `graph`; drawn until faithful, at most `cap` times.
    pub fn random_faithful<R: Rng + ?Sized>(
        graph: CausalGraph,
        spec: &FcmSpec,
        rng: &mut R,
    ) -> Result<(Self, usize), FcmError> {
        let n = graph.dim();
        for attempt in 1..=spec.resample_cap {
            let fcm = Self {
                n,
                graph,
                domain: spec.domain,
                z_prior: random_distribution(spec.z_values, rng),
                state_tables: (0..n)
                    .map(|_| (0..spec.z_values).map(|_| random_distribution(spec.domain, rng)).collect())
                    .collect(),
                action_table: (0..spec.domain.pow(graph.count_ones() as u32))
                    .map(|_| random_distribution(spec.actions, rng))
                    .collect(),
            };
            if fcm.is_faithful(spec.faithfulness) {
                return Ok((fcm, attempt));
            }
        }
        Err(FcmError::ResampleCap(spec.resample_cap))
    }
}

fn draw<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn query_dependence(n: usize, domain: usize, i: usize, query: impl Fn(&[usize]) -> Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for x in assignments(n, domain) {
        if x[i] != 0 {
            continue;
        }
        let base = query(&x);
        for v in 1..domain {
            let mut y = x.clone();
            y[i] = v;
            worst = worst.max(tv(&base, &query(&y)));
        }
    }
    worst
}

/// Table-level learner: any graph plus an action table over the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularLearner {
    pub graph: CausalGraph,
    pub n: usize,
    pub domain: usize,
    /// Indexed by the mixed-radix code of the full assignment.
    pub table: Vec<Vec<f64>>,
}

impl TabularLearner {
    fn code(&self, x: &[usize]) -> usize {
        x.iter().rev().fold(0, |acc, &v| acc * self.domain + v)
    }

    pub fn query(&self, x: &[usize]) -> Vec<f64> {
        self.table[self.code(x)].clone()
    }

    /// The learner's graph bits each move its own interventional distribution, and the
    /// other variables do not.
    pub fn is_faithful(&self, threshold: f64) -> bool {
        (0..self.n).all(|i| {
            let d = query_dependence(self.n, self.domain, i, |x| self.query(x));
            if self.graph.get(i) {
                d >= threshold
            } else {
                d <= NORMALIZATION_TOLERANCE
            }
        })
    }

    /// Largest interventional disagreement with `fcm` over all assignments.
    pub fn disagreement(&self, fcm: &TabularFCM) -> f64 {
        assignments(self.n, self.domain)
            .map(|x| tv(&self.query(&x), &fcm.interventional_query(&x).expect("domain matches")))
            .fold(0.0, f64::max)
    }

    pub fn from_fcm(fcm: &TabularFCM) -> Self {
        let mut learner = Self {
            graph: fcm.graph,
            n: fcm.n,
            domain: fcm.domain,
            table: Vec::new(),
        };
        learner.table = assignments(fcm.n, fcm.domain)
            .map(|x| fcm.interventional_query(&x).expect("domain matches"))
            .collect();
        learner
    }

    /// Fits `p(A | X)` from the observational joint and claims every variable as a cause.
    pub fn passive_fit(fcm: &TabularFCM) -> Self {
        let table = assignments(fcm.n, fcm.domain)
            .map(|x| fcm.observational_conditional(&x).expect("domain matches"))
            .collect();
        Self {
            graph: CausalGraph::full(fcm.n),
            n: fcm.n,
            domain: fcm.domain,
            table,
        }
    }
}

/// Shapes and acceptance rule for randomly drawn models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmSpec {
    pub domain: usize,
    pub z_values: usize,
    pub actions: usize,
    /// Minimum total-variation change an edge must cause.
    pub faithfulness: f64,
    pub resample_cap: usize,
}

impl Default for FcmSpec {
    fn default() -> Self {
        Self {
            domain: 2,
            z_values: 3,
            actions: 3,
            faithfulness: 0.05,
            resample_cap: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropositionReport {
    /// Pairs with distinct graphs, each of which must disagree somewhere.
    pub distinct_pairs: usize,
    pub violations: usize,
    /// Models compared against an exact copy of themselves.
    pub reflexive_checks: usize,
    pub reflexive_failures: usize,
    /// Models whose action-independent set differs from the complement of their graph.
    pub index_set_failures: usize,
    /// Passive learners that matched every query but were not faithful to their graph.
    pub unfaithful_passive_matches: usize,
    pub resamples: usize,
}

impl PropositionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.reflexive_failures == 0 && self.index_set_failures == 0
    }

    fn merge(&mut self, other: &PropositionReport) {
        self.distinct_pairs += other.distinct_pairs;
        self.violations += other.violations;
        self.reflexive_checks += other.reflexive_checks;
        self.reflexive_failures += other.reflexive_failures;
        self.index_set_failures += other.index_set_failures;
        self.unfaithful_passive_matches += other.unfaithful_passive_matches;
        self.resamples += other.resamples;
    }
}

/// Compares one random faithful model on `truth` with one on `candidate`.
pub fn check_pair<R: Rng + ?Sized>(
    truth: CausalGraph,
    candidate: CausalGraph,
    spec: &FcmSpec,
    rng: &mut R,
) -> Result<PropositionReport, FcmError> {
    let mut report = PropositionReport::default();
    let (expert, tries) = TabularFCM::random_faithful(truth, spec, rng)?;
    report.resamples += tries - 1;

    let expected: Vec<usize> = (0..truth.dim()).filter(|&i| !truth.get(i)).collect();
    if expert.independent_set(NORMALIZATION_TOLERANCE) != expected {
        report.index_set_failures += 1;
    }

    report.reflexive_checks += 1;
    if TabularLearner::from_fcm(&expert).disagreement(&expert) > NORMALIZATION_TOLERANCE {
        report.reflexive_failures += 1;
    }

    let passive = TabularLearner::passive_fit(&expert);
    if passive.disagreement(&expert) <= NORMALIZATION_TOLERANCE && !passive.is_faithful(spec.faithfulness) {
        report.unfaithful_passive_matches += 1;
    }

    if candidate != truth {
        report.distinct_pairs += 1;
        let (learner, tries) = TabularFCM::random_faithful(candidate, spec, rng)?;
        report.resamples += tries - 1;
        let learner = TabularLearner::from_fcm(&learner);
        if learner.is_faithful(spec.faithfulness) && learner.disagreement(&expert) <= NORMALIZATION_TOLERANCE {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Every ordered pair of graphs over `n` variables, `trials` model draws each.
pub fn proposition_check<R: Rng + ?Sized>(
    n: usize,
    trials: usize,
    spec: &FcmSpec,
    rng: &mut R,
) -> Result<PropositionReport, FcmError> {
    let mut report = PropositionReport::default();
    for truth in CausalGraph::enumerate(n) {
        for candidate in CausalGraph::enumerate(n) {
            for _ in 0..trials {
                report.merge(&check_pair(truth, candidate, spec, rng)?);
            }
        }
    }
    Ok(report)
}

/// `draws` uniformly chosen graph pairs, distinct with probability `1 - 2^-n`.
pub fn proposition_trials<R: Rng + ?Sized>(
    n: usize,
    draws: usize,
    spec: &FcmSpec,
    rng: &mut R,
) -> Result<PropositionReport, FcmError> {
    let mut report = PropositionReport::default();
    let full = (1u32 << n) - 1;
    for _ in 0..draws {
        let truth = CausalGraph::from_bits(n, rng.random::<u32>() & full).expect("n within range");
        let candidate = CausalGraph::from_bits(n, rng.random::<u32>() & full).expect("n within range");
        report.merge(&check_pair(truth, candidate, spec, rng)?);
    }
    Ok(report)
}

/// Empirical action distribution of `samples` interventional draws.
pub fn simulate_intervention<R: Rng + ?Sized>(
    fcm: &TabularFCM,
    x: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>, FcmError> {
    let mut counts = vec![0.0; fcm.actions()];
    for _ in 0..samples {
        counts[fcm.sample_interventional(x, rng)?] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c /= samples.max(1) as f64);
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn graph(s: &str) -> CausalGraph {
        s.parse().unwrap()
    }

    #[test]
    fn no_causes_means_constant_queries() {
        let mut rng = rng_from_seed(1);
        let (fcm, _) = TabularFCM::random_faithful(graph("000"), &FcmSpec::default(), &mut rng).unwrap();
        fcm.validate().unwrap();
        let first = fcm.interventional_query(&[0, 0, 0]).unwrap();
        for x in assignments(3, 2) {
            assert_eq!(fcm.interventional_query(&x).unwrap(), first);
        }
    }

    #[test]
    fn a_cause_moves_the_query() {
        let mut rng = rng_from_seed(2);
        let (fcm, _) = TabularFCM::random_faithful(graph("010"), &FcmSpec::default(), &mut rng).unwrap();
        let a = fcm.interventional_query(&[0, 0, 1]).unwrap();
        let b = fcm.interventional_query(&[0, 1, 1]).unwrap();
        assert!(tv(&a, &b) >= 0.05);
        assert_eq!(fcm.interventional_query(&[1, 0, 0]).unwrap(), fcm.interventional_query(&[0, 0, 1]).unwrap());
    }

    #[test]
    fn domain_errors() {
        let mut rng = rng_from_seed(3);
        let (fcm, _) = TabularFCM::random_faithful(graph("11"), &FcmSpec::default(), &mut rng).unwrap();
        assert_eq!(
            fcm.interventional_query(&[0, 2]),
            Err(FcmError::Domain {
                index: 1,
                value: 2,
                domain: 2
            })
        );
        assert_eq!(fcm.interventional_query(&[0]), Err(FcmError::Arity { expected: 2, got: 1 }));
    }

    #[test]
    fn query_matches_simulation() {
        let mut rng = rng_from_seed(4);
        let spec = FcmSpec {
            domain: 3,
            ..Default::default()
        };
        let (fcm, _) = TabularFCM::random_faithful(graph("101"), &spec, &mut rng).unwrap();
        for x in [[0, 1, 2], [2, 0, 1]] {
            let exact = fcm.interventional_query(&x).unwrap();
            let empirical = simulate_intervention(&fcm, &x, 100_000, &mut rng).unwrap();
            assert!(tv(&exact, &empirical) < 0.01);
        }
    }

    #[test]
    fn validation_catches_bad_tables() {
        let mut rng = rng_from_seed(5);
        let (mut fcm, _) = TabularFCM::random_faithful(graph("1"), &FcmSpec::default(), &mut rng).unwrap();
        fcm.action_table[0][0] += 1e-9;
        assert_eq!(fcm.validate(), Err(FcmError::Unnormalized("action")));
    }

    #[test]
    fn impossible_faithfulness_hits_the_cap() {
        let spec = FcmSpec {
            faithfulness: 2.0,
            resample_cap: 5,
            ..Default::default()
        };
        let err = TabularFCM::random_faithful(graph("1"), &spec, &mut rng_from_seed(6)).unwrap_err();
        assert_eq!(err, FcmError::ResampleCap(5));
    }

    #[test]
    fn exhaustive_two_variables() {
        let report = proposition_check(2, 3, &FcmSpec::default(), &mut rng_from_seed(7)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.distinct_pairs, 12 * 3);
        assert_eq!(report.reflexive_checks, 16 * 3);
        // The passive learner claims every variable; it is unfaithful whenever the truth
        // is not the full graph, which is 12 of 16 pairs.
        assert_eq!(report.unfaithful_passive_matches, 12 * 3);
    }

    #[test]
    fn randomized_three_variables() {
        let report = proposition_trials(3, 100, &FcmSpec::default(), &mut rng_from_seed(8)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.reflexive_checks, 100);
    }

    #[test]
    fn a_copied_table_on_the_wrong_graph_is_caught() {
        // Same queries as the truth but a graph that claims an extra cause.
        let mut rng = rng_from_seed(9);
        let (fcm, _) = TabularFCM::random_faithful(graph("10"), &FcmSpec::default(), &mut rng).unwrap();
        let mut learner = TabularLearner::from_fcm(&fcm);
        learner.graph = graph("11");
        assert!(learner.disagreement(&fcm) <= NORMALIZATION_TOLERANCE);
        assert!(!learner.is_faithful(0.05));
    }
}
