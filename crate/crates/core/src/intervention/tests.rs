use super::*;
use crate::env::ScenarioKind;
use crate::nn::{Activation, Network, OutputHead};
use crate::policy::Normalizer;

fn graph(s: &str) -> CausalGraph {
    s.parse().unwrap()
}

fn record(g: CausalGraph, score: f64, i: u64) -> InterventionRecord {
    InterventionRecord {
        graph: g,
        score,
        episode_index: i,
    }
}

/// A policy whose output does not depend on its input at all.
fn constant_policy() -> GraphPolicy {
    let net = Network::zeros(&[6, 3], Activation::Tanh, OutputHead::Softmax).unwrap();
    GraphPolicy {
        net,
        n: 3,
        normalizer: Normalizer::identity(3),
    }
}

/// Picks action 0 when the mask bit for dimension 0 is set, action 2 otherwise.
fn switching_policy() -> GraphPolicy {
    let mut w = vec![0.0; 3 * 6];
    w[3] = -50.0; // action 0 row, mask bit 0
    w[2 * 6 + 3] = 50.0;
    let net = Network::from_parts(&[6, 3], Activation::Tanh, OutputHead::Softmax, vec![(w, vec![25.0, -100.0, -25.0])]).unwrap();
    GraphPolicy {
        net,
        n: 3,
        normalizer: Normalizer::identity(3),
    }
}

#[test]
fn zero_energy_is_fair() {
    let em = EnergyModel::uniform(3);
    let mut rng = rng_from_seed(1);
    let mut ones = [0usize; 3];
    let draws = 100_000;
    for _ in 0..draws {
        let g = em.sample_graph(&mut rng);
        for (i, c) in ones.iter_mut().enumerate() {
            *c += usize::from(g.get(i));
        }
    }
    for c in ones {
        let f = c as f64 / draws as f64;
        assert!((0.49..=0.51).contains(&f), "frequency {f}");
    }
}

#[test]
fn saturated_bit_is_always_set() {
    let em = EnergyModel {
        w: vec![50.0, 0.0],
        b: 0.0,
        tau: 1.0,
    };
    let mut rng = rng_from_seed(2);
    assert!((0..10_000).all(|_| em.sample_graph(&mut rng).get(0)));
}

#[test]
fn sampler_matches_enumeration() {
    let em = EnergyModel {
        w: vec![1.0, -1.0, 0.0],
        b: 0.0,
        tau: 1.0,
    };
    let exact: Vec<f64> = em.enumerate().unwrap().iter().map(|(_, p)| *p).collect();
    let empirical = empirical_distribution(&em, 100_000, 3);
    assert!(total_variation(&exact, &empirical) < 0.01);
    let product: Vec<f64> = CausalGraph::enumerate(3).map(|g| em.probability(&g)).collect();
    assert!(total_variation(&exact, &product) < 1e-12);
}

#[test]
fn ridge_recovers_linear_scores() {
    let w = [2.0, -1.5, 0.25];
    let records: Vec<_> = CausalGraph::enumerate(3)
        .enumerate()
        .map(|(i, g)| {
            let s = 4.0 + g.to_reals().iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
            record(g, s, i as u64)
        })
        .collect();
    let em = fit_energy(&records, 1e-12, 1.0).unwrap();
    for (a, b) in em.w.iter().zip(&w) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((em.b - 4.0).abs() < 1e-6);
    assert_eq!(em.mode(), graph("101"));
}

#[test]
fn constant_scores_give_zero_weights() {
    let records: Vec<_> = CausalGraph::enumerate(3).map(|g| record(g, -7.0, 0)).collect();
    let em = fit_energy(&records, DEFAULT_RIDGE, 1.0).unwrap();
    assert!(em.w.iter().all(|w| w.abs() < 1e-12));
    assert!((em.b + 7.0).abs() < 1e-12);
}

#[test]
fn single_record_is_solvable() {
    let em = fit_energy(&[record(graph("101"), 3.0, 0)], DEFAULT_RIDGE, 1.0).unwrap();
    assert!(em.w.iter().all(|w| w.is_finite()));
    assert!((em.predict(&graph("101")) - 3.0).abs() < 1e-9);
    assert_eq!(fit_energy(&[], DEFAULT_RIDGE, 1.0), Err(InterventionError::NoRecords));
    assert_eq!(
        fit_energy(&[record(graph("1"), f64::NAN, 0)], DEFAULT_RIDGE, 1.0),
        Err(InterventionError::NonFiniteScore(0))
    );
}

#[test]
fn mixed_dimensions_are_rejected() {
    let err = fit_energy(&[record(graph("10"), 1.0, 0), record(graph("101"), 1.0, 1)], DEFAULT_RIDGE, 1.0);
    assert_eq!(err, Err(InterventionError::Dimension { expected: 2, got: 3 }));
}

#[test]
fn mode_is_the_enumerated_argmax() {
    let mut rng = rng_from_seed(4);
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let em = EnergyModel { w, b: 0.0, tau: rng.random_range(0.1..2.0) };
        let dist = em.enumerate().unwrap();
        let best = dist.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(best, em.mode());
    }
}

#[test]
fn disagreement_vanishes_for_identical_policies() {
    let policy = constant_policy();
    let mut rng = rng_from_seed(5);
    let d = disagreement_score(&policy, &[0.1, 0.2, 0.3], &EnergyModel::uniform(3), Expectation::Exact, &mut rng).unwrap();
    assert!(d.abs() < 1e-9);
}

#[test]
fn disagreement_of_two_opposed_policies_is_ln2() {
    let policy = switching_policy();
    let graphs = [(graph("000"), 0.5), (graph("100"), 0.5)];
    let d = disagreement_weighted(&policy, &[0.0, 0.0, 0.0], &graphs).unwrap();
    assert!((d - core::f64::consts::LN_2).abs() < 1e-9, "{d}");
    let reversed = [(graph("100"), 0.5), (graph("000"), 0.5)];
    let r = disagreement_weighted(&policy, &[0.0, 0.0, 0.0], &reversed).unwrap();
    assert!((d - r).abs() < 1e-15);
}

#[test]
fn exact_posterior_basics() {
    let uniform = exact_posterior(&[1.0; 8], &[1.0; 8]).unwrap();
    assert!(uniform.iter().all(|p| (p - 0.125).abs() < 1e-15));
    let w = [0.7, -0.2, 1.1];
    let lik: Vec<f64> = CausalGraph::enumerate(3)
        .map(|g| libm::exp(g.to_reals().iter().zip(&w).map(|(x, w)| x * w).sum::<f64>()))
        .collect();
    let post = exact_posterior(&lik, &[1.0; 8]).unwrap();
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let records: Vec<_> = CausalGraph::enumerate(3).zip(&lik).map(|(g, l)| record(g, libm::log(*l), 0)).collect();
    let mode = fit_energy(&records, DEFAULT_RIDGE, 1.0).unwrap().mode();
    assert_eq!(argmax(&post), mode.bits() as usize);
    assert_eq!(exact_posterior(&[0.0; 4], &[1.0; 4]), Err(InterventionError::DegeneratePosterior));
    assert_eq!(exact_posterior(&[f64::NAN, 1.0], &[1.0; 2]), Err(InterventionError::DegeneratePosterior));
}

#[test]
fn annealing_schedule() {
    let c = InterventionConfig {
        anneal: true,
        ..Default::default()
    };
    assert_eq!(c.tau_at(0, 10), 1.0);
    assert!((c.tau_at(9, 10) - 0.1).abs() < 1e-15);
    assert_eq!(InterventionConfig::default().tau_at(9, 10), 1.0);
}

#[test]
fn prior_from_marginals() {
    let em = EnergyModel::from_marginals(&[0.9, 0.5, 0.0], 0.05);
    let m = em.marginals();
    assert!((m[0] - 0.9).abs() < 1e-12 && (m[1] - 0.5).abs() < 1e-12 && (m[2] - 0.05).abs() < 1e-12);
    assert_eq!(em.mode(), graph("100"));
}

#[test]
fn execution_trace_replays() {
    let policy = switching_policy();
    let scenario = Scenario::new(ScenarioKind::Confounded, 0);
    let config = InterventionConfig::default();
    let out = policy_execution_intervention(&policy, &scenario, 6, &config, 11).unwrap();
    assert_eq!(out.trace.len(), 6);
    let records: Vec<_> = out
        .trace
        .iter()
        .map(|r| record(r.graph, r.raw_score, r.episode_index))
        .collect();
    let again = replay(&records, &config).unwrap();
    assert_eq!(again, out);
    assert_eq!(out, policy_execution_intervention(&policy, &scenario, 6, &config, 11).unwrap());
}

#[test]
fn query_budget_is_spent_exactly() {
    let policy = switching_policy();
    let scenario = Scenario::new(ScenarioKind::Confounded, 0);
    let oracle = ExpertOracle::default();
    let config = QueryConfig {
        budget: 7,
        graph_samples: 10,
        ..Default::default()
    };
    let out = expert_query_intervention(&policy, &scenario, &oracle, &config, 3).unwrap();
    assert_eq!(oracle.query_count(), 7);
    assert_eq!(out.queried.len(), 7);
    assert_eq!(out.records.len(), 10);
    let too_many = QueryConfig {
        budget: 100_000,
        ..Default::default()
    };
    assert!(matches!(
        expert_query_intervention(&policy, &scenario, &oracle, &too_many, 3),
        Err(InterventionError::BudgetExceedsStates { .. })
    ));
    let zero = QueryConfig { budget: 0, ..Default::default() };
    assert_eq!(
        expert_query_intervention(&policy, &scenario, &oracle, &zero, 3),
        Err(InterventionError::ZeroBudget)
    );
}

#[test]
fn prior_fills_in_what_the_records_cannot_separate() {
    let prior = EnergyModel::from_marginals(&[0.9, 0.1], 0.05);
    let config = InterventionConfig {
        prior: Some(prior.clone()),
        ..Default::default()
    };
    // Only bit 0 varies: bit 1 keeps its prior weight, bit 0 follows the scores.
    let records = [
        record(graph("01"), 1.0, 0),
        record(graph("11"), -1.0, 1),
        record(graph("01"), 1.2, 2),
        record(graph("11"), -0.8, 3),
    ];
    let out = replay(&records, &config).unwrap();
    assert!((out.model.w[1] - prior.w[1]).abs() < 1e-9);
    assert!(out.model.w[0] < 0.0);
    let single = replay(&records[..1], &config).unwrap();
    for (w, p) in single.model.w.iter().zip(&prior.w) {
        assert!((w - p).abs() < 1e-9);
    }
}
