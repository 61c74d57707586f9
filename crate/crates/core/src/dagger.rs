//! DAgger baseline: roll the current clone, have the expert label the visited states,
//! aggregate and retrain.

use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::env::{run_episode, Scenario};
use crate::expert::{DemoSet, ExpertOracle, Transition};
use crate::policy::{eval_policy, train_bc_from, BcPolicy, PolicyError, TrainConfig};
use crate::rng::{derive_seed, sub_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct DaggerConfig {
    /// Iterations after the initial behavioral-cloning fit.
    pub iterations: usize,
    pub rollouts_per_iter: usize,
    /// Label at most this many uniformly chosen visited states per iteration.
    pub labels_per_iter: Option<usize>,
    pub eval_episodes: usize,
    pub train: TrainConfig,
    /// Continue from the previous network instead of retraining from scratch.
    pub warm_start: bool,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            rollouts_per_iter: 1,
            labels_per_iter: None,
            eval_episodes: 30,
            train: TrainConfig::default(),
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub cumulative_queries: u64,
    pub mean_return: f64,
    pub std_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaggerState {
    pub aggregated: DemoSet,
    pub policy: BcPolicy,
    pub iteration: usize,
    pub query_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaggerOutcome {
    pub state: DaggerState,
    pub curve: Vec<CurvePoint>,
}

fn summarize(returns: &[f64]) -> (f64, f64) {
    let n = returns.len().max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Runs DAgger starting from `demos`. Iteration 0 is plain cloning with no queries; every
/// later iteration labels states drawn from the current policy's own rollouts.
/// `eval_seed` fixes the evaluation episodes so that points on the curve are comparable.
pub fn dagger_run(
    demos: &DemoSet,
    scenario: &Scenario,
    oracle: &ExpertOracle,
    config: &DaggerConfig,
    seed: u64,
    eval_seed: u64,
) -> Result<DaggerOutcome, PolicyError> {
    let start = oracle.query_count();
    let (policy, _) = train_bc_from(demos, &config.train, None)?;
    let mut state = DaggerState {
        aggregated: demos.clone(),
        policy,
        iteration: 0,
        query_count: 0,
    };
    let mut curve = Vec::with_capacity(config.iterations + 1);
    let evaluate = |policy: &BcPolicy| summarize(&eval_policy(&mut policy.clone(), scenario, config.eval_episodes, eval_seed).returns);
    let (mean, sd) = evaluate(&state.policy);
    curve.push(CurvePoint {
        iteration: 0,
        cumulative_queries: 0,
        mean_return: mean,
        std_return: sd,
    });
    let mut next_episode = demos.transitions.iter().map(|t| t.episode_id + 1).max().unwrap_or(0);
    for iteration in 1..=config.iterations {
        let rollout_seed = derive_seed(seed, iteration as u64);
        let mut visited = Vec::new();
        for r in 0..config.rollouts_per_iter.max(1) as u64 {
            let mut actor = state.policy.clone();
            let ep = run_episode(&mut actor, scenario, rollout_seed, r);
            let id = next_episode;
            next_episode += 1;
            visited.extend(ep.steps.iter().enumerate().map(|(t, s)| (id, t as u32, s.observation, s.state)));
        }
        let chosen: Vec<usize> = match config.labels_per_iter {
            Some(cap) if cap < visited.len() => {
                let mut idx = sample(&mut sub_rng(seed, 0x4C41_0000 + iteration as u64), visited.len(), cap).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..visited.len()).collect(),
        };
        let mut labelled: Vec<Transition> = chosen
            .iter()
            .map(|&i| {
                let (episode_id, t, observation, s) = visited[i];
                Transition {
                    observation,
                    state: s,
                    action: oracle.query(&s),
                    episode_id,
                    t,
                }
            })
            .collect();
        state.query_count += labelled.len() as u64;
        // New data goes in front so that the held-out split keeps the same demo episodes.
        labelled.append(&mut state.aggregated.transitions);
        state.aggregated.transitions = labelled;
        let init = if config.warm_start { Some(&state.policy.net) } else { None };
        let (policy, _) = train_bc_from(&state.aggregated, &config.train, init)?;
        state.policy = policy;
        state.iteration = iteration;
        let (mean, sd) = evaluate(&state.policy);
        curve.push(CurvePoint {
            iteration,
            cumulative_queries: state.query_count,
            mean_return: mean,
            std_return: sd,
        });
    }
    debug_assert_eq!(oracle.query_count() - start, state.query_count);
    Ok(DaggerOutcome { state, curve })
}

/// Return of the last curve point whose cumulative queries fit within `budget`.
pub fn return_at_budget(curve: &[CurvePoint], budget: u64) -> Option<f64> {
    curve
        .iter()
        .rev()
        .find(|p| p.cumulative_queries <= budget)
        .map(|p| p.mean_return)
}

/// Smallest cumulative query count at which the curve comes within `margin` of `target`.
pub fn queries_to_reach(curve: &[CurvePoint], target: f64, margin: f64) -> Option<u64> {
    curve
        .iter()
        .find(|p| p.mean_return >= target - margin)
        .map(|p| p.cumulative_queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ScenarioKind;
    use crate::expert::collect_transitions;
    use crate::policy::train_bc;
    use alloc::vec;

    fn small() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            hidden: vec![16],
            ..Default::default()
        }
    }

    #[test]
    fn accounting_matches_the_oracle() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 0);
        let demos = collect_transitions(&scenario, 600, 1).unwrap();
        let oracle = ExpertOracle::default();
        let config = DaggerConfig {
            iterations: 2,
            eval_episodes: 2,
            train: small(),
            ..Default::default()
        };
        let out = dagger_run(&demos, &scenario, &oracle, &config, 2, 3).unwrap();
        assert_eq!(out.curve.len(), 3);
        assert_eq!(out.curve[0].cumulative_queries, 0);
        assert_eq!(out.state.query_count, oracle.query_count());
        assert_eq!(out.state.aggregated.len(), 600 + oracle.query_count() as usize);
        assert!(out.curve.windows(2).all(|w| w[0].cumulative_queries < w[1].cumulative_queries));
        out.state.aggregated.validate().unwrap();
    }

    #[test]
    fn iteration_zero_is_plain_cloning() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 1);
        let demos = collect_transitions(&scenario, 600, 2).unwrap();
        let config = DaggerConfig {
            iterations: 0,
            eval_episodes: 3,
            train: small(),
            ..Default::default()
        };
        let out = dagger_run(&demos, &scenario, &ExpertOracle::default(), &config, 0, 4).unwrap();
        let (bc, _) = train_bc(&demos, &config.train).unwrap();
        assert_eq!(out.state.policy, bc);
        let direct = eval_policy(&mut bc.clone(), &scenario, 3, 4).mean_return;
        assert_eq!(out.curve[0].mean_return, direct);
    }

    #[test]
    fn label_cap_limits_queries() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 2);
        let demos = collect_transitions(&scenario, 600, 3).unwrap();
        let oracle = ExpertOracle::default();
        let config = DaggerConfig {
            iterations: 3,
            labels_per_iter: Some(10),
            eval_episodes: 1,
            train: small(),
            ..Default::default()
        };
        let out = dagger_run(&demos, &scenario, &oracle, &config, 5, 5).unwrap();
        let queries: Vec<u64> = out.curve.iter().map(|p| p.cumulative_queries).collect();
        assert_eq!(queries, vec![0, 10, 20, 30]);
        assert_eq!(return_at_budget(&out.curve, 25), Some(out.curve[2].mean_return));
        assert_eq!(return_at_budget(&out.curve, 0), Some(out.curve[0].mean_return));
    }

    #[test]
    fn curve_helpers() {
        let point = |q, r| CurvePoint {
            iteration: 0,
            cumulative_queries: q,
            mean_return: r,
            std_return: 0.0,
        };
        let curve = [point(0, -200.0), point(150, -150.0), point(300, -120.0)];
        assert_eq!(queries_to_reach(&curve, -115.0, 15.0), Some(300));
        assert_eq!(queries_to_reach(&curve, -100.0, 15.0), None);
        assert_eq!(return_at_budget(&curve, 149), Some(-200.0));
    }
}
