//! Behavioral cloning, the graph-parameterized mixture policy, and closed-loop evaluation.
//!
//! The mixture policy is one network `f([x ⊙ G, G])` trained with a fresh uniformly drawn
//! graph `G` for every sample of every minibatch, so that each of the `2^n` masks indexes
//! its own sub-policy. Both learners standardize observations with statistics of the
//! training demonstrations before masking; a masked channel therefore sits at its mean.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{run_episode, Action, Controller, CoreState, Scenario};
use crate::expert::{DemoSet, ScriptedExpert};
use crate::graph::CausalGraph;
use crate::nn::{self, argmax, Activation, GradientBundle, LossKind, Network, NnError, OptimizerConfig, OptimizerState, OutputHead, Target};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("input length {got} does not match mask length {expected}")]
    Shape { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("no demonstrations to train on")]
    EmptyDemos,
    #[error(transparent)]
    Network(#[from] NnError),
}

/// `[x ⊙ g, g]`.
pub fn masked_input(x: &[f64], g: &CausalGraph) -> Result<Vec<f64>, PolicyError> {
    if x.len() != g.dim() {
        return Err(PolicyError::Shape {
            expected: g.dim(),
            got: x.len(),
        });
    }
    let mut out = Vec::with_capacity(2 * x.len());
    out.extend(x.iter().enumerate().map(|(i, v)| if g.get(i) { *v } else { 0.0 }));
    out.extend((0..x.len()).map(|i| if g.get(i) { 1.0 } else { 0.0 }));
    Ok(out)
}

/// Per-channel affine standardization fitted on training observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    pub fn fit(rows: &[[f64; 3]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..3)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<f64>() / n;
                let sd = libm::sqrt(var);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Fraction of episodes held out for the validation loss.
    pub validation_fraction: f64,
    /// Z-score inputs with training-set statistics before the network sees them.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            validation_fraction: 0.1,
            standardize: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `NaN` when nothing was held out.
    pub val_loss: f64,
    /// How often each graph was drawn this epoch (mixture training only).
    pub graph_counts: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

/// The mixture policy `π_G(x) = f([x ⊙ G, G])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPolicy {
    pub net: Network,
    pub n: usize,
    pub normalizer: Normalizer,
}

impl GraphPolicy {
    pub fn untrained(n: usize, config: &TrainConfig) -> Result<Self, PolicyError> {
        let mut sizes = vec![2 * n];
        sizes.extend(&config.hidden);
        sizes.push(Action::ALL.len());
        let net = Network::init(&sizes, config.activation, OutputHead::Softmax, &mut rng_from_seed(config.seed))?;
        Ok(Self {
            net,
            n,
            normalizer: Normalizer::identity(n),
        })
    }

    pub fn input(&self, x: &[f64], g: &CausalGraph) -> Result<Vec<f64>, PolicyError> {
        if x.len() != self.n {
            return Err(PolicyError::Shape {
                expected: self.n,
                got: x.len(),
            });
        }
        masked_input(&self.normalizer.apply(x), g)
    }

    /// Action distribution of the sub-policy selected by `g`.
    pub fn action_probs(&self, x: &[f64], g: &CausalGraph) -> Result<Vec<f64>, PolicyError> {
        Ok(self.net.forward(&self.input(x, g)?)?)
    }

    /// Greedy action, ties to the lowest index.
    pub fn act(&self, x: &[f64], g: &CausalGraph) -> Result<Action, PolicyError> {
        let p = self.action_probs(x, g)?;
        Ok(Action::ALL[argmax(&p)])
    }

    /// Cross-entropy of `a` under the sub-policy `g`.
    pub fn loss(&self, x: &[f64], g: &CausalGraph, a: Action) -> Result<f64, PolicyError> {
        Ok(self.net.loss(&self.input(x, g)?, Target::Class(a.index()), LossKind::CrossEntropy)?)
    }

    pub fn mean_loss(&self, demos: &DemoSet, g: &CausalGraph) -> Result<f64, PolicyError> {
        let mut total = 0.0;
        for t in &demos.transitions {
            total += self.loss(&t.observation.x, g, t.action)?;
        }
        Ok(total / demos.len().max(1) as f64)
    }

    pub fn accuracy(&self, demos: &DemoSet, g: &CausalGraph) -> Result<f64, PolicyError> {
        let mut hits = 0usize;
        for t in &demos.transitions {
            if self.act(&t.observation.x, g)? == t.action {
                hits += 1;
            }
        }
        Ok(hits as f64 / demos.len().max(1) as f64)
    }

    /// Closed-loop controller for one fixed graph.
    pub fn with_graph(&self, graph: CausalGraph) -> GraphActor<'_> {
        GraphActor { policy: self, graph }
    }
}

/// Greedy action of `policy` under `g`.
pub fn policy_act(policy: &GraphPolicy, x: &[f64], g: &CausalGraph) -> Result<Action, PolicyError> {
    policy.act(x, g)
}

pub struct GraphActor<'a> {
    policy: &'a GraphPolicy,
    graph: CausalGraph,
}

impl Controller for GraphActor<'_> {
    fn act(&mut self, x: &[f64; 3], _: &CoreState) -> Action {
        self.policy.act(x, &self.graph).expect("observation dimension matches the policy")
    }
}

/// Plain behavioral-cloning policy on the full observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BcPolicy {
    pub net: Network,
    pub normalizer: Normalizer,
}

impl BcPolicy {
    pub fn action_probs(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        Ok(self.net.forward(&self.normalizer.apply(x))?)
    }

    pub fn act(&self, x: &[f64]) -> Result<Action, PolicyError> {
        Ok(Action::ALL[argmax(&self.action_probs(x)?)])
    }

    pub fn loss(&self, x: &[f64], a: Action) -> Result<f64, PolicyError> {
        Ok(self
            .net
            .loss(&self.normalizer.apply(x), Target::Class(a.index()), LossKind::CrossEntropy)?)
    }

    pub fn accuracy(&self, demos: &DemoSet) -> Result<f64, PolicyError> {
        let mut hits = 0usize;
        for t in &demos.transitions {
            if self.act(&t.observation.x)? == t.action {
                hits += 1;
            }
        }
        Ok(hits as f64 / demos.len().max(1) as f64)
    }

    pub fn mean_loss(&self, demos: &DemoSet) -> Result<f64, PolicyError> {
        let mut total = 0.0;
        for t in &demos.transitions {
            total += self.loss(&t.observation.x, t.action)?;
        }
        Ok(total / demos.len().max(1) as f64)
    }
}

impl Controller for BcPolicy {
    fn act(&mut self, x: &[f64; 3], _: &CoreState) -> Action {
        BcPolicy::act(self, x).expect("observation dimension matches the policy")
    }
}

impl Controller for ScriptedExpert {
    fn act(&mut self, _: &[f64; 3], state: &CoreState) -> Action {
        ScriptedExpert::act(self, state)
    }
}

/// Uniformly random actions.
pub struct RandomController(pub SimRng);

impl Controller for RandomController {
    fn act(&mut self, _: &[f64; 3], _: &CoreState) -> Action {
        Action::ALL[self.0.random_range(0..3)]
    }
}

struct Sample {
    x: Vec<f64>,
    action: usize,
}

fn prepare(demos: &DemoSet, config: &TrainConfig) -> Result<(Normalizer, Vec<Sample>, Vec<Sample>), PolicyError> {
    if demos.is_empty() {
        return Err(PolicyError::EmptyDemos);
    }
    let (train, val) = demos.split_episodes(config.validation_fraction);
    let rows: Vec<[f64; 3]> = train.transitions.iter().map(|t| t.observation.x).collect();
    let normalizer = if config.standardize {
        Normalizer::fit(&rows)
    } else {
        Normalizer::identity(3)
    };
    let to_samples = |set: &DemoSet| -> Vec<Sample> {
        set.transitions
            .iter()
            .map(|t| Sample {
                x: normalizer.apply(&t.observation.x),
                action: t.action.index(),
            })
            .collect()
    };
    let (train, val) = (to_samples(&train), to_samples(&val));
    Ok((normalizer, train, val))
}

/// Minibatch Adam on the cross-entropy. `draw_input` maps a sample to the network input,
/// drawing a graph if the model is a mixture; `val_loss` scores the network after each epoch.
fn fit(
    net: &mut Network,
    samples: &[Sample],
    config: &TrainConfig,
    mut draw_input: impl FnMut(&[f64], &mut SimRng, &mut Vec<u64>) -> Vec<f64>,
    graph_slots: usize,
    val_loss: impl Fn(&Network) -> f64,
) -> Result<TrainingLog, PolicyError> {
    let optimizer = OptimizerConfig::adam(config.learning_rate);
    let mut state = OptimizerState::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainingLog::default();
    let mut grads = GradientBundle::zeros_like(net);
    let batch = config.batch_size.max(1);
    for epoch in 0..config.epochs {
        let mut rng = rng_from_seed(derive_seed(config.seed, 1 + epoch as u64));
        order.shuffle(&mut rng);
        let mut counts = vec![0u64; graph_slots];
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            grads.layers.iter_mut().for_each(|g| {
                g.weights.iter_mut().for_each(|v| *v = 0.0);
                g.biases.iter_mut().for_each(|v| *v = 0.0);
            });
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &i in chunk {
                let input = draw_input(&samples[i].x, &mut rng, &mut counts);
                let trace = net.forward_traced(&input)?;
                let (loss, logit_grad) = net.loss_gradient(&trace, Target::Class(samples[i].action), LossKind::CrossEntropy)?;
                batch_loss += loss;
                net.backprop(&trace, &logit_grad, &mut grads, scale);
            }
            if !batch_loss.is_finite() {
                return Err(PolicyError::Diverged { epoch });
            }
            total += batch_loss;
            nn::step(net, &grads, &mut state, &optimizer).map_err(|e| match e {
                NnError::NonFinite { .. } => PolicyError::Diverged { epoch },
                other => PolicyError::Network(other),
            })?;
        }
        let train_loss = total / samples.len() as f64;
        let val = val_loss(net);
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val,
            graph_counts: counts,
        });
    }
    Ok(log)
}

/// Trains the mixture policy on uniformly drawn graphs.
pub fn train_graph_policy(demos: &DemoSet, config: &TrainConfig) -> Result<(GraphPolicy, TrainingLog), PolicyError> {
    let (normalizer, train, val) = prepare(demos, config)?;
    let n = 3;
    let mut policy = GraphPolicy::untrained(n, config)?;
    policy.normalizer = normalizer;
    let graphs: Vec<CausalGraph> = CausalGraph::enumerate(n).collect();
    let full = (1u32 << n) - 1;
    let draw = |x: &[f64], rng: &mut SimRng, counts: &mut Vec<u64>| {
        let g = graphs[(rng.random::<u32>() & full) as usize];
        counts[g.index()] += 1;
        masked_input(x, &g).expect("sample dimension matches")
    };
    let val_loss = |net: &Network| -> f64 {
        if val.is_empty() {
            return f64::NAN;
        }
        let mut total = 0.0;
        for s in &val {
            for g in &graphs {
                let input = masked_input(&s.x, g).expect("sample dimension matches");
                total += net
                    .loss(&input, Target::Class(s.action), LossKind::CrossEntropy)
                    .unwrap_or(f64::NAN);
            }
        }
        total / (val.len() * graphs.len()) as f64
    };
    let log = fit(&mut policy.net, &train, config, draw, graphs.len(), val_loss)?;
    Ok((policy, log))
}

/// Trains a plain classifier on the full observation.
pub fn train_bc(demos: &DemoSet, config: &TrainConfig) -> Result<(BcPolicy, TrainingLog), PolicyError> {
    train_bc_from(demos, config, None)
}

/// As [`train_bc`], continuing from `init` when given instead of a fresh initialization.
pub fn train_bc_from(demos: &DemoSet, config: &TrainConfig, init: Option<&Network>) -> Result<(BcPolicy, TrainingLog), PolicyError> {
    let (normalizer, train, val) = prepare(demos, config)?;
    let mut net = match init {
        Some(net) => net.clone(),
        None => {
            let mut sizes = vec![3];
            sizes.extend(&config.hidden);
            sizes.push(Action::ALL.len());
            Network::init(&sizes, config.activation, OutputHead::Softmax, &mut rng_from_seed(config.seed))?
        }
    };
    let draw = |x: &[f64], _: &mut SimRng, _: &mut Vec<u64>| x.to_vec();
    let val_loss = |net: &Network| -> f64 {
        if val.is_empty() {
            return f64::NAN;
        }
        val.iter()
            .map(|s| net.loss(&s.x, Target::Class(s.action), LossKind::CrossEntropy).unwrap_or(f64::NAN))
            .sum::<f64>()
            / val.len() as f64
    };
    let log = fit(&mut net, &train, config, draw, 0, val_loss)?;
    Ok((BcPolicy { net, normalizer }, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

impl EvalResult {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        Self { mean_return, returns }
    }
}

/// Mean return of `episodes` closed-loop rollouts seeded from `seed`.
pub fn eval_policy<C: Controller + ?Sized>(controller: &mut C, scenario: &Scenario, episodes: usize, seed: u64) -> EvalResult {
    let returns = (0..episodes.max(1) as u64)
        .map(|e| run_episode(controller, scenario, seed, e).total_return)
        .collect();
    EvalResult::from_returns(returns)
}

/// Mixture policy evaluated under `graph`; `None` selects the dropout baseline (all ones).
pub fn eval_graph_policy(policy: &GraphPolicy, graph: Option<CausalGraph>, scenario: &Scenario, episodes: usize, seed: u64) -> EvalResult {
    let g = graph.unwrap_or_else(|| CausalGraph::full(policy.n));
    eval_policy(&mut policy.with_graph(g), scenario, episodes, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ScenarioKind;
    use crate::expert::collect_transitions;

    #[test]
    fn masked_input_definition() {
        let x = [-0.5, 0.01, 1.0];
        let g: CausalGraph = "110".parse().unwrap();
        assert_eq!(masked_input(&x, &g).unwrap(), vec![-0.5, 0.01, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(
            masked_input(&x, &CausalGraph::full(3)).unwrap(),
            vec![-0.5, 0.01, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(masked_input(&x, &CausalGraph::empty(3)).unwrap(), vec![0.0; 6]);
        assert!(masked_input(&x[..2], &g).is_err());
    }

    #[test]
    fn zero_policy_picks_the_first_action() {
        let net = Network::zeros(&[6, 4, 3], Activation::Tanh, OutputHead::Softmax).unwrap();
        let policy = GraphPolicy {
            net,
            n: 3,
            normalizer: Normalizer::identity(3),
        };
        for g in CausalGraph::enumerate(3) {
            assert_eq!(policy.act(&[0.3, -0.02, 1.0], &g).unwrap(), Action::Left);
        }
    }

    #[test]
    fn random_controller_exhausts_the_horizon() {
        let scenario = Scenario::new(ScenarioKind::Original, 0);
        let r = eval_policy(&mut RandomController(rng_from_seed(1)), &scenario, 20, 3);
        assert_eq!(r.mean_return, -200.0);
    }

    #[test]
    fn expert_controller_is_competent() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 0);
        let r = eval_policy(&mut ScriptedExpert::default(), &scenario, 50, 3);
        assert!(r.mean_return >= -130.0);
    }

    #[test]
    fn small_mixture_training_is_reproducible_and_covers_graphs() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 1);
        let demos = collect_transitions(&scenario, 1200, 5).unwrap();
        let config = TrainConfig {
            epochs: 2,
            hidden: vec![8],
            ..TrainConfig::default()
        };
        let (a, log_a) = train_graph_policy(&demos, &config).unwrap();
        let (b, log_b) = train_graph_policy(&demos, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(log_a, log_b);
        for e in &log_a.epochs {
            assert!(e.graph_counts.iter().all(|&c| c > 0));
            assert!(e.train_loss.is_finite() && e.val_loss.is_finite());
        }
    }

    #[test]
    fn empty_demos_are_rejected() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 1);
        let mut demos = collect_transitions(&scenario, 10, 5).unwrap();
        demos.transitions.clear();
        assert_eq!(
            train_bc(&demos, &TrainConfig::default()).unwrap_err(),
            PolicyError::EmptyDemos
        );
    }
}
