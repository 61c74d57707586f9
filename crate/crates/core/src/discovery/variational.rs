//! Variational inference over causal graphs: an inference network maps a Gaussian latent to
//! per-bit Bernoulli logits, the shared mixture policy scores the sampled graph, and a
//! reconstruction network recovers the latent from the graph. Graph samples use the
//! straight-through binary Gumbel-softmax.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use alloc::string::String;

use crate::env::{Action, CoreState, Observation, Scenario, ScenarioKind};
use crate::expert::{DemoSet, Transition};
use crate::graph::CausalGraph;
use crate::nn::{self, Activation, GradientBundle, LossKind, Network, NnError, OptimizerConfig, OptimizerState, OutputHead, Target};
use crate::policy::{masked_input, GraphPolicy, Normalizer, TrainConfig};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VariationalError {
    #[error("demonstration set is empty")]
    EmptyDemos,
    #[error("objective became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Network(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalConfig {
    pub latent_dim: usize,
    pub infer_hidden: Vec<usize>,
    pub recon_hidden: Vec<usize>,
    /// Shared with the plain mixture policy: epochs, batch size, learning rate, policy
    /// hidden sizes, input standardization and seed.
    pub train: TrainConfig,
    /// `λ` in `log p(G) = -λ |G|`.
    pub prior_strength: f64,
    pub gumbel_tau: f64,
    /// Linearly anneal the Gumbel temperature to `gumbel_tau_final`.
    pub anneal_gumbel: bool,
    pub gumbel_tau_final: f64,
    /// Weight of the entropy bound relative to the per-sample terms. `None` uses `1 / N`,
    /// which keeps the bound counted once for the whole dataset.
    pub entropy_weight: Option<f64>,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            latent_dim: 4,
            infer_hidden: vec![32],
            recon_hidden: vec![32],
            train: TrainConfig::default(),
            prior_strength: 0.01,
            gumbel_tau: 1.0,
            anneal_gumbel: false,
            gumbel_tau_final: 0.5,
            entropy_weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalModel {
    pub latent_dim: usize,
    /// `U -> logits of q(G_k | U)`.
    pub infer_net: Network,
    pub policy: GraphPolicy,
    /// `G -> mean of b(U | G)`, unit variance.
    pub recon_net: Network,
    pub prior_strength: f64,
    pub gumbel_tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboRecord {
    pub epoch: usize,
    /// Mean per-sample objective, entropy bound included at its weight.
    pub elbo: f64,
    pub log_likelihood: f64,
    pub entropy: f64,
    pub log_b: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElboLog {
    pub epochs: Vec<ElboRecord>,
    /// Objective of every minibatch in order.
    pub steps: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Standard logistic noise `ln u - ln(1 - u)` from a uniform draw.
pub fn logistic_noise(u: f64) -> f64 {
    let u = u.clamp(1e-12, 1.0 - 1e-12);
    libm::log(u) - libm::log(1.0 - u)
}

/// Binary Gumbel-softmax sample: the hard bit and the relaxed probability of a one.
/// The relaxed pair `(s, 1 - s)` is the two-class softmax of `(logit + noise, 0) / tau`.
pub fn gumbel_sample(logit: f64, noise: f64, tau: f64) -> (bool, f64) {
    let s = sigmoid((logit + noise) / tau);
    (logit + noise > 0.0, s)
}

/// Derivative of the relaxed sample with respect to the logit; the straight-through
/// estimator routes the hard bit's gradient through this.
pub fn relaxed_gradient(relaxed: f64, tau: f64) -> f64 {
    relaxed * (1.0 - relaxed) / tau
}

/// Entropy of a Bernoulli with the given logit, in nats.
pub fn bernoulli_entropy(logit: f64) -> f64 {
    let p = sigmoid(logit);
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * libm::log(p);
    }
    if p < 1.0 {
        h -= (1.0 - p) * libm::log(1.0 - p);
    }
    h
}

fn standard_normal(n: usize, rng: &mut SimRng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

impl VariationalModel {
    pub fn untrained(n: usize, config: &VariationalConfig) -> Result<Self, VariationalError> {
        if config.latent_dim == 0 {
            return Err(VariationalError::Config("latent_dim must be positive"));
        }
        if config.gumbel_tau.is_nan() || config.gumbel_tau <= 0.0 {
            return Err(VariationalError::Config("gumbel_tau must be positive"));
        }
        let mut rng = rng_from_seed(derive_seed(config.train.seed, 0x5641));
        let mut sizes = vec![config.latent_dim];
        sizes.extend(&config.infer_hidden);
        sizes.push(n);
        let infer_net = Network::init(&sizes, Activation::Tanh, OutputHead::Linear, &mut rng)?;
        let mut sizes = vec![n];
        sizes.extend(&config.recon_hidden);
        sizes.push(config.latent_dim);
        let recon_net = Network::init(&sizes, Activation::Tanh, OutputHead::Linear, &mut rng)?;
        Ok(Self {
            latent_dim: config.latent_dim,
            infer_net,
            policy: GraphPolicy::untrained(n, &config.train).map_err(|_| VariationalError::Config("policy shape"))?,
            recon_net,
            prior_strength: config.prior_strength,
            gumbel_tau: config.gumbel_tau,
        })
    }

    pub fn n(&self) -> usize {
        self.policy.n
    }

    /// Logits of `q(G_k | U = u)`.
    pub fn logits(&self, u: &[f64]) -> Result<Vec<f64>, VariationalError> {
        Ok(self.infer_net.forward(u)?)
    }

    /// Draws `U` and then a graph from `q(G | U)`.
    pub fn sample_graph(&self, rng: &mut SimRng) -> Result<(Vec<f64>, CausalGraph), VariationalError> {
        let u = standard_normal(self.latent_dim, rng);
        let logits = self.logits(&u)?;
        let mut bits = 0u32;
        for (k, l) in logits.iter().enumerate() {
            if rng.random::<f64>() < sigmoid(*l) {
                bits |= 1 << k;
            }
        }
        Ok((u, CausalGraph::from_bits(self.n(), bits).expect("n within range")))
    }

    /// `½ ‖u - m(G)‖²`, the negated log density of `b(U | G)` up to a constant.
    pub fn reconstruction_loss(&self, u: &[f64], g: &CausalGraph) -> Result<f64, VariationalError> {
        let m = self.recon_net.forward(&g.to_reals())?;
        Ok(0.5 * m.iter().zip(u).map(|(m, u)| (m - u) * (m - u)).sum::<f64>())
    }
}

/// Monte Carlo marginals `E_U[σ(logit_k(U))]`.
pub fn discovered_prior(model: &VariationalModel, mc_samples: usize, seed: u64) -> Result<Vec<f64>, VariationalError> {
    let mut rng = rng_from_seed(seed);
    let mut acc = vec![0.0; model.n()];
    let m = mc_samples.max(1);
    for _ in 0..m {
        let u = standard_normal(model.latent_dim, &mut rng);
        for (a, l) in acc.iter_mut().zip(model.logits(&u)?) {
            *a += sigmoid(l) / m as f64;
        }
    }
    Ok(acc)
}

fn zero(grads: &mut GradientBundle) {
    grads.layers.iter_mut().for_each(|g| {
        g.weights.iter_mut().for_each(|v| *v = 0.0);
        g.biases.iter_mut().for_each(|v| *v = 0.0);
    });
}

struct Terms {
    log_likelihood: f64,
    log_prior: f64,
    entropy: f64,
    log_b: f64,
}

/// Jointly trains the three networks by stochastic ascent on the evidence lower bound.
pub fn train_variational(demos: &DemoSet, config: &VariationalConfig) -> Result<(VariationalModel, ElboLog), VariationalError> {
    if demos.is_empty() {
        return Err(VariationalError::EmptyDemos);
    }
    let n = demos.transitions[0].observation.x.len();
    let mut model = VariationalModel::untrained(n, config)?;
    let rows: Vec<[f64; 3]> = demos.transitions.iter().map(|t| t.observation.x).collect();
    if config.train.standardize {
        model.policy.normalizer = Normalizer::fit(&rows);
    }
    let samples: Vec<(Vec<f64>, usize)> = demos
        .transitions
        .iter()
        .map(|t| (model.policy.normalizer.apply(&t.observation.x), t.action.index()))
        .collect();
    let beta = config.entropy_weight.unwrap_or(1.0 / samples.len() as f64);
    let lambda = config.prior_strength;
    let optimizer = OptimizerConfig::adam(config.train.learning_rate);
    let (mut s_inf, mut s_pol, mut s_rec) = (OptimizerState::new(), OptimizerState::new(), OptimizerState::new());
    let mut g_inf = GradientBundle::zeros_like(&model.infer_net);
    let mut g_pol = GradientBundle::zeros_like(&model.policy.net);
    let mut g_rec = GradientBundle::zeros_like(&model.recon_net);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch = config.train.batch_size.max(1);
    let mut log = ElboLog::default();
    let epochs = config.train.epochs;
    for epoch in 0..epochs {
        let tau = if config.anneal_gumbel && epochs > 1 {
            config.gumbel_tau + (config.gumbel_tau_final - config.gumbel_tau) * epoch as f64 / (epochs - 1) as f64
        } else {
            config.gumbel_tau
        };
        let mut rng = rng_from_seed(derive_seed(config.train.seed, 0x5600_0000 + epoch as u64));
        order.shuffle(&mut rng);
        let mut totals = Terms {
            log_likelihood: 0.0,
            log_prior: 0.0,
            entropy: 0.0,
            log_b: 0.0,
        };
        for chunk in order.chunks(batch) {
            zero(&mut g_inf);
            zero(&mut g_pol);
            zero(&mut g_rec);
            let scale = 1.0 / chunk.len() as f64;
            let mut batch_objective = 0.0;
            for &i in chunk {
                let (x, action) = &samples[i];
                let t = step_sample(&model, x, *action, tau, beta, lambda, scale, &mut rng, &mut g_inf, &mut g_pol, &mut g_rec)?;
                batch_objective += t.log_likelihood + t.log_prior + beta * (t.entropy + t.log_b);
                totals.log_likelihood += t.log_likelihood;
                totals.log_prior += t.log_prior;
                totals.entropy += t.entropy;
                totals.log_b += t.log_b;
            }
            let batch_objective = batch_objective * scale;
            if !batch_objective.is_finite() {
                return Err(VariationalError::Diverged { epoch });
            }
            log.steps.push(batch_objective);
            for (net, grads, state) in [
                (&mut model.infer_net, &g_inf, &mut s_inf),
                (&mut model.policy.net, &g_pol, &mut s_pol),
                (&mut model.recon_net, &g_rec, &mut s_rec),
            ] {
                nn::step(net, grads, state, &optimizer).map_err(|e| match e {
                    NnError::NonFinite { .. } => VariationalError::Diverged { epoch },
                    other => VariationalError::Network(other),
                })?;
            }
        }
        let m = samples.len() as f64;
        log.epochs.push(ElboRecord {
            epoch,
            elbo: (totals.log_likelihood + totals.log_prior + beta * (totals.entropy + totals.log_b)) / m,
            log_likelihood: totals.log_likelihood / m,
            entropy: totals.entropy / m,
            log_b: totals.log_b / m,
        });
    }
    model.gumbel_tau = config.gumbel_tau;
    Ok((model, log))
}

/// Accumulates the gradient of the negated objective for one sample.
#[allow(clippy::too_many_arguments)]
fn step_sample(
    model: &VariationalModel,
    x: &[f64],
    action: usize,
    tau: f64,
    beta: f64,
    lambda: f64,
    scale: f64,
    rng: &mut SimRng,
    g_inf: &mut GradientBundle,
    g_pol: &mut GradientBundle,
    g_rec: &mut GradientBundle,
) -> Result<Terms, VariationalError> {
    let n = model.n();
    let u = standard_normal(model.latent_dim, rng);
    let q_trace = model.infer_net.forward_traced(&u)?;
    let logits = q_trace.output().to_vec();
    let mut bits = 0u32;
    let mut relaxed = vec![0.0; n];
    for k in 0..n {
        let (hard, s) = gumbel_sample(logits[k], logistic_noise(rng.random()), tau);
        if hard {
            bits |= 1 << k;
        }
        relaxed[k] = s;
    }
    let g = CausalGraph::from_bits(n, bits).expect("n within range");
    let reals = g.to_reals();

    let p_trace = model.policy.net.forward_traced(&masked_input(x, &g).expect("sample dimension matches"))?;
    let (ce, logit_grad) = model
        .policy
        .net
        .loss_gradient(&p_trace, Target::Class(action), LossKind::CrossEntropy)?;
    let input_grad = model.policy.net.backprop(&p_trace, &logit_grad, g_pol, scale);

    let r_trace = model.recon_net.forward_traced(&reals)?;
    let mean = r_trace.output();
    let sq: f64 = mean.iter().zip(&u).map(|(m, u)| (m - u) * (m - u)).sum();
    let recon_grad: Vec<f64> = mean.iter().zip(&u).map(|(m, u)| beta * (m - u)).collect();
    let recon_input_grad = model.recon_net.backprop(&r_trace, &recon_grad, g_rec, scale);

    let mut logit_grads = vec![0.0; n];
    let mut entropy = 0.0;
    for k in 0..n {
        // Gradient of the negated objective with respect to the hard bit.
        let d_bit = input_grad[k] * x[k] + input_grad[n + k] + lambda + recon_input_grad[k];
        let p = sigmoid(logits[k]);
        entropy += bernoulli_entropy(logits[k]);
        logit_grads[k] = d_bit * relaxed_gradient(relaxed[k], tau) + beta * logits[k] * p * (1.0 - p);
    }
    model.infer_net.backprop(&q_trace, &logit_grads, g_inf, scale);
    Ok(Terms {
        log_likelihood: -ce,
        log_prior: -lambda * g.count_ones() as f64,
        entropy,
        log_b: -0.5 * sq,
    })
}

/// Standard-normal observations where only dimension `cause` determines the action
/// (thresholds at ±0.4); the other dimensions are pure noise.
pub fn synthetic_single_cause(count: usize, cause: usize, seed: u64) -> DemoSet {
    let mut rng = rng_from_seed(seed);
    let transitions = (0..count)
        .map(|t| {
            let x: [f64; 3] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            let action = if x[cause] > 0.4 {
                Action::Right
            } else if x[cause] < -0.4 {
                Action::Left
            } else {
                Action::Noop
            };
            Transition {
                observation: Observation { x, true_cause_mask: None },
                state: CoreState {
                    position: 0.0,
                    velocity: 0.0,
                    step_count: 0,
                },
                action,
                episode_id: (t / 100) as u64,
                t: (t % 100) as u32,
            }
        })
        .collect();
    DemoSet {
        transitions,
        scenario: Scenario::new(ScenarioKind::Original, 0),
        expert_name: String::from("synthetic"),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> VariationalConfig {
        VariationalConfig {
            train: TrainConfig {
                epochs: 15,
                hidden: vec![32],
                learning_rate: 3e-3,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn relaxed_samples_and_gradients() {
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let logit = rng.random_range(-4.0..4.0);
            let noise = logistic_noise(rng.random());
            let (hard, s) = gumbel_sample(logit, noise, 1.0);
            assert!(s > 0.0 && s < 1.0);
            assert_eq!(hard, s > 0.5);
            let (cold, _) = gumbel_sample(logit, noise, 1e-6);
            assert_eq!(cold, hard);
            // Finite differences on the relaxed surrogate.
            let h = 1e-6;
            let fd = (gumbel_sample(logit + h, noise, 0.7).1 - gumbel_sample(logit - h, noise, 0.7).1) / (2.0 * h);
            let analytic = relaxed_gradient(gumbel_sample(logit, noise, 0.7).1, 0.7);
            assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
        }
    }

    #[test]
    fn bernoulli_entropy_bounds() {
        assert!((bernoulli_entropy(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(bernoulli_entropy(40.0) < 1e-15);
        assert!((bernoulli_entropy(3.0) - bernoulli_entropy(-3.0)).abs() < 1e-15);
    }

    #[test]
    fn untrained_prior_is_near_uniform() {
        let config = VariationalConfig::default();
        let mut model = VariationalModel::untrained(3, &config).unwrap();
        // Zero the last layer so every logit is exactly zero.
        let last = model.infer_net.layers_mut().len() - 1;
        let layer = &mut model.infer_net.layers_mut()[last];
        layer.weights_mut().iter_mut().for_each(|w| *w = 0.0);
        layer.biases_mut().iter_mut().for_each(|b| *b = 0.0);
        let prior = discovered_prior(&model, 500, 3).unwrap();
        assert!(prior.iter().all(|p| (p - 0.5).abs() < 1e-12));
        let again = discovered_prior(&model, 500, 3).unwrap();
        assert_eq!(prior, again);
    }

    #[test]
    fn finds_the_single_predictive_dimension() {
        let demos = synthetic_single_cause(2000, 1, 4);
        let mut config = quick_config();
        config.prior_strength = 0.0;
        let (model, log) = train_variational(&demos, &config).unwrap();
        let prior = discovered_prior(&model, 2000, 5).unwrap();
        assert!(prior[1] > 0.9, "{prior:?}");
        assert_eq!(log.epochs.len(), 15);
        let first = log.epochs[0].elbo;
        let last = log.epochs.last().unwrap().elbo;
        assert!(last > first, "{first} -> {last}");
    }

    #[test]
    fn sparsity_prior_drops_the_noise_dimensions() {
        let demos = synthetic_single_cause(2000, 1, 6);
        let (model, _) = train_variational(&demos, &quick_config()).unwrap();
        let prior = discovered_prior(&model, 2000, 7).unwrap();
        assert!(prior[1] > 0.9 && prior[0] < 0.5 && prior[2] < 0.5, "{prior:?}");
    }

    #[test]
    fn reconstruction_beats_an_untrained_network() {
        let demos = synthetic_single_cause(2000, 1, 8);
        let config = quick_config();
        let (model, _) = train_variational(&demos, &config).unwrap();
        let fresh = VariationalModel::untrained(3, &config).unwrap();
        let mut rng = rng_from_seed(9);
        let (mut trained, mut untrained) = (0.0, 0.0);
        for _ in 0..500 {
            let (u, g) = model.sample_graph(&mut rng).unwrap();
            trained += model.reconstruction_loss(&u, &g).unwrap();
            untrained += fresh.reconstruction_loss(&u, &g).unwrap();
        }
        assert!(trained < untrained, "{trained} vs {untrained}");
    }

    #[test]
    fn empty_demos_are_rejected() {
        let mut demos = synthetic_single_cause(10, 1, 1);
        demos.transitions.clear();
        assert_eq!(
            train_variational(&demos, &VariationalConfig::default()).unwrap_err(),
            VariationalError::EmptyDemos
        );
    }
}
