use alloc::vec;
use alloc::vec::Vec;

use super::{GradientBundle, Network, NnError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            learning_rate,
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

/// Adam moment estimates, allocated on the first step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Applies one update. Nothing is modified when the gradients are malformed.
pub fn step(
    net: &mut Network,
    grads: &GradientBundle,
    state: &mut OptimizerState,
    config: &OptimizerConfig,
) -> Result<(), NnError> {
    if !grads.matches(net) {
        return Err(NnError::GradientShape);
    }
    if let Some(layer) = grads
        .layers
        .iter()
        .position(|g| g.weights.iter().chain(&g.biases).any(|v| !v.is_finite()))
    {
        return Err(NnError::NonFinite { layer });
    }
    state.steps += 1;
    let lr = config.learning_rate;
    match config.kind {
        OptimizerKind::Sgd => {
            for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
                layer.weights.iter_mut().zip(&g.weights).for_each(|(p, d)| *p -= lr * d);
                layer.biases.iter_mut().zip(&g.biases).for_each(|(p, d)| *p -= lr * d);
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            if state.first.is_empty() {
                for layer in &net.layers {
                    state.first.push(vec![0.0; layer.weights.len()]);
                    state.first.push(vec![0.0; layer.biases.len()]);
                }
                state.second = state.first.clone();
            }
            let t = state.steps as f64;
            let c1 = 1.0 - libm::pow(beta1, t);
            let c2 = 1.0 - libm::pow(beta2, t);
            let params = net
                .layers
                .iter_mut()
                .flat_map(|l| [&mut l.weights, &mut l.biases]);
            let gs = grads.layers.iter().flat_map(|g| [&g.weights, &g.biases]);
            for (((p, g), m), v) in params.zip(gs).zip(&mut state.first).zip(&mut state.second) {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LossKind, OutputHead, Target};

    fn scalar_net(value: f64) -> Network {
        Network::from_parts(&[1, 1], Activation::Tanh, OutputHead::Linear, vec![(vec![value], vec![0.0])]).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        for config in [OptimizerConfig::sgd(0.1), OptimizerConfig::adam(0.1)] {
            let mut net = scalar_net(1.0);
            let before = net.clone();
            let grads = GradientBundle::zeros_like(&net);
            step(&mut net, &grads, &mut OptimizerState::new(), &config).unwrap();
            assert_eq!(net, before);
        }
    }

    #[test]
    fn plain_sgd_step() {
        let mut net = scalar_net(1.0);
        let mut grads = GradientBundle::zeros_like(&net);
        grads.layers[0].weights[0] = 0.5;
        step(&mut net, &grads, &mut OptimizerState::new(), &OptimizerConfig::sgd(0.1)).unwrap();
        assert!((net.layers()[0].weights()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_layer() {
        let mut net = Network::zeros(&[2, 3, 1], Activation::Tanh, OutputHead::Linear).unwrap();
        let before = net.clone();
        let mut grads = GradientBundle::zeros_like(&net);
        grads.layers[1].biases[0] = f64::NAN;
        let err = step(&mut net, &grads, &mut OptimizerState::new(), &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, NnError::NonFinite { layer: 1 });
        assert_eq!(net, before);
    }

    #[test]
    fn adam_minimizes_a_quadratic_bowl() {
        // Linear net y = w.x + b evaluated at x = (1, 0) and (0, 1) gives the
        // separable bowl (w0 + b - 3)^2 + (w1 + b + 2)^2 in three parameters.
        let mut net = Network::zeros(&[2, 1], Activation::Tanh, OutputHead::Linear).unwrap();
        let mut state = OptimizerState::new();
        let config = OptimizerConfig::adam(0.1);
        let samples: [([f64; 2], f64); 2] = [([1.0, 0.0], 3.0), ([0.0, 1.0], -2.0)];
        let total = |net: &Network| -> f64 {
            samples
                .iter()
                .map(|(x, t)| net.loss(x, Target::Values(&[*t]), LossKind::Mse).unwrap())
                .sum()
        };
        for _ in 0..200 {
            let mut grads = GradientBundle::zeros_like(&net);
            for (x, t) in &samples {
                let g = net.backward(x, Target::Values(&[*t]), LossKind::Mse).unwrap();
                grads.add_scaled(&g, 1.0);
            }
            step(&mut net, &grads, &mut state, &config).unwrap();
        }
        assert!(total(&net) < 1e-6, "loss {}", total(&net));
        assert_eq!(state.steps(), 200);
    }
}
