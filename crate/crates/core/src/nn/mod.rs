//! Dense feed-forward networks with analytic backpropagation.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. Hidden layers share one
//! activation; the last layer feeds either a linear or a softmax head.

mod optim;

pub use optim::{step, OptimizerConfig, OptimizerKind, OptimizerState};

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("input has length {got}, network expects {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("target has length {got}, network output has {expected}")]
    TargetShape { expected: usize, got: usize },
    #[error("class {class} out of range for {outputs} outputs")]
    ClassOutOfRange { class: usize, outputs: usize },
    #[error("configuration error: {0}")]
    Config(&'static str),
    #[error("non-finite gradient in layer {layer}")]
    NonFinite { layer: usize },
    #[error("gradient shapes do not match the network")]
    GradientShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Linear,
    Softmax,
}

impl OutputHead {
    pub fn name(&self) -> &'static str {
        match self {
            OutputHead::Linear => "linear",
            OutputHead::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(OutputHead::Linear),
            "softmax" => Some(OutputHead::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Negative log-likelihood of a class under the softmax head.
    CrossEntropy,
    /// Mean over outputs of the squared error.
    Mse,
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Class(usize),
    Values(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    hidden: Activation,
    head: OutputHead,
}

/// Per-layer input activations and the final logits of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    logits: Vec<f64>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients for every parameter of a [`Network`], plus the loss they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGradient>,
    pub loss: f64,
}

impl GradientBundle {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
            loss: 0.0,
        }
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }

    pub fn add_scaled(&mut self, other: &GradientBundle, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += scale * y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += scale * y);
        }
        self.loss += scale * other.loss;
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights.iter_mut().for_each(|x| *x *= factor);
            g.biases.iter_mut().for_each(|x| *x *= factor);
        }
        self.loss *= factor;
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|g| g.weights.iter().chain(&g.biases))
    }
}

impl Network {
    /// A network with every parameter zero.
    pub fn zeros(layer_sizes: &[usize], hidden: Activation, head: OutputHead) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::Config("a network needs at least an input and an output layer"));
        }
        if layer_sizes.contains(&0) {
            return Err(NnError::Config("layer sizes must be positive"));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                in_dim: w[0],
                out_dim: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            hidden,
            head,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden: Activation,
        head: OutputHead,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(layer_sizes, hidden, head)?;
        for layer in &mut net.layers {
            let limit = libm::sqrt(6.0 / (layer.in_dim + layer.out_dim) as f64);
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from its parts, checking every shape.
    pub fn from_parts(
        layer_sizes: &[usize],
        hidden: Activation,
        head: OutputHead,
        params: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(layer_sizes, hidden, head)?;
        if params.len() != net.layers.len() {
            return Err(NnError::Config("parameter count does not match layer count"));
        }
        for (layer, (w, b)) in net.layers.iter_mut().zip(params) {
            if w.len() != layer.weights.len() || b.len() != layer.biases.len() {
                return Err(NnError::Config("parameter shape does not match layer sizes"));
            }
            layer.weights = w;
            layer.biases = b;
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_head(&self) -> OutputHead {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_traced(input)?.output)
    }

    pub fn forward_traced(&self, input: &[f64]) -> Result<Trace, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputShape {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers[..last] {
            let mut z = layer.affine(&current);
            z.iter_mut().for_each(|v| *v = self.hidden.apply(*v));
            inputs.push(core::mem::replace(&mut current, z));
        }
        let logits = self.layers[last].affine(&current);
        inputs.push(current);
        let output = match self.head {
            OutputHead::Linear => logits.clone(),
            OutputHead::Softmax => softmax(&logits),
        };
        Ok(Trace { inputs, logits, output })
    }

    /// Propagates `logit_grad` (the loss gradient with respect to the last layer's
    /// pre-head values) back through the network. Parameter gradients are accumulated
    /// into `grads` scaled by `scale`; the gradient with respect to the input is returned.
    pub fn backprop(&self, trace: &Trace, logit_grad: &[f64], grads: &mut GradientBundle, scale: f64) -> Vec<f64> {
        debug_assert_eq!(logit_grad.len(), self.output_dim());
        let mut delta = logit_grad.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.inputs[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                let ds = d * scale;
                g.biases[o] += ds;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                row.iter_mut().zip(input).for_each(|(w, x)| *w += ds * x);
            }
            let mut prev = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            if k > 0 {
                prev.iter_mut()
                    .zip(input)
                    .for_each(|(p, a)| *p *= self.hidden.derivative(*a));
            }
            delta = prev;
        }
        delta
    }

    /// Loss and the gradient with respect to the logits for one forward pass.
    pub fn loss_gradient(&self, trace: &Trace, target: Target<'_>, loss: LossKind) -> Result<(f64, Vec<f64>), NnError> {
        let out = self.output_dim();
        match (self.head, loss) {
            (OutputHead::Softmax, LossKind::CrossEntropy) => {
                let Target::Class(class) = target else {
                    return Err(NnError::Config("cross-entropy needs a class target"));
                };
                if class >= out {
                    return Err(NnError::ClassOutOfRange { class, outputs: out });
                }
                let value = log_sum_exp(&trace.logits) - trace.logits[class];
                let mut grad = trace.output.clone();
                grad[class] -= 1.0;
                Ok((value, grad))
            }
            (OutputHead::Linear, LossKind::Mse) => {
                let Target::Values(t) = target else {
                    return Err(NnError::Config("mean squared error needs a real-valued target"));
                };
                if t.len() != out {
                    return Err(NnError::TargetShape { expected: out, got: t.len() });
                }
                let m = out as f64;
                let value = trace.output.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / m;
                let grad = trace.output.iter().zip(t).map(|(y, t)| 2.0 * (y - t) / m).collect();
                Ok((value, grad))
            }
            (OutputHead::Linear, LossKind::CrossEntropy) => {
                Err(NnError::Config("cross-entropy requires a softmax head"))
            }
            (OutputHead::Softmax, LossKind::Mse) => Err(NnError::Config("mean squared error requires a linear head")),
        }
    }

    pub fn backward(&self, input: &[f64], target: Target<'_>, loss: LossKind) -> Result<GradientBundle, NnError> {
        let trace = self.forward_traced(input)?;
        let (value, logit_grad) = self.loss_gradient(&trace, target, loss)?;
        let mut grads = GradientBundle::zeros_like(self);
        self.backprop(&trace, &logit_grad, &mut grads, 1.0);
        grads.loss = value;
        Ok(grads)
    }

    /// Scalar loss without gradients.
    pub fn loss(&self, input: &[f64], target: Target<'_>, loss: LossKind) -> Result<f64, NnError> {
        let trace = self.forward_traced(input)?;
        Ok(self.loss_gradient(&trace, target, loss)?.0)
    }

    /// Every parameter in layer order (weights then biases per layer).
    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + libm::log(z.iter().map(|v| libm::exp(v - m)).sum::<f64>())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| libm::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Relative error `|g - d| / (|g| + |d|)` between the analytic gradient `g` and central
/// differences `d` with step `h`, over every parameter of `net`.
pub fn gradient_check_error(net: &Network, input: &[f64], target: Target<'_>, loss: LossKind, h: f64) -> Result<f64, NnError> {
    let analytic: Vec<f64> = net.backward(input, target, loss)?.iter().copied().collect();
    let mut probe = net.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for k in 0..analytic.len() {
        let original = *probe.parameters().nth(k).expect("index below parameter count");
        let mut at = |v: f64| -> Result<f64, NnError> {
            *probe.parameters_mut().nth(k).expect("index below parameter count") = v;
            probe.loss(input, target, loss)
        };
        let up = at(original + h)?;
        let down = at(original - h)?;
        at(original)?;
        numeric.push((up - down) / (2.0 * h));
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum::<f64>());
    let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn identity_net() -> Network {
        Network::from_parts(
            &[2, 2],
            Activation::Tanh,
            OutputHead::Linear,
            vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn zero_softmax_is_uniform() {
        let net = Network::zeros(&[4, 5, 3], Activation::Tanh, OutputHead::Softmax).unwrap();
        let y = net.forward(&[0.3, -1.0, 2.0, 7.0]).unwrap();
        for p in y {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_layer_passes_input_through() {
        assert_eq!(identity_net().forward(&[0.4, -0.07]).unwrap(), vec![0.4, -0.07]);
    }

    #[test]
    fn input_shape_is_checked() {
        let err = identity_net().forward(&[1.0]).unwrap_err();
        assert_eq!(err, NnError::InputShape { expected: 2, got: 1 });
    }

    #[test]
    fn zero_net_cross_entropy_is_ln3() {
        let net = Network::zeros(&[2, 3], Activation::Tanh, OutputHead::Softmax).unwrap();
        let g = net.backward(&[1.0, 2.0], Target::Class(0), LossKind::CrossEntropy).unwrap();
        assert!((g.loss - libm::log(3.0)).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let net = identity_net();
        let g = net
            .backward(&[0.4, -0.07], Target::Values(&[0.4, -0.07]), LossKind::Mse)
            .unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn incompatible_head_and_loss_is_a_config_error() {
        let net = identity_net();
        assert!(matches!(
            net.backward(&[0.0, 0.0], Target::Class(0), LossKind::CrossEntropy),
            Err(NnError::Config(_))
        ));
        let soft = Network::zeros(&[2, 2], Activation::Tanh, OutputHead::Softmax).unwrap();
        assert!(matches!(
            soft.backward(&[0.0, 0.0], Target::Values(&[0.0, 0.0]), LossKind::Mse),
            Err(NnError::Config(_))
        ));
    }

    #[test]
    fn softmax_output_is_a_distribution() {
        let mut rng = rng_from_seed(3);
        let net = Network::init(&[3, 8, 8, 4], Activation::Relu, OutputHead::Softmax, &mut rng).unwrap();
        let y = net.forward(&[0.5, -2.0, 1.5]).unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(y.iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.2, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }
}
