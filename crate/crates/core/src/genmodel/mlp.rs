use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative(self, pre: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^v)` without overflow.
#[inline]
pub(crate) fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Fully connected layer: `activation(W x + b)`, `W` stored row-major as
/// `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer `(dW, db)` with the same layout as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Forward-pass record needed for backpropagation.
pub struct Trace {
    /// Input followed by each layer's output.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty")
    }
}

impl Mlp {
    /// Glorot-uniform weights and zero biases. `widths` lists the input width
    /// and every layer's output width.
    pub fn new(widths: &[usize], activations: &[Activation], rng: &mut Rng) -> Self {
        assert_eq!(widths.len(), activations.len() + 1);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect(),
                    bias: vec![0.0; outputs],
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network without layers".into()));
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Config("layer parameter shape mismatch".into()));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::WidthMismatch {
                    expected: pair[0].outputs,
                    got: pair[1].inputs,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.activations.pop().expect("non-empty"))
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                got: x.len(),
            });
        }
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = activations.last().expect("non-empty");
            let z: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    let w = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    l.bias[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            activations.push(z.iter().map(|&v| l.activation.apply(v)).collect());
            pre.push(z);
        }
        Ok(Trace { activations, pre })
    }

    /// Accumulates parameter gradients of a scalar loss with output gradient
    /// `grad_out` into `grads`; returns the gradient with respect to the
    /// input.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let out = &trace.activations[li + 1];
            let pre = &trace.pre[li];
            for o in 0..l.outputs {
                delta[o] *= l.activation.derivative(pre[o], out[o]);
            }
            let input = &trace.activations[li];
            let (gw, gb) = &mut grads.layers[li];
            let mut next = vec![0.0; l.inputs];
            for o in 0..l.outputs {
                let dz = delta[o];
                gb[o] += dz;
                let row = o * l.inputs;
                for i in 0..l.inputs {
                    gw[row + i] += dz * input[i];
                    next[i] += dz * l.weights[row + i];
                }
            }
            delta = next;
        }
        delta
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= lr * g);
            l.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= lr * g);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b))
            .map(|g| g * g)
            .sum()
    }

    pub fn scale(&mut self, c: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|g| *g *= c);
        }
    }
}

/// Rescales `groups` jointly so their combined norm is at most `max_norm`.
pub(crate) fn clip_joint(groups: &mut [&mut Gradients], max_norm: f64) {
    let norm = groups.iter().map(|g| g.norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm {
        let c = max_norm / norm;
        for g in groups.iter_mut() {
            g.scale(c);
        }
    }
}

/// Forward pass of `net` on `x`.
pub fn mlp_forward(net: &Mlp, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_net() {
        let net = Mlp::from_layers(vec![Layer {
            inputs: 3,
            outputs: 3,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            bias: vec![0.0; 3],
            activation: Activation::Linear,
        }])
        .unwrap();
        assert_eq!(
            mlp_forward(&net, &[0.5, -2.0, 7.0]).unwrap(),
            vec![0.5, -2.0, 7.0]
        );
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn sigmoid_range() {
        let net = Mlp::new(&[4, 6], &[Activation::Sigmoid], &mut seeded(1));
        let y = net.forward(&[100.0, -3.0, 0.2, 9.0]).unwrap();
        assert!(y
            .iter()
            .all(|&v| v > 0.0 && v < 1.0 || v == 1.0 || v == 0.0));
        let y = net.forward(&[0.1, -0.3, 0.2, 0.4]).unwrap();
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn stable_softplus() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn params_roundtrip() {
        let mut net = Mlp::new(
            &[2, 3, 1],
            &[Activation::Tanh, Activation::Linear],
            &mut seeded(2),
        );
        let p = net.params();
        assert_eq!(p.len(), net.n_params());
        assert_eq!(net.n_params(), 2 * 3 + 3 + 3 + 1);
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        net.set_params(&doubled);
        assert_eq!(net.params(), doubled);
    }
}
