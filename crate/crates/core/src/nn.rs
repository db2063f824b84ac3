//! Multilayer perceptrons on top of the tape.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// Row-wise softmax; only allowed on the last layer.
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Dense layer `act(W x + b)` with `W` of shape `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Weights of a feed-forward network. Also used as the container for
/// gradients and optimizer moments, which share the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Tape handles of an [`MlpParams`] registered on a tape.
#[derive(Clone, Debug)]
pub struct MlpVars {
    layers: Vec<(Var, Var, Activation)>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weight.rank() != 2 || l.bias.shape() != [l.out_dim()] {
                return Err(Error::shape(format!(
                    "layer {}: weight {:?} with bias {:?}",
                    k,
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
            if l.activation == Activation::Softmax && k + 1 != layers.len() {
                return Err(Error::invalid(format!("softmax on hidden layer {}", k)));
            }
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    k,
                    w[0].out_dim(),
                    k + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists every width from
    /// input to output; hidden layers use `hidden`, the last layer `head`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        head: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid("need input and output sizes"));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
                let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                let w = (0..fan_in * fan_out)
                    .map(|_| crate::rng::uniform(rng, -limit, limit))
                    .collect();
                Layer {
                    weight: Tensor::matrix(fan_out, fan_in, w).expect("init shape"),
                    bias: Tensor::zeros(&[fan_out]),
                    activation: if k + 1 == n { head } else { hidden },
                }
            })
            .collect();
        Self::new(layers)
    }

    /// Same layout, all entries zero.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weight: Tensor::zeros(l.weight.shape()),
                bias: Tensor::zeros(l.bias.shape()),
                activation: l.activation,
            })
            .collect();
        MlpParams { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameter tensors in a fixed order (w0, b0, w1, b1, ...).
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn same_layout(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .tensors()
                .zip(other.tensors())
                .all(|(a, b)| a.shape() == b.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }

    /// Records the weights on the tape as leaves.
    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()), l.activation))
            .collect();
        MlpVars { layers }
    }

    /// Registers the weights and runs the network on `input` (shape `[in]`
    /// or `[rows, in]`).
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let vars = self.register(tape);
        vars.forward(tape, input)
    }

    /// Collects the gradients of registered weights into a params-shaped
    /// container. Weights that did not influence the output get zeros.
    pub fn gradients(&self, vars: &MlpVars, grads: &Gradients) -> MlpParams {
        let layers = vars
            .layers
            .iter()
            .zip(&self.layers)
            .map(|(&(w, b, _), l)| Layer {
                weight: grads.wrt(w),
                bias: grads.wrt(b),
                activation: l.activation,
            })
            .collect();
        MlpParams { layers }
    }

    /// `self += a * other`, layouts must match.
    pub fn axpy(&mut self, a: f64, other: &MlpParams) {
        for (p, q) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in p.data_mut().iter_mut().zip(q.data()) {
                *x += a * y;
            }
        }
    }
}

impl MlpVars {
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let in_dim = tape.shape(self.layers[0].0)[1];
        let s = tape.shape(input);
        if s.is_empty() || s.len() > 2 || s[s.len() - 1] != in_dim {
            return Err(Error::shape(format!(
                "network expects input width {}, got shape {:?}",
                in_dim, s
            )));
        }
        let mut h = input;
        for &(w, b, act) in &self.layers {
            h = tape.linear(h, w, b);
            h = match act {
                Activation::Relu => tape.relu(h),
                Activation::Softmax => tape.softmax(h),
                Activation::Identity => h,
            };
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    fn single(w: Vec<f64>, rows: usize, cols: usize, act: Activation) -> MlpParams {
        MlpParams::new(vec![Layer {
            weight: Tensor::matrix(rows, cols, w).unwrap(),
            bias: Tensor::zeros(&[rows]),
            activation: act,
        }])
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let mut t = Tape::new();
        let x = t.vector(vec![3.0, 4.0]);
        let y = net.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 4.0]);
    }

    #[test]
    fn softmax_head_on_zero_logits_is_uniform() {
        let net = single(vec![0.0; 4], 2, 2, Activation::Softmax);
        let mut t = Tape::new();
        let x = t.vector(vec![1.0, -7.0]);
        let y = net.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Relu);
        let mut t = Tape::new();
        let x = t.vector(vec![-1.0, 2.0]);
        let y = net.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn input_width_mismatch_reports_shapes() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Identity);
        let mut t = Tape::new();
        let x = t.vector(vec![1.0, 2.0, 3.0]);
        match net.forward(&mut t, x) {
            Err(Error::Shape(msg)) => assert!(msg.contains("2") && msg.contains("[3]"), "{}", msg),
            other => panic!("expected shape error, got {:?}", other),
        }
    }

    #[test]
    fn layer_chaining_is_validated() {
        let mut r = rng::seeded(1);
        let a = MlpParams::init(&[3, 4], Activation::Relu, Activation::Relu, &mut r).unwrap();
        let b = MlpParams::init(&[5, 2], Activation::Relu, Activation::Identity, &mut r).unwrap();
        let layers = vec![a.layers()[0].clone(), b.layers()[0].clone()];
        assert!(matches!(MlpParams::new(layers), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_only_on_last_layer() {
        let mut r = rng::seeded(2);
        let bad = MlpParams::init(&[3, 4, 2], Activation::Softmax, Activation::Identity, &mut r);
        assert!(bad.is_err());
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut r = rng::seeded(3);
        let net = MlpParams::init(&[10, 6, 4], Activation::Relu, Activation::Identity, &mut r).unwrap();
        let lim0 = math::sqrt(6.0 / 16.0);
        assert!(net.layers()[0].weight.data().iter().all(|w| w.abs() <= lim0));
        assert!(net.layers()[1].bias.data().iter().all(|&b| b == 0.0));
        assert_eq!(net.num_params(), 10 * 6 + 6 + 6 * 4 + 4);
    }
}
