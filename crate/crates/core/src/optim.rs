//! Gradient steps for [`MlpParams`]: plain SGD and ADAM.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::nn::MlpParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Descent => -1.0,
            Direction::Ascent => 1.0,
        }
    }
}

/// Optimizer state for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of completed updates.
    pub t: u64,
    /// First and second moments, one flat vector per parameter tensor.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptState {
    pub fn sgd() -> Self {
        Self::new(OptimizerKind::Sgd)
    }

    /// ADAM with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam() -> Self {
        Self::new(OptimizerKind::Adam)
    }

    pub fn new(kind: OptimizerKind) -> Self {
        OptState { kind, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Forgets the step counter and moments.
    pub fn reset(&mut self) {
        self.t = 0;
        self.m.clear();
        self.v.clear();
    }

    /// Applies one update. A non-finite gradient entry rejects the whole
    /// step and leaves `params` untouched.
    pub fn step(
        &mut self,
        params: &mut MlpParams,
        grads: &MlpParams,
        lr: f64,
        direction: Direction,
    ) -> Result<()> {
        if !params.same_layout(grads) {
            return Err(Error::shape("gradient layout does not match parameters"));
        }
        if let Some(k) = grads.tensors().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient tensor {}", k)));
        }
        let sign = direction.sign();
        match self.kind {
            OptimizerKind::Sgd => {
                params.axpy(sign * lr, grads);
                self.t += 1;
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.tensors().map(|g| alloc::vec![0.0; g.len()]).collect();
                    self.v = self.m.clone();
                }
                self.t += 1;
                let t = self.t as f64;
                let c1 = 1.0 - math::powf(self.beta1, t);
                let c2 = 1.0 - math::powf(self.beta2, t);
                for (k, (p, g)) in params.tensors_mut().zip(grads.tensors()).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for (i, (x, &gi)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                        let mhat = m[i] / c1;
                        let vhat = v[i] / c2;
                        *x += sign * lr * mhat / (math::sqrt(vhat) + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}
