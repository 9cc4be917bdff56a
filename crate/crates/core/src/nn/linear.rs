use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Parameters};
use super::Tensor;
use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut l = Self::zeros(inputs, outputs);
        for v in l.weight.data_mut().iter_mut().chain(l.bias.data_mut()) {
            *v = rng.random_range(-bound..=bound);
        }
        l
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = self.inputs();
        debug_assert_eq!(x.len(), n);
        self.weight
            .data()
            .chunks_exact(n)
            .zip(self.bias.data())
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_into(&self, x: &[f64], dy: &[f64], grads: &mut Linear) -> Vec<f64> {
        let n = self.inputs();
        let mut dx = vec![0.0; n];
        let gw = grads.weight.data_mut();
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &self.weight.data()[o * n..(o + 1) * n];
            let grow = &mut gw[o * n..(o + 1) * n];
            for i in 0..n {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        for (b, g) in grads.bias.data_mut().iter_mut().zip(dy) {
            *b += g;
        }
        dx
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.inputs() {
            return Err(Error::domain(format!(
                "layer expects {} inputs, got {len}",
                self.inputs()
            )));
        }
        Ok(())
    }
}

impl Parameters for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(&join(prefix, "weight"), self.weight.data());
        f(&join(prefix, "bias"), self.bias.data());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&join(prefix, "weight"), self.weight.data_mut());
        f(&join(prefix, "bias"), self.bias.data_mut());
    }
}
