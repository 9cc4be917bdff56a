use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::Linear;
use super::params::{join, Parameters};
use super::Tensor;
use crate::error::{Error, Result};

/// Stack of linear layers with ReLU between them (none after the last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Linear>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of every hidden layer.
    pre: Vec<Vec<f64>>,
}

impl MlpParams {
    /// `dims = [in, hidden.., out]`.
    pub fn init(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output sizes");
        Self {
            layers: dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::domain("MLP has no layers"));
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::domain(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    w[0].outputs(),
                    i + 1,
                    w[1].inputs()
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty MLP").outputs()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&cur);
            inputs.push(std::mem::take(&mut cur));
            if i < last {
                cur = z.iter().map(|&v| v.max(0.0)).collect();
                pre.push(z);
            } else {
                cur = z;
            }
        }
        (cur, MlpCache { inputs, pre })
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and
    /// returns the gradient with respect to the input.
    pub fn backward_into(&self, cache: &MlpCache, dy: &[f64], grads: &mut MlpParams) -> Vec<f64> {
        let mut g = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i < self.layers.len() - 1 {
                for (gv, &z) in g.iter_mut().zip(&cache.pre[i]) {
                    if z <= 0.0 {
                        *gv = 0.0;
                    }
                }
            }
            g = self.layers[i].backward_into(&cache.inputs[i], &g, &mut grads.layers[i]);
        }
        g
    }
}

impl Parameters for MlpParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            l.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

/// Forward pass plus exact reverse-mode gradients for a given upstream
/// gradient. Returns `(output, parameter gradients, input gradient)`.
pub fn mlp_value_and_grad(
    params: &MlpParams,
    input: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, MlpParams, Tensor)> {
    params.validate()?;
    params.layers[0].check_input(input.len())?;
    if upstream.len() != params.output_dim() {
        return Err(Error::domain(format!(
            "upstream gradient has {} values, MLP outputs {}",
            upstream.len(),
            params.output_dim()
        )));
    }
    let (out, cache) = params.forward_cached(input.data());
    let mut grads = params.zeros_like();
    let dx = params.backward_into(&cache, upstream.data(), &mut grads);
    Ok((Tensor::vector(out), grads, Tensor::vector(dx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::finite_difference_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_linear_layer() {
        let mut p = MlpParams { layers: vec![Linear::zeros(3, 3)] };
        let w = [2.0, 0.0, 1.0, -1.0, 3.0, 0.0, 0.5, 0.5, 0.5];
        p.layers[0].weight.data_mut().copy_from_slice(&w);
        let x = Tensor::vector(vec![1.0, 2.0, 4.0]);
        let (y, _, _) = mlp_value_and_grad(&p, &x, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y.data(), &[6.0, 5.0, 3.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::init(&[4, 6, 3], &mut rng);
        let x = Tensor::vector(vec![0.1, -0.4, 0.7, 0.2]);
        let (_, g, dx) = mlp_value_and_grad(&p, &x, &Tensor::zeros(&[3])).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_domain_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::init(&[4, 3], &mut rng);
        let bad = Tensor::vector(vec![0.0; 5]);
        assert!(mlp_value_and_grad(&p, &bad, &Tensor::zeros(&[3])).unwrap_err().is_domain());
        let x = Tensor::vector(vec![0.0; 4]);
        assert!(mlp_value_and_grad(&p, &x, &Tensor::zeros(&[2])).is_err());
        let broken = MlpParams { layers: vec![Linear::zeros(4, 3), Linear::zeros(2, 1)] };
        assert!(broken.validate().is_err());
    }

    #[test]
    fn two_layer_gradients_match_finite_differences() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..5 {
            let p = MlpParams::init(&[5, 7, 3], &mut rng);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g, dx) =
                mlp_value_and_grad(&p, &Tensor::vector(x.clone()), &Tensor::vector(up.clone()))
                    .unwrap();
            let loss = |flat: &[f64]| {
                let mut q = p.clone();
                q.assign_flat(flat);
                q.forward(&x).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
            };
            let report = finite_difference_check(loss, &p.flatten(), &g.flatten(), 1e-6);
            assert!(report.passed, "trial {trial}: {report:?}");

            let loss_x = |xs: &[f64]| p.forward(xs).iter().zip(&up).map(|(a, b)| a * b).sum::<f64>();
            let report = finite_difference_check(loss_x, &x, dx.data(), 1e-6);
            assert!(report.passed, "input grad, trial {trial}: {report:?}");
        }
    }
}
