//! Squeeze-and-excitation channel gating.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Parameters};
use super::Tensor;
use crate::error::{Error, Result};

/// `W1: [C/r, C]`, `W2: [C, C/r]`, no biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeGateParams {
    pub w1: Tensor,
    pub w2: Tensor,
    pub reduction: usize,
}

#[derive(Debug, Clone)]
pub struct SeCache {
    squeezed: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    gates: Vec<f64>,
}

impl SeCache {
    pub fn gates(&self) -> &[f64] {
        &self.gates
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matvec(m: &Tensor, x: &[f64]) -> Vec<f64> {
    let cols = m.shape()[1];
    m.data()
        .chunks_exact(cols)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

impl SeGateParams {
    pub fn zeros(channels: usize, reduction: usize) -> Self {
        let hidden = (channels / reduction.max(1)).max(1);
        Self {
            w1: Tensor::zeros(&[hidden, channels]),
            w2: Tensor::zeros(&[channels, hidden]),
            reduction,
        }
    }

    pub fn init(channels: usize, reduction: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(channels, reduction);
        let b1 = 1.0 / (channels as f64).sqrt();
        let b2 = 1.0 / (p.hidden() as f64).sqrt();
        for v in p.w1.data_mut() {
            *v = rng.random_range(-b1..=b1);
        }
        for v in p.w2.data_mut() {
            *v = rng.random_range(-b2..=b2);
        }
        p
    }

    pub fn channels(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.shape().len() != 2
            || self.w2.shape().len() != 2
            || self.w2.shape()[0] != self.channels()
            || self.w2.shape()[1] != self.hidden()
        {
            return Err(Error::domain(format!(
                "SE weights do not chain: W1 {:?}, W2 {:?}",
                self.w1.shape(),
                self.w2.shape()
            )));
        }
        Ok(())
    }

    /// Gates a `[channels, spatial]` block stored channel-major.
    pub fn forward_cached(&self, x: &[f64], spatial: usize) -> (Vec<f64>, SeCache) {
        let c = self.channels();
        debug_assert_eq!(x.len(), c * spatial);
        let squeezed: Vec<f64> = x
            .chunks_exact(spatial)
            .map(|ch| ch.iter().sum::<f64>() / spatial as f64)
            .collect();
        let hidden_pre = matvec(&self.w1, &squeezed);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let gates: Vec<f64> = matvec(&self.w2, &hidden).into_iter().map(sigmoid).collect();
        let out = x
            .chunks_exact(spatial)
            .zip(&gates)
            .flat_map(|(ch, &a)| ch.iter().map(move |v| a * v))
            .collect();
        (
            out,
            SeCache {
                squeezed,
                hidden_pre,
                hidden,
                gates,
            },
        )
    }

    /// Accumulates weight gradients and returns `dL/dx`.
    pub fn backward_into(
        &self,
        x: &[f64],
        spatial: usize,
        cache: &SeCache,
        dy: &[f64],
        grads: &mut SeGateParams,
    ) -> Vec<f64> {
        let c = self.channels();
        let r = self.hidden();
        let mut dx = vec![0.0; x.len()];
        let mut dv = vec![0.0; c];
        for ch in 0..c {
            let a = cache.gates[ch];
            let block = ch * spatial..(ch + 1) * spatial;
            let mut da = 0.0;
            for i in block {
                dx[i] = a * dy[i];
                da += dy[i] * x[i];
            }
            dv[ch] = da * a * (1.0 - a);
        }
        let mut dh = vec![0.0; r];
        let gw2 = grads.w2.data_mut();
        for ch in 0..c {
            for j in 0..r {
                gw2[ch * r + j] += dv[ch] * cache.hidden[j];
                dh[j] += self.w2.data()[ch * r + j] * dv[ch];
            }
        }
        let mut ds = vec![0.0; c];
        let gw1 = grads.w1.data_mut();
        for j in 0..r {
            let du = if cache.hidden_pre[j] > 0.0 { dh[j] } else { 0.0 };
            if du == 0.0 {
                continue;
            }
            for ch in 0..c {
                gw1[j * c + ch] += du * cache.squeezed[ch];
                ds[ch] += self.w1.data()[j * c + ch] * du;
            }
        }
        for ch in 0..c {
            let share = ds[ch] / spatial as f64;
            for v in &mut dx[ch * spatial..(ch + 1) * spatial] {
                *v += share;
            }
        }
        dx
    }
}

impl Parameters for SeGateParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        f(&join(prefix, "w1"), self.w1.data());
        f(&join(prefix, "w2"), self.w2.data());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        f(&join(prefix, "w1"), self.w1.data_mut());
        f(&join(prefix, "w2"), self.w2.data_mut());
    }
}

/// Channel gating of a `[C, H, W]` feature map:
/// `s_c = mean(x_c)`, `a = sigmoid(W2 relu(W1 s))`, `y_c = a_c x_c`.
pub fn se_gate(feature_map: &Tensor, p: &SeGateParams) -> Result<Tensor> {
    p.validate()?;
    let shape = feature_map.shape();
    if shape.len() != 3 {
        return Err(Error::domain(format!(
            "se_gate expects a [C, H, W] tensor, got shape {shape:?}"
        )));
    }
    if shape[0] != p.channels() {
        return Err(Error::domain(format!(
            "se_gate: feature map has {} channels, gate expects {}",
            shape[0],
            p.channels()
        )));
    }
    let spatial = shape[1] * shape[2];
    if spatial == 0 {
        return Err(Error::domain("se_gate: empty spatial extent"));
    }
    let (out, _) = p.forward_cached(feature_map.data(), spatial);
    Tensor::new(shape.to_vec(), out)
}
