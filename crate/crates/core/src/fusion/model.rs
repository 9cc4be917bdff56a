//! Dual-stream attention fusion: `H_i = MLP_i(F_i)`, `a = att1(H1)`,
//! `b = att2(H2)`, `alpha = |a| / (|a| + |b|)`, `Z = alpha F1 + beta F2`,
//! `R = softmax(W Z + c)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{attention_entropy, softmax, softmax_cross_entropy};
use crate::nn::mlp::MlpCache;
use crate::nn::params::{join, Parameters};
use crate::nn::{Linear, MlpParams};

/// Which streams reach the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionMode {
    #[default]
    Adaptive,
    /// alpha fixed to 1.
    CombinedOnly,
    /// alpha fixed to 0.
    ShadowOnly,
}

impl AttentionMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::CombinedOnly => "combined-only",
            Self::ShadowOnly => "shadow-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adaptive" | "fused" => Ok(Self::Adaptive),
            "combined-only" | "combined" => Ok(Self::CombinedOnly),
            "shadow-only" | "shadow" => Ok(Self::ShadowOnly),
            _ => Err(Error::domain(format!("unknown attention mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionDims {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    pub classes: usize,
}

impl Default for FusionDims {
    fn default() -> Self {
        Self {
            feature_dim: super::FEATURE_DIM,
            hidden_dim: 16,
            attention_dim: 16,
            classes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub mlp1: MlpParams,
    pub mlp2: MlpParams,
    pub att1: Linear,
    pub att2: Linear,
    pub head: Linear,
    /// Weight of the attention-entropy term. Negative values reward spread.
    pub lambda: f64,
    pub mode: AttentionMode,
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone)]
pub struct FusionForward {
    pub alpha: f64,
    pub beta: f64,
    pub z: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    attention: Option<AttentionCache>,
}

#[derive(Debug, Clone)]
struct AttentionCache {
    h1: Vec<f64>,
    h2: Vec<f64>,
    c1: MlpCache,
    c2: MlpCache,
    abar: Vec<f64>,
    bbar: Vec<f64>,
}

impl FusionForward {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalized attention pair from the two attention vectors. Two zero
/// vectors give `(0.5, 0.5)`.
pub fn normalized_attention(abar: &[f64], bbar: &[f64]) -> (f64, f64) {
    let (na, nb) = (norm(abar), norm(bbar));
    let s = na + nb;
    if s == 0.0 {
        return (0.5, 0.5);
    }
    let alpha = na / s;
    (alpha, 1.0 - alpha)
}

/// `Z = alpha F1 + beta F2`. The boundary weights return the selected
/// stream unchanged.
pub fn fuse(f1: &[f64], f2: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>> {
    if f1.len() != f2.len() {
        return Err(Error::domain(format!(
            "stream dimensions differ: {} vs {}",
            f1.len(),
            f2.len()
        )));
    }
    Ok(if beta == 0.0 && alpha == 1.0 {
        f1.to_vec()
    } else if alpha == 0.0 && beta == 1.0 {
        f2.to_vec()
    } else {
        f1.iter().zip(f2).map(|(a, b)| alpha * a + beta * b).collect()
    })
}

/// Fused vector and class probabilities for given attention weights.
pub fn fuse_and_classify(
    f1: &[f64],
    f2: &[f64],
    alpha: f64,
    beta: f64,
    head: &Linear,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let z = fuse(f1, f2, alpha, beta)?;
    head.check_input(z.len())?;
    let r = softmax(&head.forward(&z));
    Ok((z, r))
}

/// Value and gradients of the objective for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub cross_entropy: f64,
    pub entropy: f64,
    /// Gradient with respect to the head logits.
    pub d_logits: Vec<f64>,
    pub d_alpha: f64,
    pub d_beta: f64,
}

/// `-ln R[target] + lambda * H(alpha, beta)` where `H` is the Shannon
/// entropy of the attention pair.
pub fn total_loss(r: &[f64], target: usize, alpha: f64, beta: f64, lambda: f64) -> Result<TotalLoss> {
    if target >= r.len() {
        return Err(Error::domain(format!("target {target} out of range for {} classes", r.len())));
    }
    let cross_entropy = -r[target].max(f64::MIN_POSITIVE).ln();
    let mut d_logits = r.to_vec();
    d_logits[target] -= 1.0;
    let (entropy, g) = attention_entropy(&[alpha, beta])?;
    Ok(TotalLoss {
        value: cross_entropy + lambda * entropy,
        cross_entropy,
        entropy,
        d_logits,
        d_alpha: lambda * g[0],
        d_beta: lambda * g[1],
    })
}

impl FusionModel {
    pub fn init(dims: FusionDims, lambda: f64, mode: AttentionMode, rng: &mut impl Rng) -> Self {
        let FusionDims {
            feature_dim: d,
            hidden_dim: h,
            attention_dim: a,
            classes: k,
        } = dims;
        Self {
            mlp1: MlpParams::init(&[d, h, h], rng),
            mlp2: MlpParams::init(&[d, h, h], rng),
            att1: Linear::init(h, a, rng),
            att2: Linear::init(h, a, rng),
            head: Linear::init(d, k, rng),
            lambda,
            mode,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            mlp1: self.mlp1.zeros_like(),
            mlp2: self.mlp2.zeros_like(),
            att1: Linear::zeros(self.att1.inputs(), self.att1.outputs()),
            att2: Linear::zeros(self.att2.inputs(), self.att2.outputs()),
            head: Linear::zeros(self.head.inputs(), self.head.outputs()),
            lambda: self.lambda,
            mode: self.mode,
        }
    }

    pub fn dims(&self) -> FusionDims {
        FusionDims {
            feature_dim: self.head.inputs(),
            hidden_dim: self.mlp1.output_dim(),
            attention_dim: self.att1.outputs(),
            classes: self.head.outputs(),
        }
    }

    pub fn classes(&self) -> usize {
        self.head.outputs()
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp1.validate()?;
        self.mlp2.validate()?;
        let d = self.head.inputs();
        if self.mlp1.input_dim() != d || self.mlp2.input_dim() != d {
            return Err(Error::domain("stream MLP input sizes must equal the head input size"));
        }
        let h = self.mlp1.output_dim();
        if self.mlp2.output_dim() != h || self.att1.inputs() != h || self.att2.inputs() != h {
            return Err(Error::domain("H1, H2 and attention inputs must share one size"));
        }
        if self.att1.outputs() != self.att2.outputs() {
            return Err(Error::domain("attention heads must share one output size"));
        }
        Ok(())
    }

    /// Attention pair for given stream features.
    pub fn attention_weights(&self, h1: &[f64], h2: &[f64]) -> Result<(f64, f64)> {
        self.att1.check_input(h1.len())?;
        self.att2.check_input(h2.len())?;
        Ok(normalized_attention(&self.att1.forward(h1), &self.att2.forward(h2)))
    }

    pub fn forward(&self, f1: &[f64], f2: &[f64]) -> Result<FusionForward> {
        let d = self.head.inputs();
        if f1.len() != d || f2.len() != d {
            return Err(Error::domain(format!(
                "model expects {d}-dim features, got {} and {}",
                f1.len(),
                f2.len()
            )));
        }
        let (alpha, beta, attention) = match self.mode {
            AttentionMode::CombinedOnly => (1.0, 0.0, None),
            AttentionMode::ShadowOnly => (0.0, 1.0, None),
            AttentionMode::Adaptive => {
                let (h1, c1) = self.mlp1.forward_cached(f1);
                let (h2, c2) = self.mlp2.forward_cached(f2);
                let abar = self.att1.forward(&h1);
                let bbar = self.att2.forward(&h2);
                let (alpha, beta) = normalized_attention(&abar, &bbar);
                (
                    alpha,
                    beta,
                    Some(AttentionCache {
                        h1,
                        h2,
                        c1,
                        c2,
                        abar,
                        bbar,
                    }),
                )
            }
        };
        let z = fuse(f1, f2, alpha, beta)?;
        let logits = self.head.forward(&z);
        let probs = softmax(&logits);
        Ok(FusionForward {
            alpha,
            beta,
            z,
            logits,
            probs,
            attention,
        })
    }

    /// Loss of one sample; parameter gradients are accumulated into `grads`.
    pub fn value_and_grad(
        &self,
        f1: &[f64],
        f2: &[f64],
        target: usize,
        grads: &mut FusionModel,
    ) -> Result<(TotalLoss, FusionForward)> {
        let fw = self.forward(f1, f2)?;
        let (ce, d_logits) = softmax_cross_entropy(&fw.logits, target)?;
        let mut loss = match self.mode {
            AttentionMode::Adaptive => total_loss(&fw.probs, target, fw.alpha, fw.beta, self.lambda)?,
            _ => TotalLoss {
                value: 0.0,
                cross_entropy: 0.0,
                entropy: 0.0,
                d_logits: Vec::new(),
                d_alpha: 0.0,
                d_beta: 0.0,
            },
        };
        // the logits route is numerically safer than -ln R
        loss.value = ce + self.lambda * loss.entropy;
        loss.cross_entropy = ce;
        loss.d_logits = d_logits;

        let dz = self.head.backward_into(&fw.z, &loss.d_logits, &mut grads.head);
        if let Some(cache) = &fw.attention {
            let d_alpha = loss.d_alpha + dz.iter().zip(f1).map(|(g, v)| g * v).sum::<f64>();
            let d_beta = loss.d_beta + dz.iter().zip(f2).map(|(g, v)| g * v).sum::<f64>();
            let (na, nb) = (norm(&cache.abar), norm(&cache.bbar));
            let s = na + nb;
            if s > 0.0 {
                let diff = d_alpha - d_beta;
                let dna = diff * nb / (s * s);
                let dnb = -diff * na / (s * s);
                let da: Vec<f64> = if na > 0.0 {
                    cache.abar.iter().map(|v| dna * v / na).collect()
                } else {
                    vec![0.0; cache.abar.len()]
                };
                let db: Vec<f64> = if nb > 0.0 {
                    cache.bbar.iter().map(|v| dnb * v / nb).collect()
                } else {
                    vec![0.0; cache.bbar.len()]
                };
                let dh1 = self.att1.backward_into(&cache.h1, &da, &mut grads.att1);
                let dh2 = self.att2.backward_into(&cache.h2, &db, &mut grads.att2);
                self.mlp1.backward_into(&cache.c1, &dh1, &mut grads.mlp1);
                self.mlp2.backward_into(&cache.c2, &dh2, &mut grads.mlp2);
            }
        }
        Ok((loss, fw))
    }
}

impl Parameters for FusionModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.mlp1.visit(&join(prefix, "mlp1"), f);
        self.mlp2.visit(&join(prefix, "mlp2"), f);
        self.att1.visit(&join(prefix, "att1"), f);
        self.att2.visit(&join(prefix, "att2"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.mlp1.visit_mut(&join(prefix, "mlp1"), f);
        self.mlp2.visit_mut(&join(prefix, "mlp2"), f);
        self.att1.visit_mut(&join(prefix, "att1"), f);
        self.att2.visit_mut(&join(prefix, "att2"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}
