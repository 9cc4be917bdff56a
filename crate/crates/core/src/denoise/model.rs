//! Patch autoencoder with squeeze-and-excitation gating on its latent.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{region_masked_loss, LossWeights, RegionMask};
use crate::error::{Error, Result};
use crate::imaging::{convolve_uniform, Raster};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::mlp::MlpCache;
use crate::nn::params::{join, Parameters};
use crate::nn::se::SeCache;
use crate::nn::{adam_step, AdamState, MlpParams, SeGateParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiseDims {
    pub patch_size: usize,
    pub stride: usize,
    pub hidden: usize,
    /// Latent channels; each holds `patch_size` values.
    pub channels: usize,
    pub reduction: usize,
}

impl Default for DenoiseDims {
    fn default() -> Self {
        Self {
            patch_size: 9,
            stride: 4,
            hidden: 64,
            channels: 8,
            reduction: 4,
        }
    }
}

impl DenoiseDims {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size.is_multiple_of(2) || self.patch_size < 3 {
            return Err(Error::domain(format!("patch size must be odd and >= 3, got {}", self.patch_size)));
        }
        if self.stride == 0 || self.stride > self.patch_size {
            return Err(Error::domain("stride must lie in 1..=patch size"));
        }
        if self.hidden == 0 || self.channels == 0 || self.reduction == 0 || !self.channels.is_multiple_of(self.reduction) {
            return Err(Error::domain("latent channels must be a positive multiple of the reduction"));
        }
        Ok(())
    }

    fn pixels(&self) -> usize {
        self.patch_size * self.patch_size
    }

    fn latent(&self) -> usize {
        self.channels * self.patch_size
    }
}

/// `out = x + decoder(se(encoder(x)))` on flattened square patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseModel {
    pub dims: DenoiseDims,
    pub encoder: MlpParams,
    pub gate: SeGateParams,
    pub decoder: MlpParams,
}

struct PatchCache {
    enc: MlpCache,
    latent: Vec<f64>,
    se: SeCache,
    dec: MlpCache,
}

impl DenoiseModel {
    /// Random init with the decoder's last layer zeroed, so an untrained
    /// model is the identity.
    pub fn init(dims: DenoiseDims, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        let (p, l) = (dims.pixels(), dims.latent());
        let encoder = MlpParams::init(&[p, dims.hidden, l], rng);
        let gate = SeGateParams::init(dims.channels, dims.reduction, rng);
        let mut decoder = MlpParams::init(&[l, dims.hidden, p], rng);
        decoder.layers.last_mut().expect("two layers").zero();
        Ok(Self {
            dims,
            encoder,
            gate,
            decoder,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims,
            encoder: self.encoder.zeros_like(),
            gate: SeGateParams::zeros(self.dims.channels, self.dims.reduction),
            decoder: self.decoder.zeros_like(),
        }
    }

    fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, PatchCache) {
        let (latent, enc) = self.encoder.forward_cached(x);
        let (gated, se) = self.gate.forward_cached(&latent, self.dims.patch_size);
        let (y, dec) = self.decoder.forward_cached(&gated);
        let out = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        (
            out,
            PatchCache {
                enc,
                latent,
                se,
                dec,
            },
        )
    }

    /// Denoised flattened patch (unclipped).
    pub fn forward_patch(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims.pixels() {
            return Err(Error::domain(format!(
                "patch has {} values, model expects {}",
                x.len(),
                self.dims.pixels()
            )));
        }
        Ok(self.forward_cached(x).0)
    }

    /// Loss of one patch triple; gradients are accumulated into `grads`.
    pub fn patch_value_and_grad(
        &self,
        patch: &TrainingPatch,
        weights: &LossWeights,
        grads: &mut DenoiseModel,
    ) -> Result<f64> {
        let (out, cache) = self.forward_cached(&patch.noisy);
        let k = self.dims.patch_size;
        let out_r = Raster::new(k, k, 1, out)?;
        let clean = Raster::new(k, k, 1, patch.clean.clone())?;
        let mask = RegionMask::new(k, k, patch.mask.clone())?;
        let (value, dout) = region_masked_loss(&out_r, &clean, &mask, weights)?;
        let dgated = self.decoder.backward_into(&cache.dec, dout.data(), &mut grads.decoder);
        let dlatent = self.gate.backward_into(&cache.latent, k, &cache.se, &dgated, &mut grads.gate);
        self.encoder.backward_into(&cache.enc, &dlatent, &mut grads.encoder);
        Ok(value)
    }

    /// Every channel is denoised independently; overlapping patch outputs
    /// are averaged and the result is clipped to [0, 1].
    pub fn denoise_image(&self, noisy: &Raster) -> Result<Raster> {
        let (h, w, c) = noisy.dims();
        let k = self.dims.patch_size;
        if h < k || w < k {
            return Err(Error::domain(format!("image {h}x{w} is smaller than the {k}x{k} patch")));
        }
        let ys = positions(h, k, self.dims.stride);
        let xs = positions(w, k, self.dims.stride);
        let mut out = Raster::filled(h, w, c, 0.0);
        for ch in 0..c {
            let plane = noisy.channel_plane(ch);
            let mut acc = vec![0.0; h * w];
            let mut hits = vec![0u32; h * w];
            let mut patch = vec![0.0; k * k];
            for &y0 in &ys {
                for &x0 in &xs {
                    for dy in 0..k {
                        patch[dy * k..(dy + 1) * k]
                            .copy_from_slice(&plane.data()[(y0 + dy) * w + x0..(y0 + dy) * w + x0 + k]);
                    }
                    let den = self.forward_cached(&patch).0;
                    for dy in 0..k {
                        for dx in 0..k {
                            let i = (y0 + dy) * w + x0 + dx;
                            acc[i] += den[dy * k + dx];
                            hits[i] += 1;
                        }
                    }
                }
            }
            for i in 0..h * w {
                out.set(i / w, i % w, ch, (acc[i] / hits[i] as f64).clamp(0.0, 1.0));
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path, config: &DenoiseTrainConfig) -> Result<()> {
        let ckpt = Checkpoint::from_parameters(self, "denoiser");
        let side = DenoiseSidecar {
            kind: SIDECAR_KIND.into(),
            dims: self.dims,
            train_config: config.clone(),
        };
        save_checkpoint(path, &ckpt, &side)
    }

    pub fn load(path: &Path) -> Result<(Self, DenoiseTrainConfig)> {
        let (ckpt, side): (Checkpoint, DenoiseSidecar) = load_checkpoint(path)?;
        if side.kind != SIDECAR_KIND {
            return Err(Error::Format(format!("{} is a {} checkpoint, not denoiser", path.display(), side.kind)));
        }
        let mut model = Self::init(side.dims, &mut ChaCha8Rng::seed_from_u64(0))?;
        ckpt.restore_parameters(&mut model, "denoiser")?;
        Ok((model, side.train_config))
    }
}

const SIDECAR_KIND: &str = "denoiser";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DenoiseSidecar {
    kind: String,
    dims: DenoiseDims,
    train_config: DenoiseTrainConfig,
}

/// Patch origins covering `0..len`, always including the last position.
fn positions(len: usize, k: usize, stride: usize) -> Vec<usize> {
    let last = len - k;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().expect("at least one position") != last {
        v.push(last);
    }
    v
}

impl Parameters for DenoiseModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.gate.visit(&join(prefix, "gate"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.gate.visit_mut(&join(prefix, "gate"), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
    }
}

/// One image triple used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisePair {
    pub noisy: Raster,
    pub clean: Raster,
    pub mask: RegionMask,
}

/// A flattened training patch cut from a [`DenoisePair`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPatch {
    pub noisy: Vec<f64>,
    pub clean: Vec<f64>,
    pub mask: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseTrainConfig {
    pub dims: DenoiseDims,
    pub epochs: usize,
    /// Patches sampled (once, up front) from the training images.
    pub patches: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for DenoiseTrainConfig {
    fn default() -> Self {
        Self {
            dims: DenoiseDims::default(),
            epochs: 120,
            patches: 2048,
            batch_size: 32,
            learning_rate: 1e-3,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

pub fn sample_patches(pairs: &[DenoisePair], k: usize, count: usize, rng: &mut impl Rng) -> Result<Vec<TrainingPatch>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let pair = &pairs[i % pairs.len()];
        let (h, w, c) = pair.noisy.dims();
        let y0 = rng.random_range(0..=h - k);
        let x0 = rng.random_range(0..=w - k);
        let ch = rng.random_range(0..c);
        let mut p = TrainingPatch {
            noisy: Vec::with_capacity(k * k),
            clean: Vec::with_capacity(k * k),
            mask: Vec::with_capacity(k * k),
        };
        for y in y0..y0 + k {
            for x in x0..x0 + k {
                p.noisy.push(pair.noisy.get(y, x, ch));
                p.clean.push(pair.clean.get(y, x, ch));
                p.mask.push(pair.mask.get(y, x));
            }
        }
        out.push(p);
    }
    Ok(out)
}

fn check_pairs(pairs: &[DenoisePair], k: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::domain("denoiser training needs at least one image pair"));
    }
    for (i, p) in pairs.iter().enumerate() {
        p.noisy.check_same_shape(&p.clean, "training pair")?;
        if (p.mask.height(), p.mask.width()) != (p.noisy.height(), p.noisy.width()) {
            return Err(Error::domain(format!("pair {i}: mask size does not match the images")));
        }
        if p.noisy.height() < k || p.noisy.width() < k {
            return Err(Error::domain(format!("pair {i} is smaller than the {k}x{k} patch")));
        }
    }
    Ok(())
}

/// Trains on patches sampled from `pairs`; returns the model and the mean
/// loss of every epoch.
pub fn train_patch_denoiser(pairs: &[DenoisePair], cfg: &DenoiseTrainConfig) -> Result<(DenoiseModel, Vec<f64>)> {
    cfg.dims.validate()?;
    cfg.weights.validate()?;
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.patches == 0 {
        return Err(Error::domain("epochs, batch size and patch count must be positive"));
    }
    check_pairs(pairs, cfg.dims.patch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = DenoiseModel::init(cfg.dims, &mut rng)?;
    let patches = sample_patches(pairs, cfg.dims.patch_size, cfg.patches, &mut rng)?;
    train_on_patches(&mut model, &patches, cfg, &mut rng)
        .map(|history| (model, history))
}

pub fn train_on_patches(
    model: &mut DenoiseModel,
    patches: &[TrainingPatch],
    cfg: &DenoiseTrainConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zeros_like();
            for &i in batch {
                total += model.patch_value_and_grad(&patches[i], &cfg.weights, &mut grads)?;
            }
            let k = 1.0 / batch.len() as f64;
            grads.visit_mut("", &mut |_, s| s.iter_mut().for_each(|v| *v *= k));
            adam_step(&mut adam, model, &grads)?;
        }
        let mean = total / patches.len() as f64;
        if epoch % 10 == 0 || epoch + 1 == cfg.epochs {
            info!("denoiser epoch {epoch}: loss {mean:.6}");
        }
        history.push(mean);
    }
    Ok(history)
}

/// `M * smooth_weak + (1 - M) * smooth_strong` per channel, with uniform
/// smoothing of the given odd kernel sizes.
pub fn baseline_region_filter(noisy: &Raster, mask: &RegionMask, strong: usize, weak: usize) -> Result<Raster> {
    if strong < weak {
        return Err(Error::domain(format!("strong kernel {strong} is smaller than weak kernel {weak}")));
    }
    let (h, w, c) = noisy.dims();
    if (mask.height(), mask.width()) != (h, w) {
        return Err(Error::domain("region mask does not match the image"));
    }
    let mut out = Raster::filled(h, w, c, 0.0);
    for ch in 0..c {
        let plane = noisy.channel_plane(ch);
        let s = convolve_uniform(&plane, strong)?;
        let wk = convolve_uniform(&plane, weak)?;
        for y in 0..h {
            for x in 0..w {
                let m = mask.get(y, x);
                out.set(y, x, ch, m * wk.get(y, x) + (1.0 - m) * s.get(y, x));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;

    fn tiny_dims() -> DenoiseDims {
        DenoiseDims {
            patch_size: 3,
            stride: 2,
            hidden: 5,
            channels: 4,
            reduction: 2,
        }
    }

    fn textured(h: usize, w: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(h, w, 1, |_, _, _| rng.random_range(0.2..0.8)).unwrap()
    }

    #[test]
    fn untrained_model_is_identity() {
        let m = DenoiseModel::init(DenoiseDims::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let img = textured(20, 23, 2);
        let out = m.denoise_image(&img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_task_converges() {
        let img = textured(16, 16, 3);
        let pair = DenoisePair {
            noisy: img.clone(),
            clean: img,
            mask: RegionMask::uniform(16, 16, 0.5).unwrap(),
        };
        let cfg = DenoiseTrainConfig {
            epochs: 200,
            patches: 16,
            batch_size: 4,
            ..Default::default()
        };
        let (model, history) = train_patch_denoiser(&[pair], &cfg).unwrap();
        assert!(*history.last().unwrap() < 1e-4, "{:?}", history.last());
        let flat = Raster::filled(12, 12, 1, 0.4);
        let out = model.denoise_image(&flat).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.4).abs() < 1e-3));
    }

    #[test]
    fn deterministic_training() {
        let pair = DenoisePair {
            noisy: textured(12, 12, 4),
            clean: textured(12, 12, 5),
            mask: RegionMask::uniform(12, 12, 0.0).unwrap(),
        };
        let cfg = DenoiseTrainConfig {
            dims: tiny_dims(),
            epochs: 3,
            patches: 20,
            batch_size: 5,
            ..Default::default()
        };
        let a = train_patch_denoiser(std::slice::from_ref(&pair), &cfg).unwrap();
        let b = train_patch_denoiser(&[pair], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(train_patch_denoiser(&[], &cfg).is_err());
    }

    #[test]
    fn output_shape_and_size_check() {
        let m = DenoiseModel::init(tiny_dims(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let img = Raster::filled(7, 4, 3, 0.2);
        assert_eq!(m.denoise_image(&img).unwrap().dims(), (7, 4, 3));
        assert!(m.denoise_image(&Raster::filled(2, 5, 1, 0.0)).is_err());
    }

    #[test]
    fn patch_gradient_matches_finite_differences() {
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = DenoiseModel::init(tiny_dims(), &mut rng).unwrap();
            // leave the identity start so every path carries gradient
            for v in model.decoder.layers.last_mut().unwrap().weight.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
            let patch = TrainingPatch {
                noisy: (0..9).map(|_| rng.random_range(0.0..1.0)).collect(),
                clean: (0..9).map(|_| rng.random_range(0.0..1.0)).collect(),
                mask: (0..9).map(|_| rng.random_range(0.0..1.0)).collect(),
            };
            let weights = LossWeights {
                lambda3: 0.3,
                ..Default::default()
            };
            let mut grads = model.zeros_like();
            model.patch_value_and_grad(&patch, &weights, &mut grads).unwrap();
            let mut probe = model.clone();
            let report = finite_difference_check(
                |p| {
                    probe.assign_flat(p);
                    let mut g = probe.zeros_like();
                    probe.patch_value_and_grad(&patch, &weights, &mut g).unwrap()
                },
                &model.flatten(),
                &grads.flatten(),
                1e-5,
            );
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn baseline_blend_boundaries() {
        let img = textured(15, 15, 6);
        let plane = img.channel_plane(0);
        let weak = Raster::from_plane(&convolve_uniform(&plane, 3).unwrap());
        let strong = Raster::from_plane(&convolve_uniform(&plane, 7).unwrap());
        let ones = RegionMask::uniform(15, 15, 1.0).unwrap();
        let zeros = RegionMask::uniform(15, 15, 0.0).unwrap();
        assert_eq!(baseline_region_filter(&img, &ones, 7, 3).unwrap(), weak);
        assert_eq!(baseline_region_filter(&img, &zeros, 7, 3).unwrap(), strong);
        let half = RegionMask::uniform(15, 15, 0.5).unwrap();
        let any = baseline_region_filter(&img, &half, 5, 5).unwrap();
        assert_eq!(any, baseline_region_filter(&img, &ones, 5, 5).unwrap());
        assert!(baseline_region_filter(&img, &ones, 3, 5).is_err());
        assert!(baseline_region_filter(&img, &ones, 4, 4).is_err());
    }
}
