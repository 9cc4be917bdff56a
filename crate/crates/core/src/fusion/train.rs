//! Training, evaluation and persistence of the fusion classifier.

use std::path::Path;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureScaler, StreamFeatures};
use super::model::{AttentionMode, FusionDims, FusionForward, FusionModel};
use crate::error::{Error, Result};
use crate::imaging::{Raster, ShadowMask};
use crate::metrics::{accuracy, confusion_matrix};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::nn::{adam_step, AdamState, Parameters, Tensor};
use crate::scene::{DatasetManifest, ManifestEntry, ObjectClass};
use crate::seed::derive_seed;
use crate::segmentation::{segment_shadows, SegmentationConfig};

/// Where the shadow-stream mask comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSource {
    /// The generator's exact shadow mask.
    #[default]
    GroundTruth,
    /// The shadow segmentation pipeline run on the input image.
    Segmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Fraction of samples held out for model selection.
    pub validation_fraction: f64,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    pub mode: AttentionMode,
    pub mask_source: MaskSource,
    pub segmentation: SegmentationConfig,
    /// Independent initializations; the one with the best validation
    /// accuracy is kept.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            lambda: -0.01,
            seed: 0,
            validation_fraction: 0.2,
            hidden_dim: 16,
            attention_dim: 16,
            mode: AttentionMode::Adaptive,
            mask_source: MaskSource::GroundTruth,
            segmentation: SegmentationConfig::default(),
            restarts: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.restarts == 0 {
            return Err(Error::domain("epochs, batch size and restarts must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::domain(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) || !self.lambda.is_finite() {
            return Err(Error::domain("learning rate must be positive and lambda finite"));
        }
        if self.hidden_dim == 0 || self.attention_dim == 0 {
            return Err(Error::domain("hidden and attention sizes must be positive"));
        }
        self.segmentation.validate()
    }
}

/// Features of one image with its class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub features: StreamFeatures,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub mean_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were kept (best validation accuracy).
    pub selected_epoch: usize,
}

/// A trained model with its feature scaling and class names.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionClassifier {
    pub model: FusionModel,
    pub scaler: FeatureScaler,
    pub classes: Vec<ObjectClass>,
    pub config: TrainConfig,
}

fn scale_grads(g: &mut FusionModel, k: f64) {
    g.visit_mut("", &mut |_, s| s.iter_mut().for_each(|v| *v *= k));
}

fn predict_all(model: &FusionModel, samples: &[LabeledSample]) -> Result<(Vec<usize>, f64)> {
    let mut preds = Vec::with_capacity(samples.len());
    let mut alpha = 0.0;
    for s in samples {
        let fw = model.forward(&s.features.f1, &s.features.f2)?;
        alpha += fw.alpha;
        preds.push(fw.predicted());
    }
    Ok((preds, alpha / samples.len().max(1) as f64))
}

fn labels(samples: &[LabeledSample]) -> Vec<usize> {
    samples.iter().map(|s| s.label).collect()
}

/// Deterministic split: shuffled once by `seed`, the last
/// `validation_fraction` of each class is held out.
fn split(samples: &[LabeledSample], classes: usize, fraction: f64, seed: u64) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5911_7000);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut members: Vec<&LabeledSample> = samples.iter().filter(|s| s.label == c).collect();
        members.shuffle(&mut rng);
        let n_val = ((members.len() as f64 * fraction).round() as usize).min(members.len().saturating_sub(1));
        let cut = members.len() - n_val;
        train.extend(members[..cut].iter().map(|s| (*s).clone()));
        val.extend(members[cut..].iter().map(|s| (*s).clone()));
    }
    (train, val)
}

/// Trains on already-extracted (unscaled) features. Returns the model with
/// the best validation accuracy, the fitted scaler, and per-epoch history.
pub fn train_on_samples(
    samples: &[LabeledSample],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(FusionModel, FeatureScaler, TrainHistory)> {
    cfg.validate()?;
    let mut present: Vec<usize> = samples.iter().map(|s| s.label).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::domain(format!(
            "training needs at least two classes, found {}",
            present.len()
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.label >= classes) {
        return Err(Error::domain(format!("sample {} has label {} >= {classes}", s.id, s.label)));
    }
    let (raw_train, raw_val) = split(samples, classes, cfg.validation_fraction, cfg.seed);
    let scaler = FeatureScaler::fit(&raw_train.iter().map(|s| s.features.clone()).collect::<Vec<_>>())?;
    let scale = |v: Vec<LabeledSample>| -> Vec<LabeledSample> {
        v.into_iter()
            .map(|s| LabeledSample {
                features: scaler.transform(&s.features),
                ..s
            })
            .collect()
    };
    let train = scale(raw_train);
    let val = scale(raw_val);

    let dims = FusionDims {
        feature_dim: train[0].features.f1.len(),
        hidden_dim: cfg.hidden_dim,
        attention_dim: cfg.attention_dim,
        classes,
    };
    let mut best: Option<(f64, FusionModel, TrainHistory)> = None;
    for restart in 0..cfg.restarts {
        let seed = if restart == 0 { cfg.seed } else { derive_seed(cfg.seed, restart as u64) };
        let (acc, model, history) = train_once(&train, &val, dims, cfg, seed)?;
        if restart > 0 {
            info!("restart {restart}: validation accuracy {acc:.4}");
        }
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, model, history));
        }
    }
    let (_, model, history) = best.expect("at least one restart");
    Ok((model, scaler, history))
}

fn train_once(
    train: &[LabeledSample],
    val: &[LabeledSample],
    dims: FusionDims,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(f64, FusionModel, TrainHistory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = FusionModel::init(dims, cfg.lambda, cfg.mode, &mut rng);
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, FusionModel)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zeros_like();
            for &i in batch {
                let s = &train[i];
                let (loss, _) = model.value_and_grad(&s.features.f1, &s.features.f2, s.label, &mut grads)?;
                total += loss.value;
            }
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            adam_step(&mut adam, &mut model, &grads)?;
        }
        let (train_pred, mean_alpha) = predict_all(&model, train)?;
        let train_accuracy = accuracy(&labels(train), &train_pred);
        let validation_accuracy = if val.is_empty() {
            train_accuracy
        } else {
            accuracy(&labels(val), &predict_all(&model, val)?.0)
        };
        let stats = EpochStats {
            epoch,
            loss: total / train.len() as f64,
            train_accuracy,
            validation_accuracy,
            mean_alpha,
        };
        log::debug!("epoch {epoch}: {stats:?}");
        if best.as_ref().is_none_or(|(b, _)| validation_accuracy >= *b) {
            best = Some((validation_accuracy, model.clone()));
            history.selected_epoch = epoch;
        }
        history.epochs.push(stats);
    }
    let (acc, model) = best.expect("at least one epoch");
    Ok((acc, model, history))
}

fn shadow_mask_for(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    image: &Raster,
    source: MaskSource,
    seg: &SegmentationConfig,
) -> Result<ShadowMask> {
    match source {
        MaskSource::GroundTruth => manifest.load_shadow_mask(entry),
        MaskSource::Segmented => segment_shadows(image, seg),
    }
}

/// Features of one manifest entry (noisy image when present).
pub fn entry_features(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    source: MaskSource,
    seg: &SegmentationConfig,
) -> Result<StreamFeatures> {
    let image = manifest.load_input(entry)?;
    let mask = shadow_mask_for(manifest, entry, &image, source, seg)?;
    extract_features(&image, &mask)
}

/// Extracts labeled samples for `classes`; unreadable entries are skipped
/// with a warning.
pub fn manifest_samples(
    manifest: &DatasetManifest,
    classes: &[ObjectClass],
    source: MaskSource,
    seg: &SegmentationConfig,
) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for e in &manifest.entries {
        let label = classes
            .iter()
            .position(|&c| c == e.label)
            .ok_or_else(|| Error::domain(format!("entry {} has class {} unknown to the model", e.id, e.label)))?;
        match entry_features(manifest, e, source, seg) {
            Ok(features) => out.push(LabeledSample {
                id: e.id.clone(),
                features,
                label,
            }),
            Err(err) if err.is_domain() => return Err(err),
            Err(err) => warn!("skipping entry {}: {err}", e.id),
        }
    }
    Ok(out)
}

/// Trains a classifier on every entry of `manifest`.
pub fn train_fusion(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<(FusionClassifier, TrainHistory)> {
    cfg.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::domain("manifest has no entries"));
    }
    let classes = manifest.labels();
    let samples = manifest_samples(manifest, &classes, cfg.mask_source, &cfg.segmentation)?;
    info!("training on {} samples, {} classes", samples.len(), classes.len());
    let (model, scaler, history) = train_on_samples(&samples, classes.len(), cfg)?;
    Ok((
        FusionClassifier {
            model,
            scaler,
            classes,
            config: cfg.clone(),
        },
        history,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub id: String,
    pub alpha: f64,
    pub beta: f64,
    pub predicted: ObjectClass,
    pub truth: ObjectClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub classes: Vec<ObjectClass>,
    /// Rows are true classes, columns predictions.
    pub confusion: Vec<Vec<usize>>,
    pub mean_alpha: f64,
    pub per_image: Vec<ImageEval>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,alpha,beta,predicted,true\n");
        for r in &self.per_image {
            s += &format!("{},{},{},{},{}\n", r.id, r.alpha, r.beta, r.predicted, r.truth);
        }
        s
    }
}

impl FusionClassifier {
    pub fn forward(&self, features: &StreamFeatures) -> Result<FusionForward> {
        let f = self.scaler.transform(features);
        self.model.forward(&f.f1, &f.f2)
    }

    pub fn predict(&self, image: &Raster, mask: &ShadowMask) -> Result<(ObjectClass, FusionForward)> {
        let fw = self.forward(&extract_features(image, mask)?)?;
        Ok((self.classes[fw.predicted()], fw))
    }

    /// Scores labeled samples whose labels index `self.classes`.
    pub fn evaluate_samples(&self, samples: &[LabeledSample]) -> Result<EvalReport> {
        let mut per_image = Vec::with_capacity(samples.len());
        let (mut truth, mut pred) = (Vec::new(), Vec::new());
        for s in samples {
            if s.label >= self.classes.len() {
                return Err(Error::domain(format!("sample {} has unknown class index {}", s.id, s.label)));
            }
            let fw = self.forward(&s.features)?;
            let p = fw.predicted();
            truth.push(s.label);
            pred.push(p);
            per_image.push(ImageEval {
                id: s.id.clone(),
                alpha: fw.alpha,
                beta: fw.beta,
                predicted: self.classes[p],
                truth: self.classes[s.label],
            });
        }
        let n = per_image.len().max(1) as f64;
        Ok(EvalReport {
            accuracy: accuracy(&truth, &pred),
            classes: self.classes.clone(),
            confusion: confusion_matrix(&truth, &pred, self.classes.len())?,
            mean_alpha: per_image.iter().map(|r| r.alpha).sum::<f64>() / n,
            per_image,
        })
    }

    /// Accuracy, confusion and per-image attention over a manifest. Every
    /// entry's class must be known to the model.
    pub fn evaluate(&self, manifest: &DatasetManifest) -> Result<EvalReport> {
        let samples = manifest_samples(manifest, &self.classes, self.config.mask_source, &self.config.segmentation)?;
        self.evaluate_samples(&samples)
    }

    /// Writes the binary checkpoint and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::from_parameters(&self.model, "model");
        for (name, v) in [
            ("scaler.mean1", &self.scaler.mean1),
            ("scaler.scale1", &self.scaler.scale1),
            ("scaler.mean2", &self.scaler.mean2),
            ("scaler.scale2", &self.scaler.scale2),
        ] {
            ckpt.push(name, Tensor::vector(v.clone()));
        }
        let side = FusionSidecar {
            kind: SIDECAR_KIND.into(),
            dims: self.model.dims(),
            lambda: self.model.lambda,
            mode: self.model.mode,
            classes: self.classes.clone(),
            train_config: self.config.clone(),
        };
        save_checkpoint(path, &ckpt, &side)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (ckpt, side): (Checkpoint, FusionSidecar) = load_checkpoint(path)?;
        if side.kind != SIDECAR_KIND {
            return Err(Error::Format(format!("{} is a {} checkpoint, not fusion", path.display(), side.kind)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = FusionModel::init(side.dims, side.lambda, side.mode, &mut rng);
        ckpt.restore_parameters(&mut model, "model")?;
        let vec = |name: &str| -> Result<Vec<f64>> {
            ckpt.get(name)
                .map(|t| t.data().to_vec())
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
        };
        let scaler = FeatureScaler {
            mean1: vec("scaler.mean1")?,
            scale1: vec("scaler.scale1")?,
            mean2: vec("scaler.mean2")?,
            scale2: vec("scaler.scale2")?,
        };
        Ok(Self {
            model,
            scaler,
            classes: side.classes,
            config: side.train_config,
        })
    }
}

const SIDECAR_KIND: &str = "fusion";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FusionSidecar {
    kind: String,
    dims: FusionDims,
    lambda: f64,
    mode: AttentionMode,
    classes: Vec<ObjectClass>,
    train_config: TrainConfig,
}
