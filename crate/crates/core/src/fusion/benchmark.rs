//! The seeded synthetic classification benchmark and its stream ablations.

use serde::{Deserialize, Serialize};

use super::features::extract_features;
use super::model::AttentionMode;
use super::train::{train_on_samples, FusionClassifier, LabeledSample, MaskSource, TrainConfig};
use crate::error::Result;
use crate::noise::NoiseProfile;
use crate::scene::{render_slot, DatasetConfig, ObjectClass};
use crate::segmentation::segment_shadows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub classes: Vec<ObjectClass>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub image_size: usize,
    pub ppm_range: (f64, f64),
    pub noise: NoiseProfile,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            classes: ObjectClass::ALL.to_vec(),
            train_per_class: 240,
            test_per_class: 60,
            image_size: 96,
            ppm_range: (10.0, 14.0),
            noise: NoiseProfile::standard(),
            seed: 2024,
        }
    }
}

impl BenchmarkConfig {
    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            count_per_class: self.train_per_class + self.test_per_class,
            classes: self.classes.clone(),
            noise: self.noise.clone(),
            seed: self.seed,
            image_height: self.image_size,
            image_width: self.image_size,
            ppm_range: self.ppm_range,
            ..Default::default()
        }
    }
}

/// Renders the benchmark in memory and returns `(train, test)` samples.
pub fn benchmark_samples(
    cfg: &BenchmarkConfig,
    train_cfg: &TrainConfig,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let ds = cfg.dataset_config();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class_index in 0..cfg.classes.len() {
        for index in 0..ds.count_per_class {
            let slot = render_slot(&ds, class_index, index)?;
            let image = slot.noisy.as_ref().unwrap_or(&slot.record.image);
            let mask = match train_cfg.mask_source {
                MaskSource::GroundTruth => slot.record.shadow_mask.clone(),
                MaskSource::Segmented => segment_shadows(image, &train_cfg.segmentation)?,
            };
            let sample = LabeledSample {
                id: format!("{}-{index:04}", cfg.classes[class_index].name()),
                features: extract_features(image, &mask)?,
                label: class_index,
            };
            if index < cfg.train_per_class {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub fused: f64,
    pub combined_only: f64,
    pub shadow_only: f64,
    pub fused_mean_alpha: f64,
}

/// Trains the adaptive model and both single-stream ablations with the same
/// data and seed and reports their test accuracies.
pub fn run_ablation(
    classes: &[ObjectClass],
    train: &[LabeledSample],
    test: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<AblationReport> {
    let mut acc = Vec::new();
    let mut fused_alpha = 0.0;
    for mode in [AttentionMode::Adaptive, AttentionMode::CombinedOnly, AttentionMode::ShadowOnly] {
        let c = TrainConfig { mode, ..cfg.clone() };
        let (model, scaler, _) = train_on_samples(train, classes.len(), &c)?;
        let clf = FusionClassifier {
            model,
            scaler,
            classes: classes.to_vec(),
            config: c,
        };
        let report = clf.evaluate_samples(test)?;
        if mode == AttentionMode::Adaptive {
            fused_alpha = report.mean_alpha;
        }
        acc.push(report.accuracy);
    }
    Ok(AblationReport {
        fused: acc[0],
        combined_only: acc[1],
        shadow_only: acc[2],
        fused_mean_alpha: fused_alpha,
    })
}
