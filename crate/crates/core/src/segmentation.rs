//! Shadow segmentation: LAB/LCH feature isolation, spectral ratio, uniform
//! smoothing, 1-D k-means thresholding and morphological closing.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::morphology::check_radius;
use crate::imaging::{
    convolve_uniform, kmeans_1d, lab_to_lch, morph_close, normalize_plane, rgb_to_lab,
    KMeansResult, Plane, Raster, ShadowMask, StructuringElement,
};

/// Which end of the log spectral-ratio distribution is labelled shadow.
///
/// With `SR = (H + 1) / (L + 1)`, dark pixels have a *high* ratio, so
/// `HighRatio` is the default. `LowRatio` labels the lowest cluster instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowPolarity {
    #[default]
    HighRatio,
    LowRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Odd side length of the uniform smoothing kernel.
    pub kernel_size: usize,
    /// k-means runs with `k + 1` clusters.
    pub k: usize,
    pub disk_radius: usize,
    pub seed: u64,
    pub polarity: ShadowPolarity,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            kernel_size: 5,
            k: 2,
            disk_radius: 3,
            seed: 0,
            polarity: ShadowPolarity::HighRatio,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        crate::imaging::filter::check_odd_kernel(self.kernel_size)?;
        if self.k == 0 {
            return Err(Error::domain("segmentation k must be at least 1"));
        }
        check_radius(self.disk_radius)
    }
}

/// Per-pixel `ln(SR + 1)` with `SR = (H + 1) / (L + 1)`.
pub fn spectral_ratio_map(lightness: &Plane, hue: &Plane) -> Result<Plane> {
    if !lightness.same_shape(hue) {
        return Err(Error::domain(format!(
            "spectral_ratio_map: L is {}x{}, H is {}x{}",
            lightness.height(),
            lightness.width(),
            hue.height(),
            hue.width()
        )));
    }
    let data = lightness
        .data()
        .iter()
        .zip(hue.data())
        .map(|(&l, &h)| ((h + 1.0) / (l + 1.0) + 1.0).ln())
        .collect();
    Plane::new(lightness.height(), lightness.width(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Values strictly below this are shadow.
    pub value: f64,
    /// Set when clustering produced a single cluster; `value` is then +inf.
    pub degenerate: bool,
}

/// Minimum of the second-lowest cluster. A single cluster yields `+inf`.
pub fn shadow_threshold(kr: &KMeansResult) -> Threshold {
    if kr.per_cluster_min.len() < 2 {
        warn!("shadow_threshold: single cluster, labelling every pixel as shadow");
        return Threshold {
            value: f64::INFINITY,
            degenerate: true,
        };
    }
    Threshold {
        value: kr.per_cluster_min[1],
        degenerate: false,
    }
}

/// Everything computed on the way to a mask.
#[derive(Debug, Clone)]
pub struct SegmentationTrace {
    /// Smoothed `ln(SR + 1)` map.
    pub log_ratio: Plane,
    /// Values actually clustered (negated for [`ShadowPolarity::HighRatio`]).
    pub clustered: Plane,
    pub clustering: KMeansResult,
    pub threshold: Threshold,
    /// Strict-threshold labelling before closing.
    pub raw_mask: ShadowMask,
    pub mask: ShadowMask,
}

fn orient(p: &Plane, polarity: ShadowPolarity) -> Plane {
    match polarity {
        ShadowPolarity::LowRatio => p.clone(),
        ShadowPolarity::HighRatio => p.map(|v| -v),
    }
}

/// `v < threshold` per pixel.
pub fn label_below(values: &Plane, threshold: f64) -> ShadowMask {
    ShadowMask::new(
        values.height(),
        values.width(),
        values.data().iter().map(|&v| v < threshold).collect(),
    )
    .expect("plane dimensions are consistent")
}

/// Normalized lightness and hue planes of an image (1-channel inputs are
/// replicated to RGB first).
pub fn lightness_hue(img: &Raster) -> Result<(Plane, Plane)> {
    let lch = lab_to_lch(&rgb_to_lab(&img.to_rgb())?)?;
    Ok((
        normalize_plane(&lch.channel_plane(0)),
        normalize_plane(&lch.channel_plane(2)),
    ))
}

pub fn segment_shadows_traced(img: &Raster, cfg: &SegmentationConfig) -> Result<SegmentationTrace> {
    cfg.validate()?;
    let (l, h) = lightness_hue(img)?;
    let log_ratio = convolve_uniform(&spectral_ratio_map(&l, &h)?, cfg.kernel_size)?;
    let clustered = orient(&log_ratio, cfg.polarity);
    let clustering = kmeans_1d(clustered.data(), cfg.k + 1, cfg.seed)?;
    let threshold = shadow_threshold(&clustering);
    let raw_mask = label_below(&clustered, threshold.value);
    let mask = morph_close(&raw_mask, &StructuringElement::disk(cfg.disk_radius));
    Ok(SegmentationTrace {
        log_ratio,
        clustered,
        clustering,
        threshold,
        raw_mask,
        mask,
    })
}

/// Full shadow segmentation of one image. Deterministic per `cfg.seed`.
pub fn segment_shadows(img: &Raster, cfg: &SegmentationConfig) -> Result<ShadowMask> {
    Ok(segment_shadows_traced(img, cfg)?.mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plane1(v: f64) -> Plane {
        Plane::filled(1, 1, v)
    }

    #[test]
    fn spectral_ratio_boundaries() {
        let at = |l: f64, h: f64| spectral_ratio_map(&plane1(l), &plane1(h)).unwrap().data()[0];
        assert_abs_diff_eq!(at(0.0, 0.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(at(0.0, 1.0), 3f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(at(1.0, 0.0), 1.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn spectral_ratio_shape_mismatch() {
        let e = spectral_ratio_map(&Plane::filled(2, 2, 0.0), &Plane::filled(2, 3, 0.0));
        assert!(e.unwrap_err().is_domain());
    }

    fn result_with_minima(minima: Vec<f64>) -> KMeansResult {
        KMeansResult {
            centroids: minima.clone(),
            assignment: vec![],
            per_cluster_min: minima.clone(),
            requested_clusters: minima.len(),
            reduced: false,
            objective: 0.0,
            history: vec![],
            iterations: 0,
        }
    }

    #[test]
    fn threshold_is_min_of_second_cluster() {
        let t = shadow_threshold(&result_with_minima(vec![0.41, 0.68, 0.95]));
        assert_eq!(t.value, 0.68);
        assert!(!t.degenerate);
    }

    #[test]
    fn threshold_cross_checked_on_twenty_values() {
        // Brute-force optimal contiguous 3-partition (reference script) has
        // minima {0.41, 0.68, 0.95}.
        let v = [
            0.41, 0.42, 0.44, 0.45, 0.43, 0.46, 0.68, 0.70, 0.72, 0.71, 0.69, 0.73, 0.74, 0.95,
            0.97, 0.99, 0.96, 0.98, 1.00, 0.975,
        ];
        let kr = kmeans_1d(&v, 3, 1).unwrap();
        assert_eq!(kr.per_cluster_min, vec![0.41, 0.68, 0.95]);
        assert_eq!(shadow_threshold(&kr).value, 0.68);
    }

    #[test]
    fn identical_clusters_give_empty_mask() {
        let t = shadow_threshold(&result_with_minima(vec![0.5, 0.5]));
        assert_eq!(t.value, 0.5);
        let mask = label_below(&Plane::filled(3, 3, 0.5), t.value);
        assert!(mask.is_empty());
    }

    #[test]
    fn single_cluster_labels_everything() {
        let t = shadow_threshold(&result_with_minima(vec![0.2]));
        assert!(t.degenerate && t.value.is_infinite());
        assert_eq!(label_below(&Plane::filled(2, 2, 7.0), t.value).count(), 4);
    }

    #[test]
    fn uniform_image_never_crashes() {
        for channels in [1, 3] {
            let img = Raster::filled(24, 24, channels, 0.5);
            let m = segment_shadows(&img, &SegmentationConfig::default()).unwrap();
            assert!(m.is_empty() || m.count() == 24 * 24);
        }
    }

    #[test]
    fn dark_block_is_found_and_deterministic() {
        let img = Raster::from_fn(40, 40, 1, |y, x, _| {
            if (20..32).contains(&y) && (10..30).contains(&x) {
                0.08
            } else if (12..20).contains(&y) && (10..30).contains(&x) {
                0.9
            } else {
                0.45 + 0.02 * (((y * 7 + x * 3) % 5) as f64 - 2.0)
            }
        })
        .unwrap();
        let cfg = SegmentationConfig::default();
        let a = segment_shadows(&img, &cfg).unwrap();
        let b = segment_shadows(&img, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.get(26, 20));
        assert!(!a.get(15, 20));
        assert!(!a.get(5, 5));
    }

    #[test]
    fn low_ratio_polarity_picks_bright_side() {
        let img = Raster::from_fn(30, 30, 1, |y, _, _| match y {
            0..=9 => 0.1,
            10..=19 => 0.5,
            _ => 0.95,
        })
        .unwrap();
        let cfg = SegmentationConfig {
            polarity: ShadowPolarity::LowRatio,
            kernel_size: 1,
            disk_radius: 1,
            ..Default::default()
        };
        let m = segment_shadows(&img, &cfg).unwrap();
        assert!(m.get(25, 5) && !m.get(5, 5));
    }

    #[test]
    fn invalid_config_rejected() {
        let img = Raster::filled(8, 8, 1, 0.2);
        for cfg in [
            SegmentationConfig { kernel_size: 4, ..Default::default() },
            SegmentationConfig { k: 0, ..Default::default() },
            SegmentationConfig { disk_radius: 0, ..Default::default() },
        ] {
            assert!(segment_shadows(&img, &cfg).unwrap_err().is_domain());
        }
    }

    #[test]
    fn lowering_a_value_never_unlabels_it() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let p = Plane::new(10, 10, (0..100).map(|_| rng.random::<f64>()).collect()).unwrap();
        let kr = kmeans_1d(p.data(), 3, 0).unwrap();
        let t = shadow_threshold(&kr).value;
        let before = label_below(&p, t);
        for i in 0..100 {
            let mut q = p.clone();
            q.data_mut()[i] -= rng.random::<f64>();
            let after = label_below(&q, t);
            assert!(before.is_subset_of(&after));
        }
    }
}
