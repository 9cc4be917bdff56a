//! Region-weighted reconstruction loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{convolve_uniform, Plane, Raster, ShadowMask};

/// Per-pixel importance weights in [0, 1]; 1 marks a critical region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

/// Blur applied to binary ground-truth masks.
pub const MASK_BLUR: usize = 7;

impl RegionMask {
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != height * width {
            return Err(Error::domain(format!(
                "region mask needs {} weights, got {}",
                height * width,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::domain(format!("region weight {w} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            weights,
        })
    }

    pub fn uniform(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_plane(p: &Plane) -> Result<Self> {
        Self::new(p.height(), p.width(), p.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    /// Single-channel mask image; multi-channel images are averaged.
    pub fn from_raster(r: &Raster) -> Result<Self> {
        Self::from_plane(&r.to_gray().channel_plane(0))
    }

    /// Union of the object masks softened by a uniform blur.
    pub fn from_scene_masks(highlight: &ShadowMask, shadow: &ShadowMask) -> Result<Self> {
        let union = highlight.union(shadow)?;
        Self::from_plane(&convolve_uniform(&union.to_plane(), MASK_BLUR)?)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    pub fn to_raster(&self) -> Raster {
        Raster::new(self.height, self.width, 1, self.weights.clone()).expect("consistent mask")
    }

    fn check(&self, img: &Raster) -> Result<()> {
        if (self.height, self.width) != (img.height(), img.width()) {
            return Err(Error::domain(format!(
                "region mask {}x{} does not match image {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}

/// Which side of the mask the second loss term penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPolarity {
    /// Weight `(1 - M)`: errors outside the critical region cost extra.
    #[default]
    OutsideCritical,
    /// Weight `M`: errors inside the critical region cost extra.
    InsideCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Weight of the Sobel gradient-difference term.
    pub lambda3: f64,
    pub polarity: MaskPolarity,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.0,
            polarity: MaskPolarity::OutsideCritical,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Mean squared Sobel response of `d` over interior pixels, and its
/// gradient (accumulated into `grad` with factor `scale`).
fn sobel_energy(d: &[f64], h: usize, w: usize, c: usize, scale: f64, grad: &mut [f64]) -> f64 {
    if h < 3 || w < 3 {
        return 0.0;
    }
    let n = ((h - 2) * (w - 2) * c) as f64;
    let mut total = 0.0;
    for ch in 0..c {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let (mut gx, mut gy) = (0.0, 0.0);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let v = d[((y + ky - 1) * w + x + kx - 1) * c + ch];
                        gx += SOBEL_X[ky][kx] * v;
                        gy += SOBEL_Y[ky][kx] * v;
                    }
                }
                total += gx * gx + gy * gy;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let i = ((y + ky - 1) * w + x + kx - 1) * c + ch;
                        grad[i] += scale * 2.0 * (gx * SOBEL_X[ky][kx] + gy * SOBEL_Y[ky][kx]) / n;
                    }
                }
            }
        }
    }
    total / n
}

/// `l1 mean(d^2) + l2 mean((d W)^2) + l3 sobel(d)` with `d = denoised -
/// reference` and `W = 1 - M` (or `M` for the inside polarity). Returns the
/// value and the gradient with respect to `denoised`.
pub fn region_masked_loss(
    denoised: &Raster,
    reference: &Raster,
    mask: &RegionMask,
    w: &LossWeights,
) -> Result<(f64, Raster)> {
    denoised.check_same_shape(reference, "region_masked_loss")?;
    mask.check(denoised)?;
    w.validate()?;
    let (h, wd, c) = denoised.dims();
    let n = (h * wd * c) as f64;
    let mut grad = vec![0.0; h * wd * c];
    let d: Vec<f64> = denoised.data().iter().zip(reference.data()).map(|(a, b)| a - b).collect();
    let (mut t1, mut t2) = (0.0, 0.0);
    for (i, &di) in d.iter().enumerate() {
        let m = mask.weights[i / c];
        let wt = match w.polarity {
            MaskPolarity::OutsideCritical => 1.0 - m,
            MaskPolarity::InsideCritical => m,
        };
        t1 += di * di;
        t2 += (di * wt) * (di * wt);
        grad[i] = 2.0 * di * (w.lambda1 + w.lambda2 * wt * wt) / n;
    }
    let mut value = w.lambda1 * t1 / n + w.lambda2 * t2 / n;
    if w.lambda3 > 0.0 {
        value += w.lambda3 * sobel_energy(&d, h, wd, c, w.lambda3, &mut grad);
    }
    Ok((value, Raster::new(h, wd, c, grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn r(h: usize, w: usize, v: Vec<f64>) -> Raster {
        Raster::new(h, w, 1, v).unwrap()
    }

    #[test]
    fn perfect_reconstruction_is_free() {
        let x = r(2, 2, vec![0.1, 0.5, 0.3, 0.9]);
        let m = RegionMask::uniform(2, 2, 0.3).unwrap();
        let (v, g) = region_masked_loss(&x, &x, &m, &LossWeights::default()).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_mask_leaves_plain_mse() {
        let a = r(2, 2, vec![0.1, 0.5, 0.3, 0.9]);
        let b = r(2, 2, vec![0.0, 0.5, 0.4, 0.7]);
        let m = RegionMask::uniform(2, 2, 1.0).unwrap();
        let w = LossWeights {
            lambda1: 0.7,
            ..Default::default()
        };
        let (v, _) = region_masked_loss(&a, &b, &m, &w).unwrap();
        assert_abs_diff_eq!(v, 0.7 * (0.01 + 0.01 + 0.04) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_example() {
        let a = r(2, 2, vec![0.1, 0.0, 0.0, 0.2]);
        let b = r(2, 2, vec![0.0; 4]);
        let m = RegionMask::new(2, 2, vec![1.0, 1.0, 1.0, 0.0]).unwrap();
        let (v, _) = region_masked_loss(&a, &b, &m, &LossWeights::default()).unwrap();
        // mpmath: 0.0125 + 0.01
        assert_abs_diff_eq!(v, 0.0225, epsilon = 1e-15);
    }

    #[test]
    fn errors_outside_cost_more() {
        let b = r(1, 2, vec![0.0, 0.0]);
        let m = RegionMask::new(1, 2, vec![1.0, 0.0]).unwrap();
        let w = LossWeights::default();
        let inside = region_masked_loss(&r(1, 2, vec![0.3, 0.0]), &b, &m, &w).unwrap().0;
        let outside = region_masked_loss(&r(1, 2, vec![0.0, 0.3]), &b, &m, &w).unwrap().0;
        assert!(outside > inside);
        let flipped = LossWeights {
            polarity: MaskPolarity::InsideCritical,
            ..w
        };
        let inside = region_masked_loss(&r(1, 2, vec![0.3, 0.0]), &b, &m, &flipped).unwrap().0;
        let outside = region_masked_loss(&r(1, 2, vec![0.0, 0.3]), &b, &m, &flipped).unwrap().0;
        assert!(inside > outside);
    }

    #[test]
    fn shape_errors() {
        let a = r(2, 2, vec![0.0; 4]);
        let m = RegionMask::uniform(2, 3, 0.0).unwrap();
        assert!(region_masked_loss(&a, &a, &m, &LossWeights::default()).is_err());
        assert!(region_masked_loss(&a, &r(1, 4, vec![0.0; 4]), &m, &LossWeights::default()).is_err());
        assert!(RegionMask::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn scene_mask_is_soft() {
        let hl = ShadowMask::from_fn(20, 20, |y, x| (5..8).contains(&y) && (3..13).contains(&x));
        let sh = ShadowMask::from_fn(20, 20, |y, x| (8..14).contains(&y) && (3..13).contains(&x));
        let m = RegionMask::from_scene_masks(&hl, &sh).unwrap();
        assert!((m.get(10, 7) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 19), 0.0);
        assert!(m.weights().iter().any(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (h, w) = (5, 6);
        let reference: Vec<f64> = (0..h * w).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let x0: Vec<f64> = (0..h * w).map(|i| ((i * 5) % 13) as f64 / 13.0).collect();
        let mask = RegionMask::new(h, w, (0..h * w).map(|i| ((i * 3) % 4) as f64 / 3.0).collect()).unwrap();
        let refr = r(h, w, reference);
        for lw in [
            LossWeights::default(),
            LossWeights {
                lambda1: 0.3,
                lambda2: 2.0,
                lambda3: 0.5,
                polarity: MaskPolarity::InsideCritical,
            },
        ] {
            let (_, g) = region_masked_loss(&r(h, w, x0.clone()), &refr, &mask, &lw).unwrap();
            let report = finite_difference_check(
                |p| region_masked_loss(&r(h, w, p.to_vec()), &refr, &mask, &lw).unwrap().0,
                &x0,
                g.data(),
                1e-5,
            );
            assert!(report.passed, "{report:?}");
        }
    }

    proptest! {
        #[test]
        fn non_negative_and_monotone(
            d in proptest::collection::vec(-1.0f64..1.0, 9),
            m in proptest::collection::vec(0.0f64..=1.0, 9),
            idx in 0usize..9,
            bump in 0.0f64..0.5,
        ) {
            let zero = r(3, 3, vec![0.0; 9]);
            let mask = RegionMask::new(3, 3, m).unwrap();
            let w = LossWeights { lambda3: 0.2, ..Default::default() };
            let (v, _) = region_masked_loss(&r(3, 3, d.clone()), &zero, &mask, &w).unwrap();
            prop_assert!(v >= 0.0);
            let mut bigger = d.clone();
            bigger[idx] += bump * bigger[idx].signum();
            let w0 = LossWeights::default();
            let (a, _) = region_masked_loss(&r(3, 3, d), &zero, &mask, &w0).unwrap();
            let (b, _) = region_masked_loss(&r(3, 3, bigger), &zero, &mask, &w0).unwrap();
            prop_assert!(b >= a);
        }
    }
}
