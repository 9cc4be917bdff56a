//! Deterministic hand-crafted descriptors for the two streams.
//!
//! Both streams use the same 96-value layout family:
//!
//! | stream | 0..64 | 64..80 | 80..88 | 88..96 |
//! |---|---|---|---|---|
//! | F1 | 8x8 pooled intensity | 16-bin histogram | gradient stats | gradient stats |
//! | F2 | 8x8 pooled shadow strength | 16-bin histogram inside mask | gradient stats | shape stats |
//!
//! Shadow strength is `mask * (1 - intensity)`. Both pooled maps cover the
//! same window, anchored on the strongest smoothed return, so equal indices
//! describe the same place. Histograms are taken over 5x5 local means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{convolve_uniform, Raster, ShadowMask};

pub const POOL_GRID: usize = 8;
pub const HIST_BINS: usize = 16;
pub const FEATURE_DIM: usize = 96;
pub const SHAPE_OFFSET: usize = 88;
pub const SHAPE_LEN: usize = 8;

/// Magnitudes above this land in the last gradient-histogram bin.
const GRAD_HIST_MAX: f64 = 0.2;
/// Box size used to suppress speckle before locating the anchor and
/// building histograms.
const ANCHOR_SMOOTHING: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFeatures {
    /// Combined stream: the whole image, highlight and shadow alike.
    pub f1: Vec<f64>,
    /// Shadow stream.
    pub f2: Vec<f64>,
}

/// Analysis window anchored on the strongest smoothed return: its top
/// quarter lies up-range of the anchor and the rest down-range, where the
/// shadow falls. Returns `(row0, col0, height, width)`; it may extend past
/// the image, in which case border pixels are replicated.
pub fn analysis_window(gray: &Raster) -> Result<(isize, isize, usize, usize)> {
    let (h, w) = (gray.height(), gray.width());
    let smooth = convolve_uniform(&gray.channel_plane(0), ANCHOR_SMOOTHING.min(odd_floor(h.min(w))))?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in smooth.data().iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    let (ay, ax) = ((best.0 / w) as isize, (best.0 % w) as isize);
    let (wh, ww) = ((2 * h / 3).max(POOL_GRID), (2 * w / 3).max(POOL_GRID));
    Ok((ay - (wh / 4) as isize, ax - (ww / 2) as isize, wh, ww))
}

fn odd_floor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n.saturating_sub(1).max(1)
    } else {
        n
    }
}

/// 8x8 block means over `window`, replicating border pixels.
fn pooled(data: &[f64], h: usize, w: usize, window: (isize, isize, usize, usize)) -> Vec<f64> {
    let (r0, c0, wh, ww) = window;
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        data[y * w + x]
    };
    let mut out = Vec::with_capacity(POOL_GRID * POOL_GRID);
    for by in 0..POOL_GRID {
        let (y0, y1) = (by * wh / POOL_GRID, (by + 1) * wh / POOL_GRID);
        for bx in 0..POOL_GRID {
            let (x0, x1) = (bx * ww / POOL_GRID, (bx + 1) * ww / POOL_GRID);
            let mut s = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    s += at(r0 + y as isize, c0 + x as isize);
                }
            }
            out.push(s / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

fn bin(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
}

/// Normalized histogram of the selected values; all zeros when none are.
fn histogram<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<f64> {
    let mut hist = vec![0.0; HIST_BINS];
    let mut n = 0usize;
    for &v in values {
        hist[bin(v)] += 1.0;
        n += 1;
    }
    if n > 0 {
        hist.iter_mut().for_each(|c| *c /= n as f64);
    }
    hist
}

/// Central-difference gradients with replicated borders.
fn gradients(data: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            gx[y * w + x] = 0.5 * (data[y * w + xr] - data[y * w + xl]);
            gy[y * w + x] = 0.5 * (data[yd * w + x] - data[yu * w + x]);
        }
    }
    (gx, gy)
}

/// 8-bin magnitude histogram plus 8 orientation-energy fractions
/// (orientation folded to [0, 180) degrees).
fn gradient_profile(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (gx, gy) = gradients(data, h, w);
    let mut mags = [0.0; 8];
    let mut orient = [0.0; 8];
    let mut energy = 0.0;
    for (&a, &b) in gx.iter().zip(&gy) {
        let m = a.hypot(b);
        let k = ((m / GRAD_HIST_MAX * 8.0) as usize).min(7);
        mags[k] += 1.0;
        if m > 0.0 {
            let theta = b.atan2(a).rem_euclid(std::f64::consts::PI);
            let o = ((theta / std::f64::consts::PI * 8.0) as usize).min(7);
            orient[o] += m * m;
            energy += m * m;
        }
    }
    let n = (h * w) as f64;
    let mut out: Vec<f64> = mags.iter().map(|c| c / n).collect();
    out.extend(orient.iter().map(|e| if energy > 0.0 { e / energy } else { 0.0 }));
    out
}

/// Summary of the shadow-strength gradient field: mean |gx|, mean |gy|,
/// mean and max magnitude, mean squared magnitude, and the magnitude means
/// of the four image quadrants.
fn gradient_summary(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    let (gx, gy) = gradients(data, h, w);
    let n = (h * w) as f64;
    let mags: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let mut out = vec![
        gx.iter().map(|v| v.abs()).sum::<f64>() / n,
        gy.iter().map(|v| v.abs()).sum::<f64>() / n,
        mags.iter().sum::<f64>() / n,
        mags.iter().copied().fold(0.0, f64::max),
    ];
    let mut quad = [0.0; 4];
    let mut counts = [0usize; 4];
    for y in 0..h {
        for x in 0..w {
            let q = 2 * (2 * y / h) + 2 * x / w;
            quad[q] += mags[y * w + x];
            counts[q] += 1;
        }
    }
    out.extend(quad.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64));
    out.truncate(8);
    out
}

/// Area fraction, bounding-box height and width fractions, box aspect
/// `bh / (bh + bw)`, centroid offset from the image centre (rows, cols, as
/// fractions), boundary-to-area ratio, and box fill ratio. All zero for an
/// empty mask.
pub fn shape_statistics(mask: &ShadowMask) -> [f64; SHAPE_LEN] {
    let (h, w) = (mask.height(), mask.width());
    let area = mask.count();
    if area == 0 {
        return [0.0; SHAPE_LEN];
    }
    let (mut y0, mut y1, mut x0, mut x1) = (h, 0, w, 0);
    let (mut sy, mut sx) = (0.0, 0.0);
    let mut boundary = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(y, x) {
                continue;
            }
            y0 = y0.min(y);
            y1 = y1.max(y);
            x0 = x0.min(x);
            x1 = x1.max(x);
            sy += y as f64 + 0.5;
            sx += x as f64 + 0.5;
            let edge = y == 0
                || x == 0
                || y == h - 1
                || x == w - 1
                || !mask.get(y - 1, x)
                || !mask.get(y + 1, x)
                || !mask.get(y, x - 1)
                || !mask.get(y, x + 1);
            boundary += edge as usize;
        }
    }
    let a = area as f64;
    let bh = (y1 - y0 + 1) as f64;
    let bw = (x1 - x0 + 1) as f64;
    [
        a / (h * w) as f64,
        bh / h as f64,
        bw / w as f64,
        bh / (bh + bw),
        sy / a / h as f64 - 0.5,
        sx / a / w as f64 - 0.5,
        boundary as f64 / a,
        a / (bh * bw),
    ]
}

/// Descriptors of an image and its shadow mask. Multi-channel images are
/// averaged to intensity first.
pub fn extract_features(img: &Raster, mask: &ShadowMask) -> Result<StreamFeatures> {
    let (h, w) = (img.height(), img.width());
    if mask.height() != h || mask.width() != w {
        return Err(Error::domain(format!(
            "mask {}x{} does not match image {h}x{w}",
            mask.height(),
            mask.width()
        )));
    }
    if h < POOL_GRID || w < POOL_GRID {
        return Err(Error::domain(format!(
            "image must be at least {POOL_GRID}x{POOL_GRID} for feature extraction"
        )));
    }
    let gray = img.to_gray();
    let intensity = gray.data();
    let window = analysis_window(&gray)?;
    let smooth = convolve_uniform(&gray.channel_plane(0), ANCHOR_SMOOTHING.min(odd_floor(h.min(w))))?;

    let mut f1 = pooled(intensity, h, w, window);
    f1.extend(histogram(smooth.data().iter()));
    let prof = gradient_profile(smooth.data(), h, w);
    f1.extend_from_slice(&prof[8..]);
    let median = {
        let mut v = smooth.data().to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let dark = ShadowMask::new(h, w, smooth.data().iter().map(|&v| v < 0.5 * median).collect())?;
    f1.extend(shape_statistics(&dark));

    let strength: Vec<f64> = intensity
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| if m { 1.0 - v } else { 0.0 })
        .collect();
    let mut f2 = pooled(&strength, h, w, window);
    f2.extend(histogram(
        smooth.data().iter().zip(mask.bits()).filter(|(_, &m)| m).map(|(v, _)| v),
    ));
    f2.extend(gradient_summary(&strength, h, w));
    f2.extend(shape_statistics(mask));

    debug_assert_eq!(f1.len(), FEATURE_DIM);
    debug_assert_eq!(f2.len(), FEATURE_DIM);
    Ok(StreamFeatures { f1, f2 })
}

/// Per-dimension z-scoring fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean1: Vec<f64>,
    pub scale1: Vec<f64>,
    pub mean2: Vec<f64>,
    pub scale2: Vec<f64>,
}

fn moments(rows: impl Iterator<Item = Vec<f64>> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        mean.iter_mut().zip(&r).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        var.iter_mut()
            .zip(r.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
    }
    // constant features are centred but not scaled
    let scale = var.into_iter().map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    (mean, scale)
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean1: vec![0.0; dim],
            scale1: vec![1.0; dim],
            mean2: vec![0.0; dim],
            scale2: vec![1.0; dim],
        }
    }

    pub fn fit(samples: &[StreamFeatures]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::domain("cannot fit a scaler on no samples"))?;
        let (d1, d2) = (first.f1.len(), first.f2.len());
        let (mean1, scale1) = moments(samples.iter().map(|s| s.f1.clone()), d1);
        let (mean2, scale2) = moments(samples.iter().map(|s| s.f2.clone()), d2);
        Ok(Self {
            mean1,
            scale1,
            mean2,
            scale2,
        })
    }

    pub fn transform(&self, s: &StreamFeatures) -> StreamFeatures {
        let z = |v: &[f64], m: &[f64], sc: &[f64]| {
            v.iter().zip(m).zip(sc).map(|((v, m), s)| (v - m) / s).collect()
        };
        StreamFeatures {
            f1: z(&s.f1, &self.mean1, &self.scale1),
            f2: z(&s.f2, &self.mean2, &self.scale2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{render_scene, ObjectClass, SceneSpec};

    #[test]
    fn zero_image() {
        let img = Raster::filled(32, 32, 1, 0.0);
        let f = extract_features(&img, &ShadowMask::empty(32, 32)).unwrap();
        assert!(f.f1[..64].iter().all(|&v| v == 0.0));
        assert_eq!(f.f1[64], 1.0);
        assert!(f.f1[65..80].iter().all(|&v| v == 0.0));
        assert_eq!(f.f1.len(), FEATURE_DIM);
    }

    #[test]
    fn empty_mask_gives_zero_shadow_stream() {
        let img = Raster::from_fn(24, 24, 1, |y, x, _| ((x * y) % 7) as f64 / 7.0).unwrap();
        let f = extract_features(&img, &ShadowMask::empty(24, 24)).unwrap();
        assert!(f.f2.iter().all(|&v| v == 0.0));
        assert!(f.f2[SHAPE_OFFSET..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_statistics_of_rectangle() {
        let m = ShadowMask::from_fn(10, 20, |y, x| (2..6).contains(&y) && (5..15).contains(&x));
        let s = shape_statistics(&m);
        assert_eq!(s[0], 40.0 / 200.0);
        assert_eq!(s[1], 0.4);
        assert_eq!(s[2], 0.5);
        assert_eq!(s[3], 4.0 / 14.0);
        assert!((s[4] - (4.0 / 10.0 - 0.5)).abs() < 1e-12);
        assert!((s[5] - (10.0 / 20.0 - 0.5)).abs() < 1e-12);
        assert_eq!(s[6], 24.0 / 40.0);
        assert_eq!(s[7], 1.0);
    }

    #[test]
    fn sphere_and_cylinder_shadows_differ_in_aspect() {
        let mut aspects = Vec::new();
        for class in [ObjectClass::MineSphere, ObjectClass::MineCylinder] {
            let mut spec = SceneSpec::new(class, 5);
            spec.object_height = 0.6;
            let rec = render_scene(&spec).unwrap();
            let f = extract_features(&rec.image, &rec.shadow_mask).unwrap();
            aspects.push(f.f2[SHAPE_OFFSET + 3]);
        }
        assert!((aspects[0] - aspects[1]).abs() > 0.05, "{aspects:?}");
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let img = Raster::from_fn(16, 16, 3, |y, x, c| ((y + x + c) % 5) as f64 / 5.0).unwrap();
        let m = ShadowMask::from_fn(16, 16, |y, _| y > 10);
        assert_eq!(extract_features(&img, &m).unwrap(), extract_features(&img, &m).unwrap());
        assert!(extract_features(&img, &ShadowMask::empty(8, 16)).is_err());
    }

    #[test]
    fn scaler_standardizes() {
        let samples: Vec<StreamFeatures> = (0..5)
            .map(|i| StreamFeatures {
                f1: vec![i as f64, 3.0],
                f2: vec![2.0 * i as f64, -1.0],
            })
            .collect();
        let sc = FeatureScaler::fit(&samples).unwrap();
        let t: Vec<_> = samples.iter().map(|s| sc.transform(s)).collect();
        let mean: f64 = t.iter().map(|s| s.f1[0]).sum::<f64>() / 5.0;
        let var: f64 = t.iter().map(|s| s.f1[0] * s.f1[0]).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        assert!(t.iter().all(|s| s.f1[1] == 0.0 && s.f2[1] == 0.0));
    }
}
