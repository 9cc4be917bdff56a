//! Physics-informed sonar corruptions: multipath echoes, backscatter speckle
//! and reverberation tails. All operators act along the range axis and clip
//! their output to `[0, 1]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;

/// Direction in which slant range increases.
///
/// `Rows`: range grows with the row index (down the image), which is how the
/// scene generator lays out shadows. `Columns`: range grows left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeAxis {
    #[default]
    Rows,
    Columns,
}

impl RangeAxis {
    fn extent(self, img: &Raster) -> usize {
        match self {
            RangeAxis::Rows => img.height(),
            RangeAxis::Columns => img.width(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoPath {
    /// Extra travel in pixels along the range axis.
    pub delay: usize,
    pub attenuation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultipathParams {
    pub paths: Vec<EchoPath>,
}

impl MultipathParams {
    pub fn validate(&self) -> Result<()> {
        for p in &self.paths {
            if p.delay < 1 {
                return Err(Error::domain("multipath delay must be at least 1 pixel"));
            }
            if !(0.0..=1.0).contains(&p.attenuation) {
                return Err(Error::domain(format!(
                    "multipath attenuation {} outside [0, 1]",
                    p.attenuation
                )));
            }
        }
        Ok(())
    }

    /// Parses `"d:a,d:a"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut paths = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (d, a) = part
                .split_once(':')
                .ok_or_else(|| Error::domain(format!("multipath path `{part}` is not d:a")))?;
            let delay = d
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad multipath delay `{d}`")))?;
            let attenuation = a
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad multipath attenuation `{a}`")))?;
            paths.push(EchoPath { delay, attenuation });
        }
        let p = Self { paths };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackscatterParams {
    /// Gamma shape of the unit-mean multiplicative speckle.
    pub looks: f64,
}

impl Default for BackscatterParams {
    fn default() -> Self {
        Self { looks: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverbParams {
    pub decay: f64,
    pub length: usize,
    pub mix: f64,
}

impl ReverbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::domain(format!("reverb decay {} outside (0, 1)", self.decay)));
        }
        if self.length < 1 {
            return Err(Error::domain("reverb length must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::domain(format!("reverb mix {} outside [0, 1]", self.mix)));
        }
        Ok(())
    }

    /// Parses `"decay,length,mix"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::domain(format!("reverb spec `{s}` is not decay,length,mix")));
        }
        let bad = |what: &str| Error::domain(format!("bad reverb {what} in `{s}`"));
        let p = Self {
            decay: parts[0].parse().map_err(|_| bad("decay"))?,
            length: parts[1].parse().map_err(|_| bad("length"))?,
            mix: parts[2].parse().map_err(|_| bad("mix"))?,
        };
        p.validate()?;
        Ok(p)
    }

    /// Causal geometric taps `decay^t`, normalized to sum to one.
    pub fn kernel(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.length).map(|t| self.decay.powi(t as i32)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }
}

/// Visits every range line as a list of data indices ordered by range.
fn for_each_range_line(img: &Raster, axis: RangeAxis, mut f: impl FnMut(&[usize])) {
    let (h, w, ch) = img.dims();
    let mut line = Vec::with_capacity(h.max(w));
    match axis {
        RangeAxis::Rows => {
            for x in 0..w {
                for c in 0..ch {
                    line.clear();
                    line.extend((0..h).map(|y| img.index(y, x, c)));
                    f(&line);
                }
            }
        }
        RangeAxis::Columns => {
            for y in 0..h {
                for c in 0..ch {
                    line.clear();
                    line.extend((0..w).map(|x| img.index(y, x, c)));
                    f(&line);
                }
            }
        }
    }
}

/// `img + sum_j a_j * shift(img, d_j)`, vacated pixels filled with zero.
pub fn apply_multipath(img: &Raster, p: &MultipathParams, axis: RangeAxis) -> Result<Raster> {
    p.validate()?;
    let extent = axis.extent(img);
    if let Some(bad) = p.paths.iter().find(|e| e.delay >= extent) {
        return Err(Error::domain(format!(
            "multipath delay {} does not fit a range extent of {extent}",
            bad.delay
        )));
    }
    let src = img.data();
    let mut out = src.to_vec();
    for_each_range_line(img, axis, |line| {
        for path in &p.paths {
            for t in path.delay..line.len() {
                out[line[t]] += path.attenuation * src[line[t - path.delay]];
            }
        }
    });
    Ok(Raster::new(img.height(), img.width(), img.channels(), out)?.clip01())
}

/// Multiplies every sample by an independent unit-mean gamma variate.
pub fn apply_backscatter(img: &Raster, p: &BackscatterParams, seed: u64) -> Result<Raster> {
    if !(p.looks > 0.0) || !p.looks.is_finite() {
        return Err(Error::domain(format!("backscatter looks must be positive, got {}", p.looks)));
    }
    let gamma = Gamma::new(p.looks, 1.0 / p.looks)
        .map_err(|e| Error::domain(format!("backscatter distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| v * gamma.sample(&mut rng))
        .collect();
    Ok(Raster::new(img.height(), img.width(), img.channels(), data)?.clip01())
}

/// Dry/wet mix with a causal decaying echo kernel. Samples before the start
/// of a range line repeat the first sample.
pub fn apply_reverberation(img: &Raster, p: &ReverbParams, axis: RangeAxis) -> Result<Raster> {
    p.validate()?;
    let kernel = p.kernel();
    let src = img.data();
    let mut out = src.to_vec();
    for_each_range_line(img, axis, |line| {
        for t in 0..line.len() {
            let wet: f64 = kernel
                .iter()
                .enumerate()
                .map(|(lag, k)| k * src[line[t.saturating_sub(lag)]])
                .sum();
            out[line[t]] = (1.0 - p.mix) * src[line[t]] + p.mix * wet;
        }
    });
    Ok(Raster::new(img.height(), img.width(), img.channels(), out)?.clip01())
}

/// A combination of the three corruptions, applied as multipath, then
/// reverberation, then backscatter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub name: String,
    pub multipath: Option<MultipathParams>,
    pub reverberation: Option<ReverbParams>,
    pub backscatter: Option<BackscatterParams>,
    #[serde(default)]
    pub axis: RangeAxis,
}

impl NoiseProfile {
    pub fn none() -> Self {
        Self {
            name: "none".into(),
            ..Default::default()
        }
    }

    pub fn light() -> Self {
        Self {
            name: "light".into(),
            multipath: None,
            reverberation: Some(ReverbParams { decay: 0.5, length: 3, mix: 0.15 }),
            backscatter: Some(BackscatterParams { looks: 16.0 }),
            axis: RangeAxis::Rows,
        }
    }

    pub fn standard() -> Self {
        Self {
            name: "default".into(),
            multipath: Some(MultipathParams {
                paths: vec![EchoPath { delay: 5, attenuation: 0.2 }],
            }),
            reverberation: Some(ReverbParams { decay: 0.6, length: 4, mix: 0.35 }),
            backscatter: Some(BackscatterParams { looks: 4.0 }),
            axis: RangeAxis::Rows,
        }
    }

    pub fn heavy() -> Self {
        Self {
            name: "heavy".into(),
            multipath: Some(MultipathParams {
                paths: vec![
                    EchoPath { delay: 4, attenuation: 0.3 },
                    EchoPath { delay: 9, attenuation: 0.15 },
                ],
            }),
            reverberation: Some(ReverbParams { decay: 0.7, length: 6, mix: 0.5 }),
            backscatter: Some(BackscatterParams { looks: 1.5 }),
            axis: RangeAxis::Rows,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Self::none()),
            "light" => Ok(Self::light()),
            "default" => Ok(Self::standard()),
            "heavy" => Ok(Self::heavy()),
            other => Err(Error::domain(format!(
                "unknown noise profile `{other}` (expected none, light, default or heavy)"
            ))),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.multipath.as_ref().is_none_or(|m| m.paths.is_empty())
            && self.reverberation.is_none_or(|r| r.mix == 0.0)
            && self.backscatter.is_none()
    }

    pub fn apply(&self, img: &Raster, seed: u64) -> Result<Raster> {
        let mut out = img.clone();
        if let Some(m) = &self.multipath {
            out = apply_multipath(&out, m, self.axis)?;
        }
        if let Some(r) = &self.reverberation {
            out = apply_reverberation(&out, r, self.axis)?;
        }
        if let Some(b) = &self.backscatter {
            out = apply_backscatter(&out, b, seed)?;
        }
        Ok(out)
    }
}

/// Mean-removed autocorrelation along the range axis for lags `0..=max_lag`,
/// averaged over all range lines and channels, normalized by lag 0.
pub fn range_autocorrelation(img: &Raster, axis: RangeAxis, max_lag: usize) -> Vec<f64> {
    let mean = img.mean();
    let src = img.data();
    let mut acc = vec![0.0; max_lag + 1];
    for_each_range_line(img, axis, |line| {
        for lag in 0..=max_lag.min(line.len().saturating_sub(1)) {
            for t in lag..line.len() {
                acc[lag] += (src[line[t]] - mean) * (src[line[t - lag]] - mean);
            }
        }
    });
    let zero = acc[0];
    if zero > 0.0 {
        acc.iter_mut().for_each(|v| *v /= zero);
    }
    acc
}
