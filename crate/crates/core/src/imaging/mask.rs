use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Plane, Raster};

/// Binary per-pixel mask; `true` marks a member pixel (shadow, highlight, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShadowMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl ShadowMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::domain(format!(
                "mask length {} does not match {height}x{width}",
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    /// Thresholds a single-channel raster at 0.5.
    pub fn from_raster(r: &Raster) -> Self {
        let g = r.to_gray();
        Self {
            height: g.height(),
            width: g.width(),
            bits: g.data().iter().map(|&v| v >= 0.5).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &ShadowMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn union(&self, other: &ShadowMask) -> Result<ShadowMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &ShadowMask) -> Result<ShadowMask> {
        self.zip_with(other, |a, b| a && b)
    }

    /// True when every member of `self` is also a member of `other`.
    pub fn is_subset_of(&self, other: &ShadowMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &ShadowMask, f: impl Fn(bool, bool) -> bool) -> Result<ShadowMask> {
        if !self.same_shape(other) {
            return Err(Error::domain(format!(
                "mask shapes differ: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(ShadowMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// 0/1 valued plane.
    pub fn to_plane(&self) -> Plane {
        Plane::new(
            self.height,
            self.width,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dimensions are consistent")
    }

    pub fn to_raster(&self) -> Raster {
        Raster::from_plane(&self.to_plane())
    }
}
