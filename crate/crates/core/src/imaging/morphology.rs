//! Binary morphology with disk structuring elements.
//!
//! Pixels outside the image are background. Operations are evaluated on a
//! canvas padded by the element radius so that closing behaves as it would on
//! an unbounded plane and then gets cropped back: closing is extensive and
//! idempotent, opening is anti-extensive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ShadowMask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    radius: usize,
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// All `(dy, dx)` with `dy^2 + dx^2 <= radius^2`.
    pub fn disk(radius: usize) -> Self {
        let r = radius as isize;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dy * dy + dx * dx <= r * r {
                    offsets.push((dy, dx));
                }
            }
        }
        Self { radius, offsets }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }
}

struct Canvas {
    h: usize,
    w: usize,
    pad: usize,
    bits: Vec<bool>,
}

impl Canvas {
    fn from_mask(mask: &ShadowMask, pad: usize) -> Self {
        let (h, w) = (mask.height() + 2 * pad, mask.width() + 2 * pad);
        let mut bits = vec![false; h * w];
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                bits[(y + pad) * w + x + pad] = mask.get(y, x);
            }
        }
        Self { h, w, pad, bits }
    }

    #[inline]
    fn at(&self, y: isize, x: isize) -> bool {
        if y < 0 || x < 0 || y >= self.h as isize || x >= self.w as isize {
            false
        } else {
            self.bits[y as usize * self.w + x as usize]
        }
    }

    fn dilate(&self, se: &StructuringElement) -> Canvas {
        let mut bits = vec![false; self.bits.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                bits[y * self.w + x] = se
                    .offsets()
                    .iter()
                    .any(|&(dy, dx)| self.at(y as isize + dy, x as isize + dx));
            }
        }
        Canvas { bits, ..*self }
    }

    fn erode(&self, se: &StructuringElement) -> Canvas {
        let mut bits = vec![false; self.bits.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                bits[y * self.w + x] = se
                    .offsets()
                    .iter()
                    .all(|&(dy, dx)| self.at(y as isize + dy, x as isize + dx));
            }
        }
        Canvas { bits, ..*self }
    }

    fn crop(&self, height: usize, width: usize) -> ShadowMask {
        ShadowMask::from_fn(height, width, |y, x| {
            self.bits[(y + self.pad) * self.w + x + self.pad]
        })
    }
}

pub fn dilate(mask: &ShadowMask, se: &StructuringElement) -> ShadowMask {
    Canvas::from_mask(mask, 0)
        .dilate(se)
        .crop(mask.height(), mask.width())
}

pub fn erode(mask: &ShadowMask, se: &StructuringElement) -> ShadowMask {
    Canvas::from_mask(mask, 0)
        .erode(se)
        .crop(mask.height(), mask.width())
}

/// Dilation followed by erosion. The result always contains the input.
pub fn morph_close(mask: &ShadowMask, se: &StructuringElement) -> ShadowMask {
    Canvas::from_mask(mask, se.radius())
        .dilate(se)
        .erode(se)
        .crop(mask.height(), mask.width())
}

/// Erosion followed by dilation. The result is always contained in the input.
pub fn morph_open(mask: &ShadowMask, se: &StructuringElement) -> ShadowMask {
    Canvas::from_mask(mask, se.radius())
        .erode(se)
        .dilate(se)
        .crop(mask.height(), mask.width())
}

pub(crate) fn check_radius(radius: usize) -> Result<()> {
    if radius == 0 {
        return Err(Error::domain("disk radius must be at least 1"));
    }
    Ok(())
}
