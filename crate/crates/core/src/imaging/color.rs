//! sRGB, CIELAB and CIELCh(ab) conversions.
//!
//! Linearization follows the sRGB transfer curve and the XYZ matrix is the
//! standard sRGB/D65 one. The reference white is taken as the matrix row sums
//! so that `(1, 1, 1)` maps to `L* = 100, a* = b* = 0` without rounding drift.

use crate::error::{Error, Result};
use crate::imaging::Raster;

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Chroma below this is treated as exactly achromatic when computing hue.
pub const ACHROMATIC_CHROMA: f64 = 1e-9;

const DELTA: f64 = 6.0 / 29.0;

fn white_point() -> [f64; 3] {
    [
        RGB_TO_XYZ[0].iter().sum(),
        RGB_TO_XYZ[1].iter().sum(),
        RGB_TO_XYZ[2].iter().sum(),
    ]
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of (j, i)
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor * inv_det;
        }
    }
    out
}

/// Converts one sRGB pixel (components in `[0, 1]`) to `(L*, a*, b*)`.
pub fn srgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let white = white_point();
    let mut f = [0.0; 3];
    for i in 0..3 {
        let xyz = RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2];
        f[i] = lab_f(xyz / white[i]);
    }
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

pub fn lab_pixel_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let white = white_point();
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        white[0] * lab_f_inv(fx),
        white[1] * lab_f_inv(fy),
        white[2] * lab_f_inv(fz),
    ];
    let inv = invert3(&RGB_TO_XYZ);
    let mut rgb = [0.0; 3];
    for i in 0..3 {
        let lin = inv[i][0] * xyz[0] + inv[i][1] * xyz[1] + inv[i][2] * xyz[2];
        rgb[i] = linear_to_srgb(lin);
    }
    rgb
}

/// `(L*, a*, b*)` to `(L, C, H)` with hue in degrees on `[0, 360)`.
/// Achromatic pixels get hue 0.
pub fn lab_pixel_to_lch(lab: [f64; 3]) -> [f64; 3] {
    let c = lab[1].hypot(lab[2]);
    let h = if c < ACHROMATIC_CHROMA {
        0.0
    } else {
        let deg = lab[2].atan2(lab[1]).to_degrees();
        let wrapped = deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative angles
        if wrapped >= 360.0 {
            0.0
        } else {
            wrapped
        }
    };
    [lab[0], c, h]
}

fn map_pixels(img: &Raster, what: &str, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Raster> {
    if img.channels() != 3 {
        return Err(Error::domain(format!(
            "{what} expects a 3-channel raster, got {} channel(s)",
            img.channels()
        )));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| f([px[0], px[1], px[2]]))
        .collect();
    Raster::new(img.height(), img.width(), 3, data)
}

/// sRGB raster to CIELAB. Channel 0 holds `L*` in `[0, 100]`.
pub fn rgb_to_lab(img: &Raster) -> Result<Raster> {
    map_pixels(img, "rgb_to_lab", srgb_pixel_to_lab)
}

/// Inverse of [`rgb_to_lab`].
pub fn lab_to_rgb(lab: &Raster) -> Result<Raster> {
    map_pixels(lab, "lab_to_rgb", lab_pixel_to_srgb)
}

pub fn lab_to_lch(lab: &Raster) -> Result<Raster> {
    map_pixels(lab, "lab_to_lch", lab_pixel_to_lch)
}
