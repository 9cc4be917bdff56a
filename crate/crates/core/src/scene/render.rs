use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Raster, ShadowMask};
use crate::seed::derive_seed;

use super::colormap::apply_colormap;

pub const SEABED_LEVEL: f64 = 0.45;
pub const HIGHLIGHT_LEVEL: f64 = 0.9;
pub const SHADOW_LEVEL: f64 = 0.08;
pub const NADIR_LEVEL: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectClass {
    Ship,
    Plane,
    MineCylinder,
    MineSphere,
    MineTruncatedCone,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] = [
        ObjectClass::Ship,
        ObjectClass::Plane,
        ObjectClass::MineCylinder,
        ObjectClass::MineSphere,
        ObjectClass::MineTruncatedCone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Ship => "ship",
            ObjectClass::Plane => "plane",
            ObjectClass::MineCylinder => "mine-cylinder",
            ObjectClass::MineSphere => "mine-sphere",
            ObjectClass::MineTruncatedCone => "mine-truncated-cone",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown object class `{s}`")))
    }

    /// Plausible object heights above the seabed, meters.
    fn height_range(self) -> (f64, f64) {
        match self {
            ObjectClass::Ship => (1.2, 2.0),
            ObjectClass::Plane => (0.8, 1.4),
            ObjectClass::MineCylinder => (0.5, 0.7),
            ObjectClass::MineSphere => (0.8, 1.1),
            ObjectClass::MineTruncatedCone => (0.6, 0.9),
        }
    }

    /// Radius of a circle enclosing the footprint, meters.
    fn bounding_radius(self) -> f64 {
        match self {
            ObjectClass::Ship => 1.65,
            ObjectClass::Plane => 1.6,
            ObjectClass::MineCylinder => 0.86,
            ObjectClass::MineSphere => 0.5,
            ObjectClass::MineTruncatedCone => 0.68,
        }
    }

    /// Plan-view footprint in object coordinates: `u` along the long axis,
    /// `v` across it, both in meters.
    fn contains(self, u: f64, v: f64) -> bool {
        match self {
            ObjectClass::Ship => {
                let (half_len, half_beam, bow) = (1.6, 0.5, 0.8);
                if u.abs() > half_len {
                    return false;
                }
                let taper = if u > half_len - bow {
                    (half_len - u) / bow
                } else {
                    1.0
                };
                v.abs() <= half_beam * taper
            }
            ObjectClass::Plane => {
                let fuselage = u.abs() <= 1.5 && v.abs() <= 0.2;
                let wings = (u - 0.2).abs() <= 0.3 && v.abs() <= 1.5;
                let tail = (u + 1.3).abs() <= 0.15 && v.abs() <= 0.6;
                fuselage || wings || tail
            }
            ObjectClass::MineCylinder => u.abs() <= 0.8 && v.abs() <= 0.3,
            ObjectClass::MineSphere => u * u + v * v <= 0.25,
            ObjectClass::MineTruncatedCone => {
                u.abs() <= 0.5 && v.abs() <= 0.25 + 0.2 * (u + 0.5)
            }
        }
    }
}

impl std::fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometry and rendering options for one synthetic side-scan scene.
/// Range increases down the rows; shadows are cast toward larger rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub class_label: ObjectClass,
    /// Meters above the seabed.
    pub object_height: f64,
    /// Meters above the seabed.
    pub sonar_altitude: f64,
    /// Horizontal distance from the sonar track to the object, meters.
    pub ground_range: f64,
    pub pixels_per_meter: f64,
    /// Rotation of the object's long axis, degrees.
    pub orientation: f64,
    /// Rows of dark water column at the top of the image; 0 disables it.
    pub nadir_width: usize,
    pub colormapped: bool,
    pub seed: u64,
    pub image_height: usize,
    pub image_width: usize,
    /// Object centre as fractions of the image height and width.
    pub anchor: (f64, f64),
}

impl SceneSpec {
    /// A centred object on a 256x256 canvas at 10 px/m, 10 m altitude.
    pub fn new(class_label: ObjectClass, seed: u64) -> Self {
        Self {
            class_label,
            object_height: class_label.height_range().0,
            sonar_altitude: 10.0,
            ground_range: 20.0,
            pixels_per_meter: 10.0,
            orientation: 0.0,
            nadir_width: 0,
            colormapped: false,
            seed,
            image_height: 256,
            image_width: 256,
            anchor: (0.35, 0.5),
        }
    }

    /// Randomized geometry for one class. The object is placed so that the
    /// full shadow fits inside the image whenever the canvas allows it.
    pub fn sample(
        class_label: ObjectClass,
        image_height: usize,
        image_width: usize,
        ppm_range: (f64, f64),
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5ce0));
        let (hmin, hmax) = class_label.height_range();
        let object_height = rng.random_range(hmin..=hmax);
        let pixels_per_meter = if ppm_range.1 > ppm_range.0 {
            rng.random_range(ppm_range.0..=ppm_range.1)
        } else {
            ppm_range.0
        };
        let ground_range = rng.random_range(12.0..=30.0);
        let orientation = rng.random_range(0.0..360.0);
        let mut spec = Self {
            class_label,
            object_height,
            sonar_altitude: 10.0,
            ground_range,
            pixels_per_meter,
            orientation,
            nadir_width: 0,
            colormapped: false,
            seed,
            image_height,
            image_width,
            anchor: (0.5, 0.5),
        };
        let radius_px = class_label.bounding_radius() * pixels_per_meter;
        let shadow_px = spec.shadow_length_px() as f64;
        let margin = 3.0;
        let (h, w) = (image_height as f64, image_width as f64);
        let row_lo = radius_px + margin;
        let row_hi = (h - margin - radius_px - shadow_px).max(row_lo);
        let col_lo = radius_px + margin;
        let col_hi = (w - margin - radius_px).max(col_lo);
        let cy = row_lo + rng.random::<f64>() * (row_hi - row_lo);
        let cx = col_lo + rng.random::<f64>() * (col_hi - col_lo);
        spec.anchor = (cy / h, cx / w);
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.object_height > 0.0 && self.object_height < self.sonar_altitude) {
            return Err(Error::domain(format!(
                "object height {} must lie in (0, sonar altitude {})",
                self.object_height, self.sonar_altitude
            )));
        }
        if !(self.ground_range > 0.0) {
            return Err(Error::domain("ground range must be positive"));
        }
        if !(self.pixels_per_meter > 0.0) {
            return Err(Error::domain("pixels per meter must be positive"));
        }
        if self.image_height == 0 || self.image_width == 0 {
            return Err(Error::domain("image dimensions must be positive"));
        }
        Ok(())
    }

    /// Flat-seabed shadow length `h * R / (A - h)`, meters.
    pub fn shadow_length_m(&self) -> f64 {
        shadow_length(self.object_height, self.sonar_altitude, self.ground_range)
    }

    pub fn shadow_length_px(&self) -> usize {
        (self.shadow_length_m() * self.pixels_per_meter).round() as usize
    }
}

/// Similar-triangles shadow length behind an object of height `h` seen from
/// altitude `altitude` at horizontal range `range`.
pub fn shadow_length(h: f64, altitude: f64, range: f64) -> f64 {
    h * range / (altitude - h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub image: Raster,
    pub highlight_mask: ShadowMask,
    pub shadow_mask: ShadowMask,
    pub label: ObjectClass,
    pub spec: SceneSpec,
}

/// Smooth value noise in `[-1, 1]`: random lattice values every `cell`
/// pixels, bilinearly interpolated.
fn value_noise(h: usize, w: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let at = |yy: usize, xx: usize| lattice[yy * gw + xx];
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
            let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Renders the scene and its exact highlight / shadow masks.
pub fn render_scene(spec: &SceneSpec) -> Result<SceneRecord> {
    spec.validate()?;
    let (h, w) = (spec.image_height, spec.image_width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coarse = value_noise(h, w, 12, &mut rng);
    let fine = value_noise(h, w, 3, &mut rng);

    let cy = spec.anchor.0 * h as f64;
    let cx = spec.anchor.1 * w as f64;
    let (sin, cos) = spec.orientation.to_radians().sin_cos();
    let ppm = spec.pixels_per_meter;
    let highlight = ShadowMask::from_fn(h, w, |y, x| {
        let dy = (y as f64 + 0.5 - cy) / ppm;
        let dx = (x as f64 + 0.5 - cx) / ppm;
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        spec.class_label.contains(u, v)
    });

    let shadow_px = spec.shadow_length_px();
    let mut shadow = ShadowMask::empty(h, w);
    for x in 0..w {
        if let Some(far) = (0..h).rev().find(|&y| highlight.get(y, x)) {
            for y in (far + 1..=far + shadow_px).take_while(|&y| y < h) {
                shadow.set(y, x, true);
            }
        }
    }

    let mut gray = Raster::filled(h, w, 1, 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = if highlight.get(y, x) {
                HIGHLIGHT_LEVEL + 0.04 * fine[i]
            } else if shadow.get(y, x) {
                SHADOW_LEVEL + 0.02 * fine[i]
            } else if y < spec.nadir_width {
                NADIR_LEVEL + 0.01 * fine[i]
            } else {
                SEABED_LEVEL + 0.06 * coarse[i] + 0.02 * fine[i]
            };
            gray.set(y, x, 0, v.clamp(0.0, 1.0));
        }
    }

    let image = if spec.colormapped {
        apply_colormap(&gray)
    } else {
        gray
    };
    Ok(SceneRecord {
        image,
        highlight_mask: highlight,
        shadow_mask: shadow,
        label: spec.class_label,
        spec: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shadow_length_examples() {
        assert_abs_diff_eq!(shadow_length(1.0, 10.0, 18.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(shadow_length(1e-12, 10.0, 18.0), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn vanishing_height_has_no_shadow() {
        let mut spec = SceneSpec::new(ObjectClass::MineCylinder, 3);
        spec.object_height = 1e-6;
        let rec = render_scene(&spec).unwrap();
        assert!(rec.shadow_mask.is_empty());
        assert!(!rec.highlight_mask.is_empty());
    }

    #[test]
    fn shadow_columns_have_exact_length() {
        let mut spec = SceneSpec::new(ObjectClass::MineSphere, 4);
        spec.object_height = 1.0;
        spec.ground_range = 18.0;
        let rec = render_scene(&spec).unwrap();
        assert_eq!(spec.shadow_length_px(), 20);
        for x in 0..spec.image_width {
            let n = (0..spec.image_height).filter(|&y| rec.shadow_mask.get(y, x)).count();
            let has_object = (0..spec.image_height).any(|y| rec.highlight_mask.get(y, x));
            assert_eq!(n, if has_object { 20 } else { 0 });
        }
    }

    #[test]
    fn masks_disjoint_and_shadow_down_range() {
        for (i, class) in ObjectClass::ALL.into_iter().enumerate() {
            let spec = SceneSpec::sample(class, 96, 96, (6.0, 9.0), i as u64 + 10);
            let rec = render_scene(&spec).unwrap();
            assert!(rec.highlight_mask.intersection(&rec.shadow_mask).unwrap().is_empty());
            for x in 0..96 {
                let far = (0..96).rev().find(|&y| rec.highlight_mask.get(y, x));
                for y in 0..96 {
                    if rec.shadow_mask.get(y, x) {
                        assert!(far.is_some_and(|f| y > f));
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = SceneSpec::sample(ObjectClass::Plane, 64, 80, (6.0, 9.0), 99);
        assert_eq!(render_scene(&spec).unwrap(), render_scene(&spec).unwrap());
    }

    #[test]
    fn long_range_has_fewer_object_pixels() {
        for class in ObjectClass::ALL {
            let mut near = SceneSpec::new(class, 1);
            near.anchor = (0.3, 0.5);
            let mut far = near.clone();
            far.pixels_per_meter = 5.0;
            let a = render_scene(&near).unwrap().highlight_mask.count();
            let b = render_scene(&far).unwrap().highlight_mask.count();
            assert!(b < a, "{class}: {b} !< {a}");
        }
    }

    #[test]
    fn invalid_geometry_rejected() {
        let mut spec = SceneSpec::new(ObjectClass::Ship, 0);
        spec.object_height = 12.0;
        assert!(render_scene(&spec).unwrap_err().is_domain());
        spec.object_height = 1.0;
        spec.ground_range = 0.0;
        assert!(render_scene(&spec).is_err());
    }

    #[test]
    fn nadir_and_colormap() {
        let mut spec = SceneSpec::new(ObjectClass::MineSphere, 2);
        spec.nadir_width = 10;
        spec.colormapped = true;
        let rec = render_scene(&spec).unwrap();
        assert_eq!(rec.image.channels(), 3);
        assert!(rec.image.get(2, 3, 0) < 0.1);
        assert!(rec.image.get(200, 3, 0) > 0.3);
    }

    #[test]
    fn class_names_round_trip() {
        for c in ObjectClass::ALL {
            assert_eq!(ObjectClass::parse(c.name()).unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
    }
}
