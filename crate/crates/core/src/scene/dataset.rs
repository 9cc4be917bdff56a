use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::{atomic_write, read_mask, read_raster, write_mask, write_raster};
use crate::imaging::{Raster, ShadowMask};
use crate::noise::NoiseProfile;
use crate::seed::derive_seed;

use super::render::{render_scene, ObjectClass, SceneRecord, SceneSpec};

pub const GENERATOR_VERSION: &str = concat!("sonar-fusion/", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count_per_class: usize,
    pub classes: Vec<ObjectClass>,
    pub noise: NoiseProfile,
    pub seed: u64,
    pub image_height: usize,
    pub image_width: usize,
    pub ppm_range: (f64, f64),
    /// Probability that a scene gets a nadir stripe.
    pub nadir_probability: f64,
    pub nadir_width: usize,
    pub colormapped: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count_per_class: 10,
            classes: ObjectClass::ALL.to_vec(),
            noise: NoiseProfile::standard(),
            seed: 0,
            image_height: 256,
            image_width: 256,
            ppm_range: (10.0, 10.0),
            nadir_probability: 0.0,
            nadir_width: 12,
            colormapped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Clean rendering, relative to the manifest directory.
    pub image: String,
    /// Noise-corrupted rendering, when a noise profile was applied.
    pub noisy_image: Option<String>,
    pub highlight_mask: String,
    pub shadow_mask: String,
    pub label: ObjectClass,
    pub spec: SceneSpec,
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub global_seed: u64,
    pub config: DatasetConfig,
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json()?.as_bytes())
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// Labels present in the manifest, sorted and deduplicated.
    pub fn labels(&self) -> Vec<ObjectClass> {
        let mut l: Vec<_> = self.entries.iter().map(|e| e.label).collect();
        l.sort();
        l.dedup();
        l
    }

    /// The image a model should consume: the noisy rendering when present.
    pub fn load_input(&self, e: &ManifestEntry) -> Result<Raster> {
        read_raster(&self.resolve(e.noisy_image.as_deref().unwrap_or(&e.image)))
    }

    pub fn load_clean(&self, e: &ManifestEntry) -> Result<Raster> {
        read_raster(&self.resolve(&e.image))
    }

    pub fn load_shadow_mask(&self, e: &ManifestEntry) -> Result<ShadowMask> {
        read_mask(&self.resolve(&e.shadow_mask))
    }

    pub fn load_highlight_mask(&self, e: &ManifestEntry) -> Result<ShadowMask> {
        read_mask(&self.resolve(&e.highlight_mask))
    }
}

/// Per-scene seed, independent of generation order.
pub fn scene_seed(global: u64, class_index: usize, index: usize) -> u64 {
    derive_seed(derive_seed(global, class_index as u64), index as u64)
}

/// The scene spec for one dataset slot.
pub fn dataset_spec(cfg: &DatasetConfig, class_index: usize, index: usize) -> SceneSpec {
    let class = cfg.classes[class_index];
    let seed = scene_seed(cfg.seed, class_index, index);
    let mut spec = SceneSpec::sample(class, cfg.image_height, cfg.image_width, cfg.ppm_range, seed);
    // independent draw so that toggling nadir does not move objects
    let coin = derive_seed(seed, 0x4ad1) as f64 / u64::MAX as f64;
    if coin < cfg.nadir_probability {
        spec.nadir_width = cfg.nadir_width;
    }
    spec.colormapped = cfg.colormapped;
    spec
}

/// A rendered dataset slot before anything is written to disk.
#[derive(Debug, Clone)]
pub struct RenderedSlot {
    pub record: SceneRecord,
    pub noisy: Option<Raster>,
    pub noise_seed: Option<u64>,
}

/// Renders one slot exactly as [`generate_dataset`] would, in memory.
pub fn render_slot(cfg: &DatasetConfig, class_index: usize, index: usize) -> Result<RenderedSlot> {
    let spec = dataset_spec(cfg, class_index, index);
    let record = render_scene(&spec)?;
    if cfg.noise.is_identity() {
        return Ok(RenderedSlot {
            record,
            noisy: None,
            noise_seed: None,
        });
    }
    let noise_seed = derive_seed(spec.seed, 0x0015e);
    let noisy = cfg.noise.apply(&record.image, noise_seed)?;
    Ok(RenderedSlot {
        record,
        noisy: Some(noisy),
        noise_seed: Some(noise_seed),
    })
}

fn write_entry(
    cfg: &DatasetConfig,
    out_dir: &Path,
    class_index: usize,
    index: usize,
) -> Result<ManifestEntry> {
    let slot = render_slot(cfg, class_index, index)?;
    let rec = slot.record;
    let spec = rec.spec.clone();
    let id = format!("{}-{index:04}", spec.class_label.name());
    let image = format!("images/{id}.png");
    let highlight_mask = format!("masks/{id}_highlight.png");
    let shadow_mask = format!("masks/{id}_shadow.png");
    write_raster(&out_dir.join(&image), &rec.image)?;
    write_mask(&out_dir.join(&highlight_mask), &rec.highlight_mask)?;
    write_mask(&out_dir.join(&shadow_mask), &rec.shadow_mask)?;

    let noisy_image = match &slot.noisy {
        Some(noisy) => {
            let path = format!("noisy/{id}.png");
            write_raster(&out_dir.join(&path), noisy)?;
            Some(path)
        }
        None => None,
    };
    let noise_seed = slot.noise_seed;

    Ok(ManifestEntry {
        id,
        image,
        noisy_image,
        highlight_mask,
        shadow_mask,
        label: spec.class_label,
        spec,
        noise_seed,
    })
}

/// Renders `count_per_class` scenes for each class, writes images, masks and
/// `manifest.json` under `out_dir`. Per-entry failures are logged, recorded
/// in the manifest, and do not stop generation.
pub fn generate_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if cfg.classes.is_empty() && cfg.count_per_class > 0 {
        return Err(Error::domain("dataset needs at least one class"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for class_index in 0..cfg.classes.len() {
        for index in 0..cfg.count_per_class {
            match write_entry(cfg, out_dir, class_index, index) {
                Ok(e) => entries.push(e),
                Err(err) => {
                    let msg = format!("{}-{index:04}: {err}", cfg.classes[class_index].name());
                    warn!("dataset entry failed: {msg}");
                    failures.push(msg);
                }
            }
        }
    }
    let manifest = DatasetManifest {
        generator_version: GENERATOR_VERSION.to_string(),
        global_seed: cfg.seed,
        config: cfg.clone(),
        entries,
        failures,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: usize, seed: u64) -> DatasetConfig {
        DatasetConfig {
            count_per_class: count,
            image_height: 48,
            image_width: 48,
            ppm_range: (5.0, 6.0),
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&small(0, 1), dir.path()).unwrap();
        assert!(m.entries.is_empty());
        assert!(dir.path().join(MANIFEST_FILE).exists());
        assert!(!dir.path().join("images").exists());
    }

    #[test]
    fn balanced_and_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&small(3, 2), dir.path()).unwrap();
        assert_eq!(m.entries.len(), 15);
        for class in ObjectClass::ALL {
            assert_eq!(m.entries.iter().filter(|e| e.label == class).count(), 3);
        }
        let loaded = DatasetManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        for e in &loaded.entries {
            for p in [&e.image, &e.highlight_mask, &e.shadow_mask] {
                assert!(loaded.resolve(p).exists());
            }
            assert!(loaded.resolve(e.noisy_image.as_ref().unwrap()).exists());
            let mask = loaded.load_shadow_mask(e).unwrap();
            assert_eq!((mask.height(), mask.width()), (48, 48));
        }
        let mut ids: Vec<_> = m.entries.iter().map(|e| &e.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 15);
    }

    #[test]
    fn manifest_bytes_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_dataset(&small(2, 7), a.path()).unwrap();
        generate_dataset(&small(2, 7), b.path()).unwrap();
        for rel in [MANIFEST_FILE, "images/ship-0001.png", "noisy/plane-0000.png"] {
            assert_eq!(
                fs::read(a.path().join(rel)).unwrap(),
                fs::read(b.path().join(rel)).unwrap(),
                "{rel}"
            );
        }
    }
}
