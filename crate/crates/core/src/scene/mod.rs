//! Procedural side-scan scenes with exact highlight and shadow ground truth,
//! and the on-disk dataset layout built from them.

pub mod colormap;
mod dataset;
mod render;

pub use dataset::{
    dataset_spec, generate_dataset, render_slot, scene_seed, RenderedSlot, DatasetConfig, DatasetManifest, ManifestEntry,
    GENERATOR_VERSION, MANIFEST_FILE,
};
pub use render::{
    render_scene, shadow_length, ObjectClass, SceneRecord, SceneSpec, HIGHLIGHT_LEVEL,
    NADIR_LEVEL, SEABED_LEVEL, SHADOW_LEVEL,
};
