//! Writes a small labeled dataset (clean and noisy images, highlight and
//! shadow masks, manifest) and reads it back.
//!
//! `cargo run --release --example dataset_generation [out_dir]`

use std::path::PathBuf;

use sonar_fusion::noise::NoiseProfile;
use sonar_fusion::scene::{generate_dataset, DatasetConfig, DatasetManifest, MANIFEST_FILE};

fn main() -> sonar_fusion::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("sonar-fusion-dataset"));
    let cfg = DatasetConfig {
        count_per_class: 4,
        image_height: 128,
        image_width: 128,
        ppm_range: (8.0, 12.0),
        noise: NoiseProfile::light(),
        nadir_probability: 0.5,
        seed: 11,
        ..Default::default()
    };
    let m = generate_dataset(&cfg, &out)?;
    println!("{} entries, {} failures, manifest at {}", m.entries.len(), m.failures.len(), out.join(MANIFEST_FILE).display());

    let back = DatasetManifest::load(&out.join(MANIFEST_FILE))?;
    for e in back.entries.iter().step_by(4) {
        let shadow = back.load_shadow_mask(e)?;
        println!(
            "{:<26} height {:.2} m, ground range {:>5.1} m, shadow {:>5} px, noisy {}",
            e.id,
            e.spec.object_height,
            e.spec.ground_range,
            shadow.count(),
            e.noisy_image.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}
