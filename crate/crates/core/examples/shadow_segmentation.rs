//! Renders one scene per class, segments its acoustic shadow and reports
//! IoU against the exact mask. Images and masks are written to the output
//! directory.
//!
//! `cargo run --release --example shadow_segmentation [out_dir]`

use std::path::PathBuf;

use sonar_fusion::imaging::io::{write_mask, write_raster};
use sonar_fusion::metrics::iou;
use sonar_fusion::noise::NoiseProfile;
use sonar_fusion::scene::{render_scene, ObjectClass, SceneSpec};
use sonar_fusion::segmentation::{segment_shadows_traced, SegmentationConfig};

fn main() -> sonar_fusion::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("sonar-fusion-segmentation"));
    let cfg = SegmentationConfig::default();
    let noise = NoiseProfile::standard();

    for (i, class) in ObjectClass::ALL.into_iter().enumerate() {
        let spec = SceneSpec::sample(class, 128, 128, (10.0, 10.0), 40 + i as u64);
        let scene = render_scene(&spec)?;
        let noisy = noise.apply(&scene.image, 7)?;
        for (tag, img) in [("clean", &scene.image), ("noisy", &noisy)] {
            let trace = segment_shadows_traced(img, &cfg)?;
            let score = iou(&trace.mask, &scene.shadow_mask)?;
            println!(
                "{:<20} {tag}: threshold {:.4}, {} shadow px (truth {}), IoU {score:.3}",
                class.name(),
                trace.threshold.value,
                trace.mask.count(),
                scene.shadow_mask.count()
            );
            write_mask(&out.join(format!("{}_{tag}_segmented.png", class.name())), &trace.mask)?;
            write_raster(&out.join(format!("{}_{tag}.png", class.name())), img)?;
        }
        write_mask(&out.join(format!("{}_truth.png", class.name())), &scene.shadow_mask)?;
    }
    println!("wrote images to {}", out.display());
    Ok(())
}
