//! Trains the patch denoiser with the region-masked loss, then compares it
//! with the region-aware mean filter and a plain mean filter on held-out
//! scenes.
//!
//! `cargo run --release --example denoising [epochs]`

use sonar_fusion::denoise::{
    baseline_region_filter, train_patch_denoiser, DenoisePair, DenoiseTrainConfig, RegionMask,
};
use sonar_fusion::imaging::{convolve_uniform, Raster};
use sonar_fusion::metrics::{psnr, ssim};
use sonar_fusion::scene::{render_slot, DatasetConfig};

fn pairs(seed: u64, per_class: usize) -> sonar_fusion::Result<Vec<DenoisePair>> {
    let cfg = DatasetConfig {
        count_per_class: per_class,
        image_height: 128,
        image_width: 128,
        seed,
        ..Default::default()
    };
    let mut out = Vec::new();
    for c in 0..cfg.classes.len() {
        for i in 0..per_class {
            let s = render_slot(&cfg, c, i)?;
            out.push(DenoisePair {
                noisy: s.noisy.expect("default profile adds noise"),
                mask: RegionMask::from_scene_masks(&s.record.highlight_mask, &s.record.shadow_mask)?,
                clean: s.record.image,
            });
        }
    }
    Ok(out)
}

fn mean_filter(img: &Raster, n: usize) -> sonar_fusion::Result<Raster> {
    let p = convolve_uniform(&img.channel_plane(0), n)?;
    Ok(Raster::from_plane(&p))
}

fn main() -> sonar_fusion::Result<()> {
    let mut cfg = DenoiseTrainConfig::default();
    if let Some(e) = std::env::args().nth(1) {
        cfg.epochs = e.parse().expect("epochs must be an integer");
    }
    let train = pairs(1, 8)?;
    let test = pairs(2, 4)?;
    let (model, history) = train_patch_denoiser(&train, &cfg)?;
    println!(
        "trained {} epochs, loss {:.5} -> {:.5}",
        history.len(),
        history[0],
        history[history.len() - 1]
    );

    let mut rows = [("noisy input", 0.0, 0.0), ("patch denoiser", 0.0, 0.0), ("region filter", 0.0, 0.0), ("mean filter 7", 0.0, 0.0)];
    for p in &test {
        let outputs = [
            p.noisy.clone(),
            model.denoise_image(&p.noisy)?,
            baseline_region_filter(&p.noisy, &p.mask, 7, 3)?,
            mean_filter(&p.noisy, 7)?,
        ];
        for (row, out) in rows.iter_mut().zip(&outputs) {
            row.1 += psnr(out, &p.clean)?;
            row.2 += ssim(out, &p.clean)?;
        }
    }
    let n = test.len() as f64;
    for (name, ps, ss) in rows {
        println!("{name:<15} PSNR {:>6.2} dB  SSIM {:.4}", ps / n, ss / n);
    }
    Ok(())
}
