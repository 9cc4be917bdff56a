//! PSNR, SSIM and IoU on hand-made inputs, and a quality report table.
//!
//! `cargo run --example quality_metrics`

use sonar_fusion::imaging::{Raster, ShadowMask};
use sonar_fusion::metrics::{iou, psnr, ssim, QualityReport};

fn main() -> sonar_fusion::Result<()> {
    let reference = Raster::from_fn(64, 64, 1, |y, x, _| 0.5 + 0.4 * ((y as f64 / 6.0).sin() * (x as f64 / 9.0).cos()))?;
    let offset = Raster::from_fn(64, 64, 1, |y, x, c| (reference.get(y, x, c) + 0.05).min(1.0))?;
    let flat = Raster::filled(64, 64, 1, reference.mean());

    println!("{}", QualityReport::csv_header());
    for (name, cand) in [("identical", &reference), ("offset+0.05", &offset), ("flat mean", &flat)] {
        println!("{}", QualityReport::compute(name, "wave", cand, &reference)?.csv_row());
    }
    println!("psnr(identical) serializes as {}", serde_json::to_string(&QualityReport::compute("x", "y", &reference, &reference)?)?);
    println!("ssim symmetric: {}", ssim(&offset, &reference)? == ssim(&reference, &offset)?);
    println!("psnr(offset) = {:.4} dB", psnr(&offset, &reference)?);

    let a = ShadowMask::from_fn(4, 4, |_, x| x < 2);
    let b = ShadowMask::from_fn(4, 4, |_, x| (1..3).contains(&x));
    println!("IoU of half-overlapping columns: {:.4}", iou(&a, &b)?);
    println!("IoU of two empty masks: {}", iou(&ShadowMask::empty(4, 4), &ShadowMask::empty(4, 4))?);
    Ok(())
}
