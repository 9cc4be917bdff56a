//! sRGB to CIELAB and LCH conversions on a few reference colours, plus a
//! round trip through a whole raster.
//!
//! `cargo run --example color_spaces`

use sonar_fusion::imaging::color::{lab_pixel_to_lch, lab_pixel_to_srgb, srgb_pixel_to_lab};
use sonar_fusion::imaging::{lab_to_rgb, rgb_to_lab, Raster};

fn main() -> sonar_fusion::Result<()> {
    let swatches = [
        ("black", [0.0, 0.0, 0.0]),
        ("white", [1.0, 1.0, 1.0]),
        ("mid grey", [0.5, 0.5, 0.5]),
        ("red", [1.0, 0.0, 0.0]),
        ("sonar copper", [0.72, 0.45, 0.2]),
    ];
    println!("{:<14}{:>24}{:>28}", "colour", "L* a* b*", "L C h(deg)");
    for (name, rgb) in swatches {
        let lab = srgb_pixel_to_lab(rgb);
        let lch = lab_pixel_to_lch(lab);
        println!(
            "{name:<14}{:>8.3}{:>8.3}{:>8.3}    {:>8.3}{:>8.3}{:>8.2}",
            lab[0], lab[1], lab[2], lch[0], lch[1], lch[2]
        );
        let back = lab_pixel_to_srgb(lab);
        let err = rgb.iter().zip(back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{name} round trip error {err}");
    }

    let img = Raster::from_fn(32, 32, 3, |y, x, c| ((y * 7 + x * 3 + c * 11) % 32) as f64 / 31.0)?;
    let back = lab_to_rgb(&rgb_to_lab(&img)?)?;
    let worst = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("raster round trip max error: {worst:.2e}");
    Ok(())
}
