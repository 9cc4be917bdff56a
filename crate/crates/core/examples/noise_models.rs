//! The three sonar corruptions on their own and combined: speckle
//! statistics, the reverberation kernel, and multipath echoes seen through
//! the range autocorrelation.
//!
//! `cargo run --release --example noise_models`

use sonar_fusion::imaging::Raster;
use sonar_fusion::metrics::{psnr, ssim};
use sonar_fusion::noise::{
    apply_backscatter, apply_multipath, range_autocorrelation, BackscatterParams, EchoPath, MultipathParams,
    NoiseProfile, RangeAxis, ReverbParams,
};
use sonar_fusion::scene::{render_scene, ObjectClass, SceneSpec};

fn main() -> sonar_fusion::Result<()> {
    let flat = Raster::filled(256, 256, 1, 0.5);
    for looks in [1.0, 4.0, 16.0] {
        let s = apply_backscatter(&flat, &BackscatterParams { looks }, 1)?;
        let mean = s.mean();
        let var = s.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.data().len() as f64;
        println!("backscatter looks {looks:>4}: mean {mean:.4}, variance {var:.5} (unclipped gamma {:.5})", 0.25 / looks);
    }

    let reverb = ReverbParams { decay: 0.6, length: 4, mix: 0.35 };
    let k = reverb.kernel();
    println!("reverberation kernel {k:.4?}, sum {:.15}", k.iter().sum::<f64>());

    let mut point = Raster::filled(64, 64, 1, 0.0);
    for x in 0..64 {
        point.set(10, x, 0, 1.0);
    }
    let mp = MultipathParams {
        paths: vec![EchoPath { delay: 5, attenuation: 0.4 }, EchoPath { delay: 12, attenuation: 0.2 }],
    };
    let echoed = apply_multipath(&point, &mp, RangeAxis::Rows)?;
    let ac = range_autocorrelation(&echoed, RangeAxis::Rows, 14);
    let peaks: Vec<usize> = (1..14).filter(|&l| ac[l] > ac[l - 1] && ac[l] > ac[l + 1]).collect();
    println!("multipath delays 5 and 12, autocorrelation peaks at lags {peaks:?}");

    let scene = render_scene(&SceneSpec::sample(ObjectClass::Ship, 128, 128, (10.0, 10.0), 3))?;
    for name in ["none", "light", "default", "heavy"] {
        let noisy = NoiseProfile::by_name(name)?.apply(&scene.image, 9)?;
        println!(
            "profile {name:<8} PSNR {:>7.2} dB  SSIM {:.4}",
            psnr(&noisy, &scene.image)?,
            ssim(&noisy, &scene.image)?
        );
    }
    Ok(())
}
