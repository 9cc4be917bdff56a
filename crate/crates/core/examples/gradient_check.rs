//! Finite-difference verification of the fusion objective (cross-entropy
//! plus attention entropy, through the attention normalization) and of the
//! region-masked reconstruction loss.
//!
//! `cargo run --release --example gradient_check`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonar_fusion::denoise::{region_masked_loss, LossWeights, RegionMask};
use sonar_fusion::fusion::{AttentionMode, FusionDims, FusionModel};
use sonar_fusion::imaging::Raster;
use sonar_fusion::nn::{finite_difference_check, Parameters};

fn main() -> sonar_fusion::Result<()> {
    let dims = FusionDims {
        feature_dim: 6,
        hidden_dim: 5,
        attention_dim: 4,
        classes: 3,
    };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = FusionModel::init(dims, -0.01, AttentionMode::Adaptive, &mut rng);
        let f1: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f2: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target = rng.random_range(0..3);
        let mut grads = model.zeros_like();
        model.value_and_grad(&f1, &f2, target, &mut grads)?;
        let mut probe = model.clone();
        let report = finite_difference_check(
            |p| {
                probe.assign_flat(p);
                let mut g = probe.zeros_like();
                probe.value_and_grad(&f1, &f2, target, &mut g).expect("valid shapes").0.value
            },
            &model.flatten(),
            &grads.flatten(),
            1e-5,
        );
        println!(
            "fusion model {seed}: {} params, max relative error {:.2e}, passed {}",
            report.checked, report.max_relative_error, report.passed
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (h, w) = (6, 7);
    let mut rand_raster = || Raster::from_fn(h, w, 1, |_, _, _| rng.random_range(0.0..1.0));
    let (out, reference, soft) = (rand_raster()?, rand_raster()?, rand_raster()?);
    let mask = RegionMask::from_raster(&soft)?;
    let weights = LossWeights {
        lambda3: 0.5,
        ..Default::default()
    };
    let (_, grad) = region_masked_loss(&out, &reference, &mask, &weights)?;
    let report = finite_difference_check(
        |p| {
            let r = Raster::new(h, w, 1, p.to_vec()).expect("same size");
            region_masked_loss(&r, &reference, &mask, &weights).expect("same size").0
        },
        out.data(),
        grad.data(),
        1e-5,
    );
    println!(
        "region-masked loss: max relative error {:.2e}, passed {}",
        report.max_relative_error, report.passed
    );
    Ok(())
}
