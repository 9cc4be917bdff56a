//! Acceptance suite. Each test covers one criterion and prints a single
//! `[PASS]` / `[FAIL]` line to stderr (uncaptured) before asserting.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonar_fusion::cli;
use sonar_fusion::denoise::{
    baseline_region_filter, region_masked_loss, train_patch_denoiser, DenoisePair, DenoiseTrainConfig, LossWeights,
    RegionMask,
};
use sonar_fusion::fusion::{
    benchmark_samples, normalized_attention, run_ablation, AttentionMode, BenchmarkConfig, FusionDims, FusionModel,
    TrainConfig,
};
use sonar_fusion::imaging::{convolve_uniform, kmeans_1d, Raster};
use sonar_fusion::metrics::{iou, ssim};
use sonar_fusion::nn::{attention_entropy, finite_difference_check, Parameters};
use sonar_fusion::noise::{
    apply_backscatter, apply_multipath, apply_reverberation, range_autocorrelation, BackscatterParams, EchoPath,
    MultipathParams, RangeAxis, ReverbParams,
};
use sonar_fusion::scene::{render_slot, DatasetConfig};
use sonar_fusion::segmentation::{segment_shadows, SegmentationConfig};

fn report(criterion: u32, name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] criterion {criterion} ({name}): {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

#[test]
fn criterion_1_attention_normalization() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_sum, mut worst_scale, mut in_range) = (0.0f64, 0.0f64, true);
    for _ in 0..10_000 {
        let dims = FusionDims {
            feature_dim: rng.random_range(1..6),
            hidden_dim: rng.random_range(1..8),
            attention_dim: rng.random_range(1..8),
            classes: rng.random_range(2..5),
        };
        let model = FusionModel::init(dims, -0.01, AttentionMode::Adaptive, &mut rng);
        let h1: Vec<f64> = (0..dims.hidden_dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let h2: Vec<f64> = (0..dims.hidden_dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (alpha, beta) = model.attention_weights(&h1, &h2).unwrap();
        worst_sum = worst_sum.max((alpha + beta - 1.0).abs());
        in_range &= (0.0..=1.0).contains(&alpha) && (0.0..=1.0).contains(&beta);

        let abar = model.att1.forward(&h1);
        let bbar = model.att2.forward(&h2);
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled = normalized_attention(
            &abar.iter().map(|v| v * c).collect::<Vec<_>>(),
            &bbar.iter().map(|v| v * c).collect::<Vec<_>>(),
        );
        worst_scale = worst_scale.max((scaled.0 - alpha).abs()).max((scaled.1 - beta).abs());
    }
    let elapsed = t.elapsed();
    let passed = worst_sum <= 1e-12 && worst_scale <= 1e-12 && in_range && within(elapsed, 10);
    report(
        1,
        "attention normalization",
        passed,
        &format!("max |a+b-1| {worst_sum:.1e}, max scale drift {worst_scale:.1e}, in range {in_range}, {elapsed:.1?}"),
    );
    assert!(passed);
}

#[test]
fn criterion_2_gradient_correctness() {
    let t = Instant::now();
    let mut worst_fusion = 0.0f64;
    let mut worst_region = 0.0f64;
    let models = 24;
    for seed in 0..models {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let dims = FusionDims {
            feature_dim: rng.random_range(2..7),
            hidden_dim: rng.random_range(2..6),
            attention_dim: rng.random_range(1..5),
            classes: rng.random_range(2..5),
        };
        let lambda = if seed % 2 == 0 { -0.01 } else { 0.3 };
        let model = FusionModel::init(dims, lambda, AttentionMode::Adaptive, &mut rng);
        let f1: Vec<f64> = (0..dims.feature_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let f2: Vec<f64> = (0..dims.feature_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let target = rng.random_range(0..dims.classes);
        let mut grads = model.zeros_like();
        model.value_and_grad(&f1, &f2, target, &mut grads).unwrap();
        let mut probe = model.clone();
        let r = finite_difference_check(
            |p| {
                probe.assign_flat(p);
                let mut g = probe.zeros_like();
                probe.value_and_grad(&f1, &f2, target, &mut g).unwrap().0.value
            },
            &model.flatten(),
            &grads.flatten(),
            1e-5,
        );
        worst_fusion = worst_fusion.max(r.max_relative_error);

        let (h, w) = (rng.random_range(3..8), rng.random_range(3..8));
        let mut raster = || Raster::from_fn(h, w, 1, |_, _, _| rng.random_range(0.0..1.0)).unwrap();
        let (out, reference, soft) = (raster(), raster(), raster());
        let mask = RegionMask::from_raster(&soft).unwrap();
        let weights = LossWeights {
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: if seed % 3 == 0 { 0.0 } else { 0.25 },
            ..Default::default()
        };
        let (_, grad) = region_masked_loss(&out, &reference, &mask, &weights).unwrap();
        let r = finite_difference_check(
            |p| {
                let x = Raster::new(h, w, 1, p.to_vec()).unwrap();
                region_masked_loss(&x, &reference, &mask, &weights).unwrap().0
            },
            out.data(),
            grad.data(),
            1e-5,
        );
        worst_region = worst_region.max(r.max_relative_error);
    }
    let elapsed = t.elapsed();
    let passed = worst_fusion < 1e-5 && worst_region < 1e-5 && within(elapsed, 60);
    report(
        2,
        "gradient correctness",
        passed,
        &format!("{models} models, fusion max rel err {worst_fusion:.2e}, region loss {worst_region:.2e}, {elapsed:.1?}"),
    );
    assert!(passed);
}

#[test]
fn criterion_3_fusion_ordering() {
    let t = Instant::now();
    let bench = BenchmarkConfig::default();
    let cfg = TrainConfig::default();
    let (train, test) = benchmark_samples(&bench, &cfg).unwrap();
    assert_eq!((train.len(), test.len()), (1200, 300));
    let r = run_ablation(&bench.classes, &train, &test, &cfg).unwrap();
    let elapsed = t.elapsed();
    let passed = r.fused >= r.combined_only - 0.01
        && r.fused >= r.shadow_only - 0.01
        && r.fused >= r.shadow_only
        && within(elapsed, 600);
    report(
        3,
        "fusion ordering",
        passed,
        &format!(
            "fused {:.2}% (mean alpha {:.3}), combined-only {:.2}%, shadow-only {:.2}%, {elapsed:.1?}",
            100.0 * r.fused,
            r.fused_mean_alpha,
            100.0 * r.combined_only,
            100.0 * r.shadow_only
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_4_shadow_segmentation() {
    let t = Instant::now();
    let ds = DatasetConfig {
        count_per_class: 20,
        seed: 4,
        ..Default::default()
    };
    let cfg = SegmentationConfig::default();
    let (mut scores, mut noisy_scores) = (Vec::new(), Vec::new());
    for c in 0..ds.classes.len() {
        for i in 0..ds.count_per_class {
            let slot = render_slot(&ds, c, i).unwrap();
            let truth = &slot.record.shadow_mask;
            scores.push(iou(&segment_shadows(&slot.record.image, &cfg).unwrap(), truth).unwrap());
            if let Some(noisy) = &slot.noisy {
                noisy_scores.push(iou(&segment_shadows(noisy, &cfg).unwrap(), truth).unwrap());
            }
        }
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let noisy_mean = noisy_scores.iter().sum::<f64>() / noisy_scores.len().max(1) as f64;
    let uniform_ok = [0.0, 0.37, 1.0].iter().all(|&v| {
        let flat = Raster::filled(64, 64, 3, v);
        segment_shadows(&flat, &cfg).is_ok() && segment_shadows(&Raster::filled(64, 64, 1, v), &cfg).is_ok()
    });
    let elapsed = t.elapsed();
    let passed = scores.len() == 100 && mean >= 0.6 && uniform_ok && within(elapsed, 120);
    report(
        4,
        "shadow segmentation",
        passed,
        &format!(
            "mean IoU {mean:.4} over {} rendered scenes (default-noise copies, informational: {noisy_mean:.4}), uniform images ok {uniform_ok}, {elapsed:.1?}",
            scores.len()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_5_noise_statistics() {
    let t = Instant::now();
    let flat = Raster::filled(320, 320, 1, 0.5);
    let speckled = apply_backscatter(&flat, &BackscatterParams { looks: 4.0 }, 5).unwrap();
    let mean_err = (speckled.mean() - 0.5).abs() / 0.5;

    let reverb = ReverbParams { decay: 0.6, length: 4, mix: 0.35 };
    let kernel_err = (reverb.kernel().iter().sum::<f64>() - 1.0).abs();
    let constant = Raster::filled(40, 30, 1, 0.42);
    let reverbed = apply_reverberation(&constant, &reverb, RangeAxis::Rows).unwrap();
    let const_err = reverbed.data().iter().map(|v| (v - 0.42).abs()).fold(0.0, f64::max);

    let delays = [4usize, 11];
    let mp = MultipathParams {
        paths: delays.iter().map(|&delay| EchoPath { delay, attenuation: 0.3 }).collect(),
    };
    let mut point = Raster::filled(96, 16, 1, 0.0);
    for x in 0..16 {
        point.set(20, x, 0, 1.0);
    }
    let ac = range_autocorrelation(&apply_multipath(&point, &mp, RangeAxis::Rows).unwrap(), RangeAxis::Rows, 20);
    let peaks_ok = delays.iter().all(|&d| ac[d] > ac[d - 1] && ac[d] > ac[d + 1]);

    let elapsed = t.elapsed();
    let passed = mean_err <= 0.02 && kernel_err <= 1e-12 && const_err <= 1e-9 && peaks_ok && within(elapsed, 30);
    report(
        5,
        "noise statistics",
        passed,
        &format!(
            "speckle mean rel err {:.2}%, kernel sum err {kernel_err:.1e}, constant drift {const_err:.1e}, echo peaks at {delays:?} {peaks_ok}, {elapsed:.1?}",
            100.0 * mean_err
        ),
    );
    assert!(passed);
}

fn denoise_pairs(seed: u64, per_class: usize) -> Vec<DenoisePair> {
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
            let s = render_slot(&cfg, c, i).unwrap();
            out.push(DenoisePair {
                noisy: s.noisy.unwrap(),
                mask: RegionMask::from_scene_masks(&s.record.highlight_mask, &s.record.shadow_mask).unwrap(),
                clean: s.record.image,
            });
        }
    }
    out
}

fn masked_mse(a: &Raster, b: &Raster, m: &RegionMask) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let w = m.get(y, x);
            den += w;
            for c in 0..a.channels() {
                num += w * (a.get(y, x, c) - b.get(y, x, c)).powi(2);
            }
        }
    }
    num / (den * a.channels() as f64).max(1e-12)
}

#[test]
fn criterion_6_denoising_improvement() {
    let t = Instant::now();
    let train = denoise_pairs(1, 8);
    let test = denoise_pairs(2, 10);
    assert_eq!(test.len(), 50);
    let (model, _) = train_patch_denoiser(&train, &DenoiseTrainConfig::default()).unwrap();
    let (mut gain_model, mut gain_base, mut mse_base, mut mse_uniform) = (0.0, 0.0, 0.0, 0.0);
    for p in &test {
        let before = ssim(&p.noisy, &p.clean).unwrap();
        let denoised = model.denoise_image(&p.noisy).unwrap();
        let base = baseline_region_filter(&p.noisy, &p.mask, 7, 3).unwrap();
        let uniform = Raster::from_plane(&convolve_uniform(&p.noisy.channel_plane(0), 7).unwrap());
        gain_model += ssim(&denoised, &p.clean).unwrap() - before;
        gain_base += ssim(&base, &p.clean).unwrap() - before;
        mse_base += masked_mse(&base, &p.clean, &p.mask);
        mse_uniform += masked_mse(&uniform, &p.clean, &p.mask);
    }
    let n = test.len() as f64;
    let (gain_model, gain_base) = (gain_model / n, gain_base / n);
    let (mse_base, mse_uniform) = (mse_base / n, mse_uniform / n);
    let elapsed = t.elapsed();
    let passed = gain_model >= 0.05 && gain_base >= 0.05 && mse_base <= mse_uniform && within(elapsed, 300);
    report(
        6,
        "denoising improvement",
        passed,
        &format!(
            "SSIM gain denoiser {gain_model:.4}, region filter {gain_base:.4}; masked MSE region {mse_base:.5} vs uniform {mse_uniform:.5}, {elapsed:.1?}"
        ),
    );
    assert!(passed);
}

/// Minimum within-cluster sum of squares over every partition of the
/// sorted values into `k` contiguous non-empty groups.
fn brute_force_sse(sorted: &[f64], k: usize) -> f64 {
    fn sse(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum()
    }
    fn go(v: &[f64], k: usize) -> f64 {
        if k == 1 {
            return sse(v);
        }
        (1..=v.len() - (k - 1))
            .map(|cut| sse(&v[..cut]) + go(&v[cut..], k - 1))
            .fold(f64::INFINITY, f64::min)
    }
    go(sorted, k)
}

#[test]
fn criterion_7_oracle_equivalence() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut sets, mut mismatches) = (0, 0);
    for n in 1..=12 {
        for k in 1..=3 {
            for _ in 0..25 {
                let values: Vec<f64> = (0..n).map(|_| (rng.random_range(0..40) as f64) / 8.0).collect();
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                sorted.dedup();
                let k_eff = k.min(sorted.len());
                let mut all_sorted = values.clone();
                all_sorted.sort_by(f64::total_cmp);
                let optimum = brute_force_sse(&all_sorted, k_eff);
                let r = kmeans_1d(&values, k, 3).unwrap();
                let got: f64 = values.iter().zip(&r.assignment).map(|(v, &a)| (v - r.centroids[a]).powi(2)).sum();
                sets += 1;
                if (got - optimum).abs() > 1e-9 {
                    mismatches += 1;
                }
            }
        }
    }
    let half = attention_entropy(&[0.5, 0.5]).unwrap().0;
    let one_hot = attention_entropy(&[1.0, 0.0]).unwrap().0;
    let img = Raster::from_fn(40, 40, 3, |y, x, c| ((y * 13 + x * 7 + c * 5) % 17) as f64 / 16.0).unwrap();
    let self_ssim = ssim(&img, &img).unwrap();
    let elapsed = t.elapsed();
    let passed = mismatches == 0
        && (half - std::f64::consts::LN_2).abs() <= 1e-12
        && one_hot.abs() <= 1e-12
        && (self_ssim - 1.0).abs() <= 1e-12
        && within(elapsed, 10);
    report(
        7,
        "oracle equivalence",
        passed,
        &format!(
            "k-means optimal on {}/{sets} sets, H(0.5,0.5) err {:.1e}, H(one-hot) {one_hot:.1e}, SSIM(x,x)-1 {:.1e}, {elapsed:.1?}",
            sets - mismatches,
            (half - std::f64::consts::LN_2).abs(),
            self_ssim - 1.0
        ),
    );
    assert!(passed);
}

fn cli_ok(args: &[&str]) {
    let argv: Vec<String> = std::iter::once("sonar-fusion").chain(args.iter().copied()).map(String::from).collect();
    assert_eq!(cli::run(argv), 0, "command failed: {args:?}");
}

fn run_pipeline(root: &Path) {
    let p = |s: &str| root.join(s).display().to_string();
    cli_ok(&["gen-data", "--out", &p("train"), "--count", "40", "--size", "96", "--ppm", "10:14", "--noise", "none", "--seed", "21"]);
    cli_ok(&["add-noise", "--in", &p("train/manifest.json"), "--out", &p("train-noisy"), "--seed", "21"]);
    cli_ok(&["gen-data", "--out", &p("test"), "--count", "10", "--size", "96", "--ppm", "10:14", "--noise", "none", "--seed", "22"]);
    cli_ok(&["add-noise", "--in", &p("test/manifest.json"), "--out", &p("test-noisy"), "--seed", "21"]);
    cli_ok(&["segment", "--in", &p("train-noisy/manifest.json"), "--out", &p("seg"), "--seed", "21"]);
    cli_ok(&["train-fusion", "--manifest", &p("train-noisy/manifest.json"), "--out", &p("model/fusion.ssnn"), "--seed", "21", "--epochs", "30", "--ablations"]);
    cli_ok(&["eval-fusion", "--model", &p("model/fusion.ssnn"), "--manifest", &p("test-noisy/manifest.json"), "--out", &p("report.json"), "--csv", &p("report.csv")]);
}

/// Every file under `dir` except provenance records (which name the run's
/// own paths), as sorted `(relative path, bytes)`.
fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else if !path.to_string_lossy().ends_with("provenance.json") {
                let rel = path.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

#[test]
fn criterion_8_pipeline_determinism() {
    let t = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    let kinds = ["manifest.json", "_shadow.png", "_segmented.png", "fusion.ssnn", "fusion.json", "report.json"];
    let covered = kinds.iter().all(|k| names.iter().any(|n| n.ends_with(k)));
    let differing: Vec<&String> = ta.iter().zip(&tb).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    let passed = ta.len() == tb.len() && differing.is_empty() && covered;
    report(
        8,
        "pipeline determinism",
        passed,
        &format!(
            "{} artifacts compared, {} differ, all artifact kinds present {covered}, {:.1?}",
            ta.len(),
            differing.len(),
            t.elapsed()
        ),
    );
    assert!(passed, "differing artifacts: {differing:?}");
}
