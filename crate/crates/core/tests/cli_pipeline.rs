use std::fs;
use std::path::Path;

use sonar_fusion::cli;
use sonar_fusion::imaging::io::{read_mask, write_raster};
use sonar_fusion::scene::{render_scene, DatasetManifest, ObjectClass, SceneSpec};

fn run(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("sonar-fusion").chain(args.iter().copied()).map(String::from).collect();
    cli::run(argv)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn segment_twice_gives_identical_masks() {
    let dir = tempfile::tempdir().unwrap();
    let scene = render_scene(&SceneSpec::new(ObjectClass::Ship, 3)).unwrap();
    let input = dir.path().join("scene.png");
    write_raster(&input, &scene.image).unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    assert_eq!(run(&["segment", "--in", &s(&input), "--out", &s(&a), "--seed", "7"]), 0);
    assert_eq!(run(&["segment", "--in", &s(&input), "--out", &s(&b), "--seed", "7"]), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(read_mask(&a).unwrap().count() > 0);
    let prov = fs::read_to_string(dir.path().join("a.png.provenance.json")).unwrap();
    assert!(prov.contains("\"seed\": 7"));
}

#[test]
fn empty_dataset_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty");
    assert_eq!(run(&["gen-data", "--out", &s(&out), "--count", "0"]), 0);
    let m = DatasetManifest::load(&out.join("manifest.json")).unwrap();
    assert!(m.entries.is_empty());
    assert!(out.join("provenance.json").is_file());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"count_per_class": 3, "image_height": 40, "image_width": 40, "seed": 5, "ppm_range": [5.0, 5.0]}"#)
        .unwrap();
    let out = dir.path().join("d");
    assert_eq!(run(&["gen-data", "--out", &s(&out), "--config", &s(&cfg), "--count", "1", "--noise", "none"]), 0);
    let m = DatasetManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.entries.len(), 5);
    assert_eq!(m.global_seed, 5);
    assert_eq!(m.config.image_height, 40);
    assert!(m.entries.iter().all(|e| e.noisy_image.is_none()));
}

#[test]
fn malformed_config_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(run(&["gen-data", "--out", &s(&dir.path().join("d")), "--config", &s(&cfg)]), 1);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "images", "masks"] {
        let d = dir.join(sub);
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                out.push((s(&p), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn noise_denoise_and_metrics_leave_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    assert_eq!(
        run(&["gen-data", "--out", &s(&clean), "--count", "2", "--size", "48", "--ppm", "5", "--noise", "none"]),
        0
    );
    let before = snapshot(&clean);
    let noisy = dir.path().join("noisy");
    assert_eq!(run(&["add-noise", "--in", &s(&clean.join("manifest.json")), "--out", &s(&noisy), "--seed", "4"]), 0);
    let m = DatasetManifest::load(&noisy.join("manifest.json")).unwrap();
    assert!(m.entries.iter().all(|e| e.noisy_image.is_some()));

    let model = dir.path().join("den.ssnn");
    assert_eq!(
        run(&["train-denoise", "--manifest", &s(&noisy.join("manifest.json")), "--out", &s(&model), "--epochs", "2", "--patches", "64"]),
        0
    );
    let den = dir.path().join("den");
    let base = dir.path().join("base");
    assert_eq!(run(&["denoise", "--in", &s(&noisy.join("manifest.json")), "--out", &s(&den), "--model", &s(&model)]), 0);
    assert_eq!(run(&["denoise", "--in", &s(&noisy.join("manifest.json")), "--out", &s(&base), "--baseline"]), 0);
    assert_eq!(run(&["denoise", "--in", &s(&noisy.join("manifest.json")), "--out", &s(&base)]), 1);

    let report = dir.path().join("q.json");
    let csv = dir.path().join("q.csv");
    assert_eq!(
        run(&[
            "metrics", "--reference", &s(&noisy.join("images")), "--candidate", &s(&base), "--method", "region",
            "--out", &s(&report), "--csv", &s(&csv),
        ]),
        0
    );
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);
    assert_eq!(snapshot(&clean), before);
}

#[test]
fn eval_rejects_wrong_checkpoint_kind() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert_eq!(run(&["gen-data", "--out", &s(&data), "--count", "2", "--size", "48", "--ppm", "5"]), 0);
    let manifest = s(&data.join("manifest.json"));
    let den = dir.path().join("den.ssnn");
    assert_eq!(run(&["train-denoise", "--manifest", &manifest, "--out", &s(&den), "--epochs", "1", "--patches", "16"]), 0);
    assert_eq!(run(&["eval-fusion", "--model", &s(&den), "--manifest", &manifest]), 2);
    assert_eq!(run(&["eval-fusion", "--model", &s(&dir.path().join("missing.ssnn")), "--manifest", &manifest]), 2);
}
