//! The `sonar-fusion` command line: one subcommand per pipeline stage.
//!
//! Every subcommand accepts `--config FILE` holding the JSON form of the
//! relevant module config; explicit flags override it. Each run writes a
//! provenance record (effective config, seed, tool version, inputs) beside
//! its output. Exit codes: 0 success, 1 usage or domain error, 2 I/O or
//! format error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::denoise::{
    baseline_region_filter, train_patch_denoiser, DenoiseModel, DenoisePair, DenoiseTrainConfig, RegionMask,
};
use crate::error::{Error, Result};
use crate::fusion::{train_fusion, AttentionMode, EvalReport, FusionClassifier, TrainConfig};
use crate::imaging::io::{atomic_write, read_mask, read_raster, write_mask, write_raster};
use crate::metrics::{iou, QualityReport};
use crate::noise::NoiseProfile;
use crate::scene::{generate_dataset, DatasetConfig, DatasetManifest, ManifestEntry, ObjectClass, MANIFEST_FILE};
use crate::seed::derive_seed;
use crate::segmentation::{segment_shadows, SegmentationConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "sonar-fusion", version, about = "Side-scan sonar segmentation, fusion classification and denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a labeled synthetic dataset with exact masks.
    GenData(GenDataArgs),
    /// Corrupt an image, or every clean image of a dataset.
    AddNoise(AddNoiseArgs),
    /// Segment acoustic shadows in an image or a dataset.
    Segment(SegmentArgs),
    /// Train the attention-fusion classifier on a dataset.
    TrainFusion(TrainFusionArgs),
    /// Evaluate a fusion checkpoint (and any ablation siblings) on a dataset.
    EvalFusion(EvalFusionArgs),
    /// Train the patch denoiser on a noisy dataset.
    TrainDenoise(TrainDenoiseArgs),
    /// Denoise an image or a dataset with a trained model or the region filter.
    Denoise(DenoiseArgs),
    /// PSNR / SSIM (and optional IoU) between candidate and reference files.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Output directory; receives manifest.json, images/, masks/ and noisy/.
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
    /// JSON dataset config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenes per class.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Square image side in pixels.
    #[arg(long)]
    size: Option<usize>,
    /// Noise profile: none, light, default or heavy.
    #[arg(long)]
    noise: Option<String>,
    /// Pixels per metre, `a` or `a:b`.
    #[arg(long)]
    ppm: Option<String>,
    /// Comma-separated class names.
    #[arg(long)]
    classes: Option<String>,
}

#[derive(Debug, Args)]
struct AddNoiseArgs {
    /// An image, or a dataset manifest (.json).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output image, or output dataset directory for a manifest input.
    #[arg(long)]
    out: PathBuf,
    /// JSON noise profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named profile: none, light, default or heavy.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// An image, or a dataset manifest (.json).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output mask image, or output directory for a manifest input.
    #[arg(long, default_value = "mask.png")]
    out: PathBuf,
    /// JSON segmentation config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    /// high-ratio or low-ratio.
    #[arg(long)]
    polarity: Option<String>,
}

#[derive(Debug, Args)]
struct TrainFusionArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint path; a `.json` sidecar is written next to it.
    #[arg(long, default_value = "fusion.ssnn")]
    out: PathBuf,
    /// JSON training config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// adaptive, combined-only or shadow-only.
    #[arg(long)]
    mode: Option<String>,
    /// ground-truth or segmented.
    #[arg(long)]
    mask_source: Option<String>,
    /// Also train the combined-only and shadow-only ablations.
    #[arg(long)]
    ablations: bool,
}

#[derive(Debug, Args)]
struct EvalFusionArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// JSON report path.
    #[arg(long, default_value = "fusion_report.json")]
    out: PathBuf,
    /// Optional per-image CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainDenoiseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "denoiser.ssnn")]
    out: PathBuf,
    /// JSON denoiser training config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patches: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    /// outside-critical or inside-critical.
    #[arg(long)]
    polarity: Option<String>,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// A noisy image, or a dataset manifest (.json).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output image, or output directory for a manifest input.
    #[arg(long)]
    out: PathBuf,
    /// Trained denoiser checkpoint.
    #[arg(long, conflicts_with = "baseline")]
    model: Option<PathBuf>,
    /// Use the region-aware mean filter instead of a model.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value_t = 7)]
    strong: usize,
    #[arg(long, default_value_t = 3)]
    weak: usize,
    /// Soft region mask image for the baseline on a single image.
    #[arg(long)]
    mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Reference image or directory.
    #[arg(long)]
    reference: PathBuf,
    /// Candidate image or directory; directories are paired by file name.
    #[arg(long)]
    candidate: PathBuf,
    /// Method label written into the report.
    #[arg(long, default_value = "candidate")]
    method: String,
    /// Reference mask image or directory, for IoU.
    #[arg(long, requires = "candidate_mask")]
    reference_mask: Option<PathBuf>,
    /// Candidate mask image or directory, for IoU.
    #[arg(long, requires = "reference_mask")]
    candidate_mask: Option<PathBuf>,
    #[arg(long, default_value = "metrics.json")]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_domain() {
        1
    } else {
        2
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::AddNoise(a) => add_noise(a),
        Command::Segment(a) => segment(a),
        Command::TrainFusion(a) => train_fusion_cmd(a),
        Command::EvalFusion(a) => eval_fusion(a),
        Command::TrainDenoise(a) => train_denoise(a),
        Command::Denoise(a) => denoise(a),
        Command::Metrics(a) => metrics(a),
    }
}

#[derive(Serialize)]
struct Provenance<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed: u64,
    inputs: Vec<String>,
    config: &'a C,
}

/// `dir/provenance.json` for directory outputs, `file.provenance.json`
/// otherwise.
fn provenance_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("provenance.json")
    } else {
        let mut name = out.file_name().map(OsString::from).unwrap_or_default();
        name.push(".provenance.json");
        out.with_file_name(name)
    }
}

fn write_provenance<C: Serialize>(
    out: &Path,
    is_dir: bool,
    subcommand: &'static str,
    seed: u64,
    inputs: &[&Path],
    config: &C,
) -> Result<()> {
    let p = Provenance {
        tool: "sonar-fusion",
        version: VERSION,
        subcommand,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        config,
    };
    write_json(&provenance_path(out, is_dir), &p)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, (serde_json::to_string_pretty(value)? + "\n").as_bytes())
}

fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::domain(format!("config {}: {e}", p.display())))
        }
    }
}

/// Parses a kebab-case enum value through its serde representation.
fn parse_choice<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::domain(format!("invalid value `{value}` for --{flag}")))
}

fn parse_ppm(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::domain(format!("invalid --ppm `{s}` (expected `a` or `a:b`)"));
    let (a, b) = match s.split_once(':') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => {
            let v: f64 = s.parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if !(a > 0.0 && b >= a) {
        return Err(bad());
    }
    Ok((a, b))
}

fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        ))
    }
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    require_file(path)?;
    DatasetManifest::load(path)
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut cfg: DatasetConfig = load_config(a.config.as_deref())?;
    if let Some(n) = a.count {
        cfg.count_per_class = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.size {
        cfg.image_height = s;
        cfg.image_width = s;
    }
    if let Some(n) = &a.noise {
        cfg.noise = NoiseProfile::by_name(n)?;
    }
    if let Some(p) = &a.ppm {
        cfg.ppm_range = parse_ppm(p)?;
    }
    if let Some(list) = &a.classes {
        cfg.classes = list.split(',').map(|s| ObjectClass::parse(s.trim())).collect::<Result<_>>()?;
    }
    let m = generate_dataset(&cfg, &a.out)?;
    info!("wrote {} entries to {}", m.entries.len(), a.out.display());
    write_provenance(&a.out, true, "gen-data", cfg.seed, &[], &cfg)
}

fn copy_file(from: &Path, to: &Path) -> Result<()> {
    let bytes = fs::read(from).map_err(|e| Error::io(from, e))?;
    atomic_write(to, &bytes)
}

fn add_noise(a: AddNoiseArgs) -> Result<()> {
    let mut profile: NoiseProfile = match &a.config {
        Some(_) => load_config(a.config.as_deref())?,
        None => NoiseProfile::standard(),
    };
    if let Some(name) = &a.profile {
        profile = NoiseProfile::by_name(name)?;
    }
    if !is_manifest(&a.input) {
        require_file(&a.input)?;
        let img = read_raster(&a.input)?;
        write_raster(&a.out, &profile.apply(&img, a.seed)?)?;
        return write_provenance(&a.out, false, "add-noise", a.seed, &[&a.input], &profile);
    }

    let src = load_manifest(&a.input)?;
    let mut out = src.clone();
    out.base_dir = a.out.clone();
    out.config.noise = profile.clone();
    for e in &mut out.entries {
        for rel in [&e.image, &e.highlight_mask, &e.shadow_mask] {
            copy_file(&src.resolve(rel), &a.out.join(rel))?;
        }
        let clean = src.load_clean(e)?;
        if profile.is_identity() {
            e.noisy_image = None;
            e.noise_seed = None;
            continue;
        }
        let seed = derive_seed(e.spec.seed, a.seed);
        let rel = format!("noisy/{}.png", e.id);
        write_raster(&a.out.join(&rel), &profile.apply(&clean, seed)?)?;
        e.noisy_image = Some(rel);
        e.noise_seed = Some(seed);
    }
    out.save(&a.out.join(MANIFEST_FILE))?;
    info!("noised {} entries into {}", out.entries.len(), a.out.display());
    write_provenance(&a.out, true, "add-noise", a.seed, &[&a.input], &profile)
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentationReport {
    mean_iou: f64,
    per_image: Vec<SegmentedEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentedEntry {
    id: String,
    mask: String,
    iou: f64,
}

fn segment(a: SegmentArgs) -> Result<()> {
    let mut cfg: SegmentationConfig = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(k) = a.kernel {
        cfg.kernel_size = k;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(r) = a.radius {
        cfg.disk_radius = r;
    }
    if let Some(p) = &a.polarity {
        cfg.polarity = parse_choice("polarity", p)?;
    }
    cfg.validate()?;

    if !is_manifest(&a.input) {
        require_file(&a.input)?;
        let mask = segment_shadows(&read_raster(&a.input)?, &cfg)?;
        write_mask(&a.out, &mask)?;
        return write_provenance(&a.out, false, "segment", cfg.seed, &[&a.input], &cfg);
    }

    let m = load_manifest(&a.input)?;
    let mut per_image = Vec::with_capacity(m.entries.len());
    for e in &m.entries {
        let mask = segment_shadows(&m.load_input(e)?, &cfg)?;
        let rel = format!("masks/{}_segmented.png", e.id);
        write_mask(&a.out.join(&rel), &mask)?;
        per_image.push(SegmentedEntry {
            id: e.id.clone(),
            mask: rel,
            iou: iou(&mask, &m.load_shadow_mask(e)?)?,
        });
    }
    let mean_iou = per_image.iter().map(|r| r.iou).sum::<f64>() / per_image.len().max(1) as f64;
    info!("segmented {} images, mean IoU {mean_iou:.4}", per_image.len());
    write_json(&a.out.join("segmentation.json"), &SegmentationReport { mean_iou, per_image })?;
    write_provenance(&a.out, true, "segment", cfg.seed, &[&a.input], &cfg)
}

/// Sibling checkpoint path for an ablation: `fusion.ssnn` becomes
/// `fusion.shadow-only.ssnn`.
fn ablation_path(model: &Path, mode: AttentionMode) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = model.extension().map(|s| s.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}.{}.{ext}", mode.name()),
        None => format!("{stem}.{}", mode.name()),
    };
    model.with_file_name(name)
}

const ABLATIONS: [AttentionMode; 2] = [AttentionMode::CombinedOnly, AttentionMode::ShadowOnly];

fn train_fusion_cmd(a: TrainFusionArgs) -> Result<()> {
    let mut cfg: TrainConfig = load_config(a.config.as_deref())?;
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = &a.mode {
        cfg.mode = AttentionMode::parse(v)?;
    }
    if let Some(v) = &a.mask_source {
        cfg.mask_source = parse_choice("mask-source", v)?;
    }
    cfg.validate()?;
    let m = load_manifest(&a.manifest)?;

    let (clf, history) = train_fusion(&m, &cfg)?;
    clf.save(&a.out)?;
    let mut hist_name = a.out.file_name().map(OsString::from).unwrap_or_default();
    hist_name.push(".history.json");
    write_json(&a.out.with_file_name(hist_name), &history)?;
    if a.ablations {
        for mode in ABLATIONS {
            let c = TrainConfig { mode, ..cfg.clone() };
            let (abl, _) = train_fusion(&m, &c)?;
            abl.save(&ablation_path(&a.out, mode))?;
        }
    }
    write_provenance(&a.out, false, "train-fusion", cfg.seed, &[&a.manifest], &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FusionEvalOutput {
    pub report: EvalReport,
    /// Test accuracies of the ablation checkpoints found beside the model.
    pub ablations: Vec<AblationScore>,
    /// Fused accuracy is at least every ablation minus one point and at
    /// least the shadow-only ablation; absent without ablations.
    pub ordering_holds: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AblationScore {
    pub mode: AttentionMode,
    pub accuracy: f64,
}

fn eval_fusion(a: EvalFusionArgs) -> Result<()> {
    require_file(&a.model)?;
    let clf = FusionClassifier::load(&a.model)?;
    let m = load_manifest(&a.manifest)?;
    let report = clf.evaluate(&m)?;
    let mut ablations = Vec::new();
    for mode in ABLATIONS {
        let p = ablation_path(&a.model, mode);
        if p.is_file() {
            let accuracy = FusionClassifier::load(&p)?.evaluate(&m)?.accuracy;
            ablations.push(AblationScore { mode, accuracy });
        }
    }
    let ordering_holds = (!ablations.is_empty()).then(|| {
        ablations.iter().all(|s| {
            report.accuracy >= s.accuracy - 0.01
                && (s.mode != AttentionMode::ShadowOnly || report.accuracy >= s.accuracy)
        })
    });
    info!("accuracy {:.4}, mean alpha {:.3}", report.accuracy, report.mean_alpha);
    if let Some(csv) = &a.csv {
        atomic_write(csv, report.to_csv().as_bytes())?;
    }
    let out = FusionEvalOutput {
        report,
        ablations,
        ordering_holds,
    };
    write_json(&a.out, &out)?;
    write_provenance(&a.out, false, "eval-fusion", clf.config.seed, &[&a.model, &a.manifest], &clf.config)
}

fn region_mask(m: &DatasetManifest, e: &ManifestEntry) -> Result<RegionMask> {
    RegionMask::from_scene_masks(&m.load_highlight_mask(e)?, &m.load_shadow_mask(e)?)
}

fn train_denoise(a: TrainDenoiseArgs) -> Result<()> {
    let mut cfg: DenoiseTrainConfig = load_config(a.config.as_deref())?;
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.patches {
        cfg.patches = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.lambda1 {
        cfg.weights.lambda1 = v;
    }
    if let Some(v) = a.lambda2 {
        cfg.weights.lambda2 = v;
    }
    if let Some(v) = a.lambda3 {
        cfg.weights.lambda3 = v;
    }
    if let Some(v) = &a.polarity {
        cfg.weights.polarity = parse_choice("polarity", v)?;
    }
    let m = load_manifest(&a.manifest)?;
    let mut pairs = Vec::with_capacity(m.entries.len());
    for e in &m.entries {
        if e.noisy_image.is_none() {
            return Err(Error::domain(format!("entry {} has no noisy image; run add-noise first", e.id)));
        }
        pairs.push(DenoisePair {
            noisy: m.load_input(e)?,
            clean: m.load_clean(e)?,
            mask: region_mask(&m, e)?,
        });
    }
    let (model, history) = train_patch_denoiser(&pairs, &cfg)?;
    model.save(&a.out, &cfg)?;
    let mut hist_name = a.out.file_name().map(OsString::from).unwrap_or_default();
    hist_name.push(".history.json");
    write_json(&a.out.with_file_name(hist_name), &history)?;
    write_provenance(&a.out, false, "train-denoise", cfg.seed, &[&a.manifest], &cfg)
}

#[derive(Debug, Serialize)]
struct DenoiseRun {
    method: String,
    model: Option<String>,
    strong: usize,
    weak: usize,
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let model = match (&a.model, a.baseline) {
        (Some(p), false) => {
            require_file(p)?;
            Some(DenoiseModel::load(p)?.0)
        }
        (None, true) => None,
        _ => return Err(Error::domain("pass exactly one of --model or --baseline")),
    };
    let run = DenoiseRun {
        method: if model.is_some() { "patch-denoiser" } else { "region-baseline" }.into(),
        model: a.model.as_ref().map(|p| p.display().to_string()),
        strong: a.strong,
        weak: a.weak,
    };
    let apply = |img: &crate::imaging::Raster, mask: Option<&RegionMask>| match &model {
        Some(m) => m.denoise_image(img),
        None => {
            let mask = mask.ok_or_else(|| Error::domain("the baseline needs a region mask (--mask)"))?;
            baseline_region_filter(img, mask, a.strong, a.weak)
        }
    };

    if !is_manifest(&a.input) {
        require_file(&a.input)?;
        let img = read_raster(&a.input)?;
        let mask = match &a.mask {
            Some(p) => {
                require_file(p)?;
                Some(RegionMask::from_raster(&read_raster(p)?)?)
            }
            None => None,
        };
        write_raster(&a.out, &apply(&img, mask.as_ref())?)?;
        return write_provenance(&a.out, false, "denoise", 0, &[&a.input], &run);
    }

    let m = load_manifest(&a.input)?;
    for e in &m.entries {
        let mask = if model.is_none() { Some(region_mask(&m, e)?) } else { None };
        let out = apply(&m.load_input(e)?, mask.as_ref())?;
        write_raster(&a.out.join(format!("{}.png", e.id)), &out)?;
    }
    info!("denoised {} images into {}", m.entries.len(), a.out.display());
    write_provenance(&a.out, true, "denoise", 0, &[&a.input], &run)
}

/// `(id, reference, candidate)` triples: a single pair, or files of the
/// candidate directory that also exist in the reference directory.
fn pairs_for(reference: &Path, candidate: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if !candidate.is_dir() {
        require_file(reference)?;
        require_file(candidate)?;
        let id = candidate.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(id, reference.to_path_buf(), candidate.to_path_buf())]);
    }
    let mut names: Vec<PathBuf> = fs::read_dir(candidate)
        .map_err(|e| Error::io(candidate, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| ["png", "pgm", "ppm"].contains(&&*x.to_string_lossy())))
        .collect();
    names.sort();
    Ok(names
        .into_iter()
        .filter_map(|c| {
            let r = reference.join(c.file_name()?);
            let id = c.file_stem()?.to_string_lossy().into_owned();
            r.is_file().then_some((id, r, c))
        })
        .collect())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let pairs = pairs_for(&a.reference, &a.candidate)?;
    let masks = match (&a.reference_mask, &a.candidate_mask) {
        (Some(r), Some(c)) => Some(pairs_for(r, c)?),
        _ => None,
    };
    let mut reports = Vec::with_capacity(pairs.len());
    for (id, r, c) in &pairs {
        let mut q = QualityReport::compute(&a.method, id, &read_raster(c)?, &read_raster(r)?)?;
        if let Some(ms) = &masks {
            if let Some((_, mr, mc)) = ms.iter().find(|(mid, _, _)| mid == id) {
                q.iou = Some(iou(&read_mask(mc)?, &read_mask(mr)?)?);
            }
        }
        reports.push(q);
    }
    write_json(&a.out, &reports)?;
    if let Some(csv) = &a.csv {
        let mut s = String::from(QualityReport::csv_header()) + "\n";
        for q in &reports {
            s += &q.csv_row();
            s.push('\n');
        }
        atomic_write(csv, s.as_bytes())?;
    }
    write_provenance(&a.out, false, "metrics", 0, &[&a.reference, &a.candidate], &a.method)
}
