//! Trains the adaptive fusion classifier and its two single-stream
//! ablations on the synthetic benchmark and prints test accuracies.
//!
//! `cargo run --release --example fusion_benchmark [train_per_class] [epochs]`

use std::time::Instant;

use sonar_fusion::fusion::{benchmark_samples, run_ablation, BenchmarkConfig, TrainConfig};

fn main() -> sonar_fusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut bench = BenchmarkConfig::default();
    if let Some(n) = args.first() {
        bench.train_per_class = n.parse().expect("train_per_class must be an integer");
    }
    let mut cfg = TrainConfig::default();
    if let Some(e) = args.get(1) {
        cfg.epochs = e.parse().expect("epochs must be an integer");
    }

    let t = Instant::now();
    let (train, test) = benchmark_samples(&bench, &cfg)?;
    println!("rendered {} train / {} test scenes in {:.1?}", train.len(), test.len(), t.elapsed());

    let t = Instant::now();
    let r = run_ablation(&bench.classes, &train, &test, &cfg)?;
    println!("trained three models in {:.1?}", t.elapsed());
    println!("fused          {:.2}%  (mean alpha {:.3})", 100.0 * r.fused, r.fused_mean_alpha);
    println!("combined only  {:.2}%", 100.0 * r.combined_only);
    println!("shadow only    {:.2}%", 100.0 * r.shadow_only);
    Ok(())
}
