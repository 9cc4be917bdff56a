//! Context-adaptive fusion of a combined (highlight and shadow) stream with a
//! shadow-only stream, followed by a softmax classifier.

pub mod benchmark;
pub mod features;
pub mod model;
pub mod train;

pub use benchmark::{benchmark_samples, run_ablation, AblationReport, BenchmarkConfig};
pub use features::{extract_features, shape_statistics, FeatureScaler, StreamFeatures, FEATURE_DIM};
pub use model::{
    fuse, fuse_and_classify, normalized_attention, total_loss, AttentionMode, FusionDims,
    FusionForward, FusionModel, TotalLoss,
};
pub use train::{
    train_fusion, train_on_samples, EvalReport, FusionClassifier, ImageEval, LabeledSample,
    MaskSource, TrainConfig, TrainHistory,
};
