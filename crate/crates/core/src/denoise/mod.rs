//! Region-aware denoising: a mask-weighted reconstruction loss, a trainable
//! patch denoiser, and a classical mask-guided smoothing baseline.

mod loss;
mod model;

pub use loss::{region_masked_loss, LossWeights, MaskPolarity, RegionMask, MASK_BLUR};
pub use model::{
    baseline_region_filter, sample_patches, train_on_patches, train_patch_denoiser, DenoiseDims,
    DenoiseModel, DenoisePair, DenoiseTrainConfig, TrainingPatch,
};
