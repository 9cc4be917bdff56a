//! Context-adaptive analysis of side-scan sonar imagery.
//!
//! The crate covers the whole loop from synthetic data to evaluation:
//!
//! - [`imaging`]: rasters, colour transforms, smoothing, 1-D k-means and
//!   binary morphology.
//! - [`segmentation`]: spectral-ratio shadow segmentation.
//! - [`noise`]: multipath, backscatter and reverberation corruptions.
//! - [`scene`]: procedural ship / plane / mine scenes with exact masks, and
//!   dataset manifests.
//! - [`nn`]: dense layers with hand-written gradients, SE gating, Adam and a
//!   finite-difference checker.
//! - [`fusion`]: the dual-stream attention-fusion classifier.
//! - [`denoise`]: mask-weighted reconstruction losses, a patch denoiser and
//!   a classical region filter.
//! - [`metrics`]: PSNR, SSIM, IoU and classification summaries.
//!
//! - [`cli`]: the `sonar-fusion` binary's subcommands.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod denoise;
pub mod error;
pub mod fusion;
pub mod imaging;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod scene;
pub mod segmentation;
pub mod seed;

pub use error::{Error, Result};
