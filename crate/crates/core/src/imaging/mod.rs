//! Raster containers and the low-level image primitives the segmentation
//! pipeline is built from.

pub mod color;
pub mod filter;
pub mod io;
pub mod kmeans;
mod mask;
pub mod morphology;
mod raster;

pub use color::{lab_to_lch, lab_to_rgb, rgb_to_lab};
pub use filter::{convolve_uniform, normalize_plane};
pub use kmeans::{kmeans_1d, KMeansResult};
pub use mask::ShadowMask;
pub use morphology::{morph_close, morph_open, StructuringElement};
pub use raster::{Plane, Raster};
