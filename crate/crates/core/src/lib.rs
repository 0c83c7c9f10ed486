//! Preprocessing and evaluation toolkit for neuritic-plaque segmentation.
//!
//! * [`raster`] – planar images, optical density and lαβ transforms, convolution.
//! * [`stain`] – Reinhard, Macenko, Vahadane (SNMF) and color-deconvolution
//!   stain normalization.
//! * [`enhance`] – green-channel low-pass + directional Laplacian enhancement.
//! * [`patch`] – XML annotations, mask rasterization, region-guided patch
//!   extraction, corner augmentation and subject-level splits.
//! * [`metrics`] – Dice, MASD, instance-level F1 and bootstrap intervals.
//! * [`cli`] – the batch front-end behind the `npseg` binary.

pub mod cli;
pub mod enhance;
mod error;
pub mod metrics;
pub mod patch;
pub mod raster;
mod serde_float;
pub mod stain;
mod stats;
pub mod synth;

pub use error::{Error, Result};
