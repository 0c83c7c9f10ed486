//! Frequency-domain enhancement of the green channel.
//!
//! The green plane is low-passed with an ideal circular mask, convolved with
//! a directional Laplacian, band-thresholded into {0, 255} and appended to the
//! original RGB planes as a fourth channel.

mod spectrum;

pub use spectrum::{
    dft2, idft2, low_pass_filter, low_pass_mask, Spectrum, NON_REAL_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    convolve_plane, merge_channels, split_channels, ColorSpace, Kernel2D, PlanarImage,
};

pub const DEFAULT_T_LOW: f64 = 20.0;
pub const DEFAULT_T_HIGH: f64 = 255.0;

/// Default cutoff for a `width`×`height` image: a quarter of the short side.
pub fn default_cutoff(width: usize, height: usize) -> f64 {
    width.min(height) as f64 / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhanceParams {
    /// Radius of the ideal low-pass mask, in integer bin offsets from DC.
    pub cutoff: f64,
    #[serde(with = "crate::serde_float")]
    pub t_low: f64,
    #[serde(with = "crate::serde_float")]
    pub t_high: f64,
    #[serde(default = "Kernel2D::directional_laplacian")]
    pub kernel: Kernel2D,
}

impl EnhanceParams {
    pub fn new(cutoff: f64, t_low: f64, t_high: f64) -> Result<Self> {
        let p = EnhanceParams {
            cutoff,
            t_low,
            t_high,
            kernel: Kernel2D::directional_laplacian(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for an image of the given size.
    pub fn for_size(width: usize, height: usize) -> Self {
        EnhanceParams {
            cutoff: default_cutoff(width, height),
            t_low: DEFAULT_T_LOW,
            t_high: DEFAULT_T_HIGH,
            kernel: Kernel2D::directional_laplacian(),
        }
    }

    pub fn with_kernel(mut self, kernel: Kernel2D) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive and finite, got {}",
                self.cutoff
            )));
        }
        if self.t_low.is_nan() || self.t_high.is_nan() || self.t_low > self.t_high {
            return Err(Error::InvalidParameter(format!(
                "threshold band [{}, {}] is empty",
                self.t_low, self.t_high
            )));
        }
        Ok(())
    }
}

/// Every intermediate of the enhancement of one channel.
#[derive(Debug, Clone)]
pub struct EnhanceStages {
    pub width: usize,
    pub height: usize,
    pub spectrum: Spectrum,
    pub filtered: Spectrum,
    /// Low-passed plane back in image space.
    pub smoothed: Vec<f64>,
    /// Kernel response, kept real until thresholding.
    pub response: Vec<f64>,
    pub binary: Vec<u8>,
}

/// Maps samples inside `[t_low, t_high]` to 255 and everything else to 0.
pub fn threshold_band(values: &[f64], t_low: f64, t_high: f64) -> Vec<u8> {
    values
        .iter()
        .map(|&v| if v >= t_low && v <= t_high { 255 } else { 0 })
        .collect()
}

pub fn enhance_stages(gray: &PlanarImage, p: &EnhanceParams) -> Result<EnhanceStages> {
    p.validate()?;
    let spectrum = dft2(gray)?;
    let filtered = low_pass_filter(&spectrum, p.cutoff)?;
    let smoothed = spectrum::idft2_plane(&filtered)?;
    let (w, h) = (gray.width(), gray.height());
    let response = convolve_plane(w, h, &smoothed, &p.kernel);
    let binary = threshold_band(&response, p.t_low, p.t_high);
    Ok(EnhanceStages {
        width: w,
        height: h,
        spectrum,
        filtered,
        smoothed,
        response,
        binary,
    })
}

/// Binary enhancement plane of a single-channel image.
pub fn enhance_channel(gray: &PlanarImage, p: &EnhanceParams) -> Result<PlanarImage> {
    let stages = enhance_stages(gray, p)?;
    PlanarImage::gray_u8(stages.width, stages.height, stages.binary)
}

/// Appends the enhanced green plane to the untouched RGB planes.
pub fn enhance_image(img: &PlanarImage, p: &EnhanceParams) -> Result<PlanarImage> {
    let [r, g, b] = split_channels(img)?;
    let t = enhance_channel(&g, p)?;
    merge_channels(&[r, g, b, t], ColorSpace::RgbaEnhanced)
}
