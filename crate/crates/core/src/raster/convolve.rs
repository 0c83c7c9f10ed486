use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ColorSpace, PlanarImage};

/// Square convolution kernel of odd size, weights row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    size: usize,
    weights: Vec<f64>,
}

impl TryFrom<KernelRepr> for Kernel2D {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        Kernel2D::new(r.size, r.weights)
    }
}

impl From<Kernel2D> for KernelRepr {
    fn from(k: Kernel2D) -> Self {
        KernelRepr {
            size: k.size,
            weights: k.weights,
        }
    }
}

impl Kernel2D {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        if weights.len() != size * size {
            return Err(Error::InvalidParameter(format!(
                "{size}x{size} kernel needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("kernel weights must be finite".into()));
        }
        Ok(Kernel2D { size, weights })
    }

    /// The 3×3 directional Laplacian used by the enhancement pipeline.
    /// Weights sum to 4.
    pub fn directional_laplacian() -> Self {
        Kernel2D {
            size: 3,
            weights: vec![-1.0, -1.0, 1.0, -1.0, 8.0, -1.0, 1.0, -1.0, -1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Convolves a row-major real plane with `kernel`, replicating edge samples.
///
/// `out(y, x) = Σ k(i, j) · in(y − (i − r), x − (j − r))` with `r` the kernel
/// radius, so the kernel is flipped relative to correlation.
pub fn convolve_plane(width: usize, height: usize, data: &[f64], kernel: &Kernel2D) -> Vec<f64> {
    assert_eq!(data.len(), width * height, "plane size");
    if width == 0 || height == 0 {
        return Vec::new();
    }
    let k = kernel.size;
    let r = (k / 2) as isize;
    let mut out = vec![0.0; width * height];
    let (wi, hi) = (width as isize, height as isize);
    for y in 0..hi {
        let interior_y = y >= r && y < hi - r;
        for x in 0..wi {
            let interior = interior_y && x >= r && x < wi - r;
            let mut acc = 0.0;
            for i in 0..k {
                let sy = y - (i as isize - r);
                for j in 0..k {
                    let sx = x - (j as isize - r);
                    let idx = if interior {
                        (sy * wi + sx) as usize
                    } else {
                        (sy.clamp(0, hi - 1) * wi + sx.clamp(0, wi - 1)) as usize
                    };
                    acc += kernel.weights[i * k + j] * data[idx];
                }
            }
            out[(y * wi + x) as usize] = acc;
        }
    }
    out
}

/// Convolves a single-channel image; 8-bit inputs are widened, output is real.
pub fn convolve2d(img: &PlanarImage, kernel: &Kernel2D) -> Result<PlanarImage> {
    img.expect_space(ColorSpace::Gray)?;
    let data = img.plane_real(0).expect("gray image has one plane");
    let out = convolve_plane(img.width(), img.height(), &data, kernel);
    PlanarImage::gray_f64(img.width(), img.height(), out)
}
