use crate::error::{Error, Result};
use crate::raster::{od_to_intensity, ColorSpace, PlanarImage};
use crate::stain::{dot3, od_pixels, ConcentrationMap, StainMatrix, SINGULAR_ANGLE_RAD};

fn check_rank(stains: &StainMatrix) -> Result<()> {
    let angle = stains.separation();
    if angle < SINGULAR_ANGLE_RAD {
        return Err(Error::SingularBasis { angle_rad: angle });
    }
    Ok(())
}

/// Exact two-variable non-negative least squares against a fixed basis.
pub(crate) struct Nnls2 {
    w: [[f64; 3]; 2],
    g01: f64,
    det: f64,
}

impl Nnls2 {
    pub(crate) fn new(stains: &StainMatrix) -> Self {
        let w = stains.columns();
        let g01 = dot3(w[0], w[1]);
        Nnls2 {
            w,
            g01,
            det: 1.0 - g01 * g01,
        }
    }

    /// Solves `min ‖b − W c‖²` subject to `c ≥ 0` (unit-norm columns).
    pub(crate) fn solve(&self, b: [f64; 3]) -> [f64; 2] {
        let r0 = dot3(self.w[0], b);
        let r1 = dot3(self.w[1], b);
        let c0 = (r0 - self.g01 * r1) / self.det;
        let c1 = (r1 - self.g01 * r0) / self.det;
        if c0 >= 0.0 && c1 >= 0.0 {
            return [c0, c1];
        }
        // One constraint is active; compare the two single-stain fits.
        // Objective up to the constant ‖b‖²: −2 cᵀr + cᵀGc = −c² for a lone column.
        let a0 = r0.max(0.0);
        let a1 = r1.max(0.0);
        if a0 * a0 >= a1 * a1 {
            [a0, 0.0]
        } else {
            [0.0, a1]
        }
    }
}

/// Per-pixel non-negative least-squares unmixing of the image's OD.
pub fn deconvolve(
    img: &PlanarImage,
    stains: &StainMatrix,
    background_intensity: f64,
) -> Result<ConcentrationMap> {
    check_rank(stains)?;
    let od = od_pixels(img, background_intensity)?;
    let solver = Nnls2::new(stains);
    let values = od.iter().map(|b| solver.solve(*b)).collect();
    ConcentrationMap::new(img.width(), img.height(), values)
}

/// [`deconvolve`] on an optical-density image, skipping the 8-bit round trip.
pub fn deconvolve_od(od: &PlanarImage, stains: &StainMatrix) -> Result<ConcentrationMap> {
    od.expect_space(ColorSpace::OpticalDensity)?;
    check_rank(stains)?;
    let solver = Nnls2::new(stains);
    let p: Vec<&[f64]> = (0..3).map(|c| od.plane_f64(c).expect("OD plane")).collect();
    let values = (0..od.pixel_count())
        .map(|i| solver.solve([p[0][i], p[1][i], p[2][i]]))
        .collect();
    ConcentrationMap::new(od.width(), od.height(), values)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Color deconvolution with a complemented 3×3 basis: the third column is the
/// unit cross product of the two stains, the system is inverted exactly, the
/// residual channel is discarded and negative concentrations clip to zero.
pub fn deconvolve_complement(
    img: &PlanarImage,
    stains: &StainMatrix,
    background_intensity: f64,
) -> Result<ConcentrationMap> {
    check_rank(stains)?;
    let [a, b] = stains.columns();
    let c = cross(a, b);
    let n = dot3(c, c).sqrt();
    let c = c.map(|x| x / n);
    let m = nalgebra::Matrix3::new(a[0], b[0], c[0], a[1], b[1], c[1], a[2], b[2], c[2]);
    let inv = m
        .try_inverse()
        .ok_or(Error::SingularBasis { angle_rad: stains.separation() })?;
    let od = od_pixels(img, background_intensity)?;
    let values = od
        .iter()
        .map(|v| {
            let x = inv * nalgebra::Vector3::from(*v);
            [x[0].max(0.0), x[1].max(0.0)]
        })
        .collect();
    ConcentrationMap::new(img.width(), img.height(), values)
}

/// Rebuilds an RGB8 image from concentrations and a basis.
pub fn reconstruct(
    c: &ConcentrationMap,
    stains: &StainMatrix,
    background_intensity: f64,
) -> Result<PlanarImage> {
    let [a, b] = stains.columns();
    let n = c.width() * c.height();
    let mut planes = vec![vec![0u8; n]; 3];
    for (i, conc) in c.values().iter().enumerate() {
        for ch in 0..3 {
            let od = a[ch] * conc[0] + b[ch] * conc[1];
            planes[ch][i] = od_to_intensity(od, background_intensity);
        }
    }
    PlanarImage::from_u8_planes(c.width(), c.height(), ColorSpace::Rgb8, planes)
}
