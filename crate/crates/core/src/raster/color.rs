//! Optical density and decorrelated lαβ transforms.
//!
//! The lαβ chain uses the fixed matrices of Reinhard et al. (2001):
//!
//! | step        | matrix                                                        |
//! |-------------|---------------------------------------------------------------|
//! | RGB → LMS   | `[0.3811 0.5783 0.0402; 0.1967 0.7244 0.0782; 0.0241 0.1288 0.8444]` |
//! | log10       | applied per LMS component, floored at [`LMS_LOG_FLOOR`]       |
//! | LMS → lαβ   | `diag(1/√3, 1/√6, 1/√2) · [1 1 1; 1 1 −2; 1 −1 0]`            |
//!
//! RGB is taken on the raw 0..255 scale. The inverse path uses the exact
//! algebraic inverses of both matrices.

use crate::error::Result;
use crate::raster::{ColorSpace, PlanarImage, Planes};

/// Incident light intensity for an 8-bit scan.
pub const DEFAULT_BACKGROUND_INTENSITY: f64 = 255.0;

/// Intensities below this are clamped before taking the logarithm.
pub const OD_FLOOR: f64 = 0.5;

/// Floor applied to LMS responses before log10 (only reached by pure black).
pub const LMS_LOG_FLOOR: f64 = 1e-4;

const RGB_TO_LMS: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

/// Optical density of a single intensity sample, clamped to be non-negative.
#[inline]
pub fn optical_density(v: f64, background_intensity: f64) -> f64 {
    let od = -(v.max(OD_FLOOR) / background_intensity).log10();
    od.max(0.0)
}

/// Inverse of [`optical_density`], rounded half away from zero into 0..=255.
#[inline]
pub fn od_to_intensity(od: f64, background_intensity: f64) -> u8 {
    let v = (background_intensity * 10f64.powf(-od)).round();
    v.clamp(0.0, 255.0) as u8
}

/// [`od_to_intensity`] for bulk conversion: a binary search over the 255
/// rounding boundaries instead of a `powf` per sample. Values within a hair
/// of a boundary defer to [`od_to_intensity`], so results are identical.
pub(crate) struct IntensityTable {
    background_intensity: f64,
    // bounds[k]: largest OD that still rounds to at least k + 1 (decreasing)
    bounds: Vec<f64>,
}

impl IntensityTable {
    const GUARD: f64 = 1e-9;

    pub(crate) fn new(background_intensity: f64) -> Self {
        let bounds = (0..255)
            .map(|k| (background_intensity / (k as f64 + 0.5)).log10())
            .collect();
        IntensityTable {
            background_intensity,
            bounds,
        }
    }

    #[inline]
    pub(crate) fn get(&self, od: f64) -> u8 {
        let n = self.bounds.partition_point(|&t| od <= t);
        let near = |k: usize| self.bounds.get(k).is_some_and(|&t| (od - t).abs() <= Self::GUARD);
        if near(n) || (n > 0 && near(n - 1)) {
            return od_to_intensity(od, self.background_intensity);
        }
        n as u8
    }
}

fn check_background(background_intensity: f64) -> Result<()> {
    if !(background_intensity > 0.0 && background_intensity.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!(
            "background intensity must be positive, got {background_intensity}"
        )));
    }
    Ok(())
}

pub fn to_optical_density(img: &PlanarImage, background_intensity: f64) -> Result<PlanarImage> {
    img.expect_space(ColorSpace::Rgb8)?;
    check_background(background_intensity)?;
    let Planes::U8(planes) = img.planes() else {
        unreachable!()
    };
    let od = planes
        .iter()
        .map(|p| {
            p.iter()
                .map(|&v| optical_density(f64::from(v), background_intensity))
                .collect()
        })
        .collect();
    PlanarImage::from_f64_planes(img.width(), img.height(), ColorSpace::OpticalDensity, od)
}

pub fn from_optical_density(img: &PlanarImage, background_intensity: f64) -> Result<PlanarImage> {
    img.expect_space(ColorSpace::OpticalDensity)?;
    check_background(background_intensity)?;
    let Planes::F64(planes) = img.planes() else {
        unreachable!()
    };
    let rgb = planes
        .iter()
        .map(|p| {
            p.iter()
                .map(|&od| od_to_intensity(od, background_intensity))
                .collect()
        })
        .collect();
    PlanarImage::from_u8_planes(img.width(), img.height(), ColorSpace::Rgb8, rgb)
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    [
        [cof(1, 2, 1, 2) / det, -cof(0, 2, 1, 2) / det, cof(0, 1, 1, 2) / det],
        [-cof(1, 2, 0, 2) / det, cof(0, 2, 0, 2) / det, -cof(0, 1, 0, 2) / det],
        [cof(1, 2, 0, 1) / det, -cof(0, 2, 0, 1) / det, cof(0, 1, 0, 1) / det],
    ]
}

#[inline]
fn mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Converts one RGB triple (0..255 scale) to lαβ.
pub(crate) fn rgb_pixel_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lms = mul3(&RGB_TO_LMS, rgb).map(|v| v.max(LMS_LOG_FLOOR).log10());
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let s2 = 2f64.sqrt();
    [
        (lms[0] + lms[1] + lms[2]) / s3,
        (lms[0] + lms[1] - 2.0 * lms[2]) / s6,
        (lms[0] - lms[1]) / s2,
    ]
}

/// Converts one lαβ triple back to unclamped real RGB.
pub(crate) fn lab_pixel_to_rgb(lab: [f64; 3], lms_to_rgb: &[[f64; 3]; 3]) -> [f64; 3] {
    let a = lab[0] * 3f64.sqrt();
    let b = lab[1] * 6f64.sqrt();
    let c = lab[2] * 2f64.sqrt();
    let s = (a - b) / 3.0;
    let lm = a - s;
    let l = (lm + c) / 2.0;
    let m = (lm - c) / 2.0;
    mul3(lms_to_rgb, [l, m, s].map(|v| 10f64.powf(v)))
}

pub(crate) fn lms_to_rgb_matrix() -> [[f64; 3]; 3] {
    invert3(&RGB_TO_LMS)
}

pub fn rgb_to_decorrelated_lab(img: &PlanarImage) -> Result<PlanarImage> {
    img.expect_space(ColorSpace::Rgb8)?;
    let Planes::U8(p) = img.planes() else {
        unreachable!()
    };
    let n = img.pixel_count();
    let mut out = vec![vec![0.0; n]; 3];
    for i in 0..n {
        let lab = rgb_pixel_to_lab([p[0][i], p[1][i], p[2][i]].map(f64::from));
        for c in 0..3 {
            out[c][i] = lab[c];
        }
    }
    PlanarImage::from_f64_planes(img.width(), img.height(), ColorSpace::LabDecorrelated, out)
}

/// Inverse of [`rgb_to_decorrelated_lab`]; out-of-gamut values clamp to 0..=255.
pub fn decorrelated_lab_to_rgb(img: &PlanarImage) -> Result<PlanarImage> {
    img.expect_space(ColorSpace::LabDecorrelated)?;
    let Planes::F64(p) = img.planes() else {
        unreachable!()
    };
    let inv = lms_to_rgb_matrix();
    let n = img.pixel_count();
    let mut out = vec![vec![0u8; n]; 3];
    for i in 0..n {
        let rgb = lab_pixel_to_rgb([p[0][i], p[1][i], p[2][i]], &inv);
        for c in 0..3 {
            out[c][i] = quantize(rgb[c]);
        }
    }
    PlanarImage::from_u8_planes(img.width(), img.height(), ColorSpace::Rgb8, out)
}

/// Round half away from zero, then clamp into the 8-bit range. NaN maps to 0.
#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    #[test]
    fn intensity_table_matches_direct_conversion() {
        for bg in [255.0, 240.0, 300.0] {
            let table = IntensityTable::new(bg);
            let mut ods: Vec<f64> = (-2000..40000).map(|i| i as f64 * 1e-4).collect();
            for k in 0..255 {
                let t = (bg / (k as f64 + 0.5)).log10();
                let ulp = t.abs() * f64::EPSILON;
                ods.extend([t, t + ulp, t - ulp, t + 2e-9, t - 2e-9]);
            }
            ods.extend([f64::NAN, f64::INFINITY, f64::NEG_INFINITY]);
            for od in ods {
                assert_eq!(table.get(od), od_to_intensity(od, bg), "od {od}, background {bg}");
            }
        }
    }

    use super::*;
    use rand::{Rng, SeedableRng};

    fn rgb(w: usize, h: usize, data: &[u8]) -> PlanarImage {
        PlanarImage::from_interleaved(w, h, ColorSpace::Rgb8, data).unwrap()
    }

    #[test]
    fn od_reference_values() {
        assert_eq!(optical_density(255.0, 255.0), 0.0);
        assert!((optical_density(25.5, 255.0) - 1.0).abs() < 1e-12);
        // -log10(0.5 / 255)
        let expected = (255.0f64 / 0.5).log10();
        assert!((optical_density(0.0, 255.0) - expected).abs() < 1e-12);
        assert!((expected - 2.7076).abs() < 1e-4);
    }

    #[test]
    fn od_inverse_reference_values() {
        assert_eq!(od_to_intensity(0.0, 255.0), 255);
        assert_eq!(od_to_intensity(1.0, 255.0), 26);
    }

    #[test]
    fn od_round_trip_exhaustive() {
        let data: Vec<u8> = (1..=255u8).flat_map(|v| [v, v, v]).collect();
        let img = rgb(255, 1, &data);
        let od = to_optical_density(&img, 255.0).unwrap();
        assert_eq!(od.space(), ColorSpace::OpticalDensity);
        assert_eq!(from_optical_density(&od, 255.0).unwrap(), img);
    }

    #[test]
    fn od_is_never_negative_with_low_background() {
        let img = rgb(1, 1, &[250, 10, 0]);
        let od = to_optical_density(&img, 200.0).unwrap();
        assert!(od.plane_f64(0).unwrap()[0] >= 0.0);
    }

    #[test]
    fn od_rejects_wrong_space() {
        let g = PlanarImage::gray_u8(1, 1, vec![1]).unwrap();
        assert!(to_optical_density(&g, 255.0).is_err());
        assert!(from_optical_density(&g, 255.0).is_err());
    }

    #[test]
    fn gray_is_achromatic() {
        for g in [1u8, 64, 128, 200, 255] {
            let lab = rgb_pixel_to_lab([f64::from(g); 3]);
            assert!(lab[1].abs() < 2e-3, "alpha {} for gray {g}", lab[1]);
            assert!(lab[2].abs() < 2e-3, "beta {} for gray {g}", lab[2]);
            let back = decorrelated_lab_to_rgb(
                &rgb_to_decorrelated_lab(&rgb(1, 1, &[g, g, g])).unwrap(),
            )
            .unwrap();
            for c in 0..3 {
                assert!((i16::from(back.plane_u8(c).unwrap()[0]) - i16::from(g)).abs() <= 1);
            }
        }
    }

    #[test]
    fn black_stays_finite() {
        let lab = rgb_to_decorrelated_lab(&rgb(1, 1, &[0, 0, 0])).unwrap();
        for c in 0..3 {
            assert!(lab.plane_f64(c).unwrap()[0].is_finite());
        }
        let back = decorrelated_lab_to_rgb(&lab).unwrap();
        assert_eq!(back.to_interleaved().unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn out_of_gamut_clamps() {
        let lab = PlanarImage::from_f64_planes(
            2,
            1,
            ColorSpace::LabDecorrelated,
            vec![vec![50.0, -50.0], vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let back = decorrelated_lab_to_rgb(&lab).unwrap();
        assert_eq!(back.to_interleaved().unwrap(), vec![255, 255, 255, 0, 0, 0]);
    }

    #[test]
    fn lab_round_trip_random_pixels() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<u8> = (0..1000 * 3).map(|_| rng.random()).collect();
        let img = rgb(1000, 1, &data);
        let back = decorrelated_lab_to_rgb(&rgb_to_decorrelated_lab(&img).unwrap()).unwrap();
        let max_err = back
            .to_interleaved()
            .unwrap()
            .iter()
            .zip(&data)
            .map(|(&a, &b)| (i16::from(a) - i16::from(b)).abs())
            .max()
            .unwrap();
        assert!(max_err <= 1, "max error {max_err}");
    }

    #[test]
    fn matrix_inverse_is_exact_enough() {
        let inv = lms_to_rgb_matrix();
        for i in 0..3 {
            let e = mul3(&inv, RGB_TO_LMS.map(|row| row[i]));
            for (j, v) in e.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }
}
