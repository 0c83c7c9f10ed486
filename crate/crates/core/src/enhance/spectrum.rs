use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::raster::{ColorSpace, PlanarImage};

/// Imaginary residue tolerated by [`idft2`], relative to the plane norm
/// (planes with a norm below one intensity unit are judged in absolute terms).
pub const NON_REAL_TOLERANCE: f64 = 1e-9;

/// DC-centered 2-D spectrum. Bin `(row, col)` sits at integer frequency
/// offset `(row - height/2, col - width/2)` from DC.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    width: usize,
    height: usize,
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_bins(width: usize, height: usize, bins: Vec<Complex64>) -> Result<Self> {
        if bins.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} bins for a {width}x{height} spectrum",
                bins.len()
            )));
        }
        Ok(Spectrum {
            width,
            height,
            bins,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn bin(&self, row: usize, col: usize) -> Complex64 {
        self.bins[row * self.width + col]
    }

    pub fn dc_index(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }

    /// Integer `(x_f, y_f)` offset of a bin from the centered DC bin.
    pub fn frequency_offset(&self, row: usize, col: usize) -> (i64, i64) {
        (
            col as i64 - (self.width / 2) as i64,
            row as i64 - (self.height / 2) as i64,
        )
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.bins.iter().map(|z| z.norm()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn transpose<T: Copy>(width: usize, height: usize, data: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for col in 0..width {
        for row in 0..height {
            out.push(data[row * width + col]);
        }
    }
    out
}

/// Unnormalized 2-D FFT of a row-major buffer, in place.
fn fft_2d(width: usize, height: usize, data: &mut Vec<Complex64>, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let rows = planner.plan_fft(width, direction);
    rows.process(data);
    let mut t = transpose(width, height, data);
    let cols = planner.plan_fft(height, direction);
    cols.process(&mut t);
    *data = transpose(height, width, &t);
}

fn shift(width: usize, height: usize, data: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let (hw, hh) = (width / 2, height / 2);
    let mut out = vec![Complex64::default(); data.len()];
    for r in 0..height {
        for c in 0..width {
            let (sr, sc) = ((r + hh) % height, (c + hw) % width);
            if inverse {
                out[r * width + c] = data[sr * width + sc];
            } else {
                out[sr * width + sc] = data[r * width + c];
            }
        }
    }
    out
}

pub(crate) fn dft2_plane(width: usize, height: usize, plane: &[f64]) -> Spectrum {
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if !buf.is_empty() {
        fft_2d(width, height, &mut buf, FftDirection::Forward);
    }
    Spectrum {
        width,
        height,
        bins: shift(width, height, &buf, false),
    }
}

pub(crate) fn idft2_plane(spec: &Spectrum) -> Result<Vec<f64>> {
    let (w, h) = (spec.width, spec.height);
    let mut buf = shift(w, h, &spec.bins, true);
    if buf.is_empty() {
        return Ok(Vec::new());
    }
    fft_2d(w, h, &mut buf, FftDirection::Inverse);
    let scale = 1.0 / (w * h) as f64;
    let mut imag = 0.0;
    let mut total = 0.0;
    let real = buf
        .iter()
        .map(|z| {
            let z = z * scale;
            imag += z.im * z.im;
            total += z.norm_sqr();
            z.re
        })
        .collect();
    let (imag, total) = (imag.sqrt(), total.sqrt().max(1.0));
    if imag > NON_REAL_TOLERANCE * total {
        return Err(Error::NonRealResult {
            residue: imag / total,
            tolerance: NON_REAL_TOLERANCE,
        });
    }
    Ok(real)
}

/// Forward DFT of a single-channel image, DC moved to the center.
pub fn dft2(img: &PlanarImage) -> Result<Spectrum> {
    img.expect_space(ColorSpace::Gray)?;
    let plane = img.plane_real(0).expect("gray image has one plane");
    Ok(dft2_plane(img.width(), img.height(), &plane))
}

/// Inverse of [`dft2`]. Fails with `NonRealResult` when the spectrum is not
/// conjugate-symmetric enough to describe a real image.
pub fn idft2(spec: &Spectrum) -> Result<PlanarImage> {
    let real = idft2_plane(spec)?;
    PlanarImage::gray_f64(spec.width, spec.height, real)
}

/// Bins kept by the ideal low-pass mask: `sqrt(x_f² + y_f²) <= cutoff`.
pub fn low_pass_mask(width: usize, height: usize, cutoff: f64) -> Vec<bool> {
    let (cx, cy) = ((width / 2) as i64, (height / 2) as i64);
    let mut mask = Vec::with_capacity(width * height);
    for r in 0..height as i64 {
        for c in 0..width as i64 {
            let (x, y) = (c - cx, r - cy);
            mask.push(((x * x + y * y) as f64).sqrt() <= cutoff);
        }
    }
    mask
}

/// Applies the ideal low-pass mask in place of a copy of `spec`.
pub fn low_pass_filter(spec: &Spectrum, cutoff: f64) -> Result<Spectrum> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff frequency must be positive, got {cutoff}"
        )));
    }
    let mask = low_pass_mask(spec.width, spec.height, cutoff);
    let bins = spec
        .bins
        .iter()
        .zip(mask)
        .map(|(&z, keep)| if keep { z } else { Complex64::default() })
        .collect();
    Ok(Spectrum {
        width: spec.width,
        height: spec.height,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    /// O(n⁴) textbook DFT used as the reference.
    fn naive_dft(w: usize, h: usize, x: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut s = Complex64::default();
                for y in 0..h {
                    for xx in 0..w {
                        let ang = -2.0 * PI * (u as f64 * xx as f64 / w as f64 + v as f64 * y as f64 / h as f64);
                        s += Complex64::from_polar(x[y * w + xx], ang);
                    }
                }
                out[v * w + u] = s;
            }
        }
        out
    }

    fn gray(w: usize, h: usize, data: Vec<f64>) -> PlanarImage {
        PlanarImage::gray_f64(w, h, data).unwrap()
    }

    #[test]
    fn constant_image_is_pure_dc() {
        let n = 8;
        let s = dft2(&gray(n, n, vec![3.0; n * n])).unwrap();
        let (dr, dc) = s.dc_index();
        assert!((s.bin(dr, dc).re - 3.0 * (n * n) as f64).abs() < 1e-9);
        for r in 0..n {
            for c in 0..n {
                if (r, c) != (dr, dc) {
                    assert!(s.bin(r, c).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut d = vec![0.0; 36];
        d[0] = 1.0;
        let s = dft2(&gray(6, 6, d)).unwrap();
        assert!(s.bins().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn agrees_with_naive_dft_on_odd_sizes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (w, h) = (5, 7);
        let x: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect();
        let s = dft2(&gray(w, h, x.clone())).unwrap();
        let reference = naive_dft(w, h, &x);
        for v in 0..h {
            for u in 0..w {
                let sr = (v + h / 2) % h;
                let sc = (u + w / 2) % w;
                assert!((s.bin(sr, sc) - reference[v * w + u]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_spectrum_inverts_to_zero() {
        let s = Spectrum::from_bins(4, 4, vec![Complex64::default(); 16]).unwrap();
        let img = idft2(&s).unwrap();
        assert!(img.plane_f64(0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_only_inverts_to_constant() {
        let n = 6;
        let mut bins = vec![Complex64::default(); n * n];
        bins[(n / 2) * n + n / 2] = Complex64::new(7.0 * (n * n) as f64, 0.0);
        let img = idft2(&Spectrum::from_bins(n, n, bins).unwrap()).unwrap();
        assert!(img.plane_f64(0).unwrap().iter().all(|v| (v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn broken_symmetry_is_non_real() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut s = dft2(&gray(8, 8, x)).unwrap();
        // Off-axis bin whose conjugate partner is a different bin.
        s.bins_mut()[8 + 1] += Complex64::new(0.0, 10.0);
        assert!(matches!(idft2(&s), Err(Error::NonRealResult { .. })));
    }

    #[test]
    fn full_radius_cutoff_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10 * 6).map(|_| rng.random_range(0.0..255.0)).collect();
        let s = dft2(&gray(10, 6, x)).unwrap();
        let full = ((5.0f64).powi(2) + 3.0f64.powi(2)).sqrt();
        assert_eq!(low_pass_filter(&s, full).unwrap(), s);
    }

    #[test]
    fn sub_unit_cutoff_keeps_dc_only() {
        let mask = low_pass_mask(9, 4, 0.5);
        assert_eq!(mask.iter().filter(|k| **k).count(), 1);
        assert!(mask[2 * 9 + 4]);
    }

    #[test]
    fn sinusoid_beyond_cutoff_vanishes() {
        let n = 32;
        let (u, v) = (6.0, 5.0);
        let x: Vec<f64> = (0..n * n)
            .map(|i| {
                let (r, c) = ((i / n) as f64, (i % n) as f64);
                100.0 * (2.0 * PI * (u * c + v * r) / n as f64).cos()
            })
            .collect();
        let s = dft2(&gray(n, n, x)).unwrap();
        let radius = (u * u + v * v).sqrt();
        let filtered = low_pass_filter(&s, radius - 0.5).unwrap();
        let out = idft2(&filtered).unwrap();
        let linf = out.plane_f64(0).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(linf <= 1e-9, "L-inf {linf}");
        // and it survives when the cutoff covers its radius
        let kept = idft2(&low_pass_filter(&s, radius).unwrap()).unwrap();
        assert!(kept.plane_f64(0).unwrap()[0] > 99.0);
    }

    #[test]
    fn rejects_non_positive_cutoff() {
        let s = Spectrum::from_bins(2, 2, vec![Complex64::default(); 4]).unwrap();
        assert!(low_pass_filter(&s, 0.0).is_err());
        assert!(low_pass_filter(&s, f64::NAN).is_err());
    }

    #[test]
    fn mask_is_monotone_in_cutoff() {
        for (lo, hi) in [(1.0, 1.5), (3.0, 7.2), (0.2, 20.0)] {
            let a = low_pass_mask(17, 12, lo);
            let b = low_pass_mask(17, 12, hi);
            assert!(a.iter().zip(&b).all(|(x, y)| !*x || *y));
        }
    }
}
