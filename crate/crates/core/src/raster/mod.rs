//! Planar image representation shared by every other module.
//!
//! Images are stored channel-major: one contiguous row-major plane per
//! channel. The sample depth (8-bit or 64-bit real) is tracked per image and
//! is fixed by the colorspace, except for [`ColorSpace::Gray`] which admits
//! either depth.

mod color;
mod convolve;
pub mod io;

pub(crate) use color::IntensityTable;
pub use color::{
    decorrelated_lab_to_rgb, from_optical_density, od_to_intensity, optical_density,
    rgb_to_decorrelated_lab, to_optical_density, DEFAULT_BACKGROUND_INTENSITY, LMS_LOG_FLOOR,
    OD_FLOOR,
};
pub use convolve::{convolve2d, convolve_plane, Kernel2D};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    Rgb8,
    OpticalDensity,
    LabDecorrelated,
    Gray,
    RgbaEnhanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Red,
    Green,
    Blue,
    OdRed,
    OdGreen,
    OdBlue,
    Lightness,
    /// Yellow-blue opponent axis (α).
    ChromaAlpha,
    /// Red-green opponent axis (β).
    ChromaBeta,
    Gray,
    /// Binary enhancement plane, values in {0, 255}.
    Enhancement,
}

impl ColorSpace {
    pub fn channels(self) -> &'static [ChannelKind] {
        use ChannelKind::*;
        match self {
            ColorSpace::Rgb8 => &[Red, Green, Blue],
            ColorSpace::OpticalDensity => &[OdRed, OdGreen, OdBlue],
            ColorSpace::LabDecorrelated => &[Lightness, ChromaAlpha, ChromaBeta],
            ColorSpace::Gray => &[Gray],
            ColorSpace::RgbaEnhanced => &[Red, Green, Blue, Enhancement],
        }
    }

    pub fn channel_count(self) -> usize {
        self.channels().len()
    }

    fn depth(self) -> Option<Depth> {
        match self {
            ColorSpace::Rgb8 | ColorSpace::RgbaEnhanced => Some(Depth::U8),
            ColorSpace::OpticalDensity | ColorSpace::LabDecorrelated => Some(Depth::F64),
            ColorSpace::Gray => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    U8,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Planes {
    U8(Vec<Vec<u8>>),
    F64(Vec<Vec<f64>>),
}

impl Planes {
    fn len(&self) -> usize {
        match self {
            Planes::U8(p) => p.len(),
            Planes::F64(p) => p.len(),
        }
    }

    fn depth(&self) -> Depth {
        match self {
            Planes::U8(_) => Depth::U8,
            Planes::F64(_) => Depth::F64,
        }
    }
}

/// A multi-channel 2-D raster with explicit channel semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    space: ColorSpace,
    planes: Planes,
}

impl PlanarImage {
    pub fn new(width: usize, height: usize, space: ColorSpace, planes: Planes) -> Result<Self> {
        let img = PlanarImage {
            width,
            height,
            space,
            planes,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn from_u8_planes(
        width: usize,
        height: usize,
        space: ColorSpace,
        planes: Vec<Vec<u8>>,
    ) -> Result<Self> {
        Self::new(width, height, space, Planes::U8(planes))
    }

    pub fn from_f64_planes(
        width: usize,
        height: usize,
        space: ColorSpace,
        planes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::new(width, height, space, Planes::F64(planes))
    }

    pub fn gray_u8(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::from_u8_planes(width, height, ColorSpace::Gray, vec![data])
    }

    pub fn gray_f64(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_f64_planes(width, height, ColorSpace::Gray, vec![data])
    }

    /// Builds an 8-bit image from pixel-interleaved samples (`RGBRGB...`).
    pub fn from_interleaved(
        width: usize,
        height: usize,
        space: ColorSpace,
        data: &[u8],
    ) -> Result<Self> {
        let n = space.channel_count();
        if data.len() != width * height * n {
            return Err(Error::DimensionMismatch(format!(
                "{} interleaved samples for a {width}x{height}x{n} image",
                data.len()
            )));
        }
        let planes = (0..n)
            .map(|c| data.iter().skip(c).step_by(n).copied().collect())
            .collect();
        Self::from_u8_planes(width, height, space, planes)
    }

    /// Pixel-interleaved copy of an 8-bit image.
    pub fn to_interleaved(&self) -> Result<Vec<u8>> {
        let Planes::U8(planes) = &self.planes else {
            return Err(Error::InvalidData(
                "real-valued image has no 8-bit interleaved form".into(),
            ));
        };
        let n = planes.len();
        let mut out = vec![0u8; self.pixel_count() * n];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                out[i * n + c] = v;
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let expected = self.space.channel_count();
        if self.planes.len() != expected {
            return Err(Error::ChannelCountMismatch {
                space: self.space,
                expected,
                actual: self.planes.len(),
            });
        }
        if let Some(depth) = self.space.depth() {
            if depth != self.planes.depth() {
                return Err(Error::InvalidData(format!(
                    "{:?} requires {:?} samples",
                    self.space, depth
                )));
            }
        }
        let n = self.width * self.height;
        match &self.planes {
            Planes::U8(planes) => {
                if planes.iter().any(|p| p.len() != n) {
                    return Err(Error::DimensionMismatch(format!(
                        "plane length differs from {}x{}",
                        self.width, self.height
                    )));
                }
                if self.space == ColorSpace::RgbaEnhanced
                    && planes[3].iter().any(|&v| v != 0 && v != 255)
                {
                    return Err(Error::InvalidData(
                        "enhancement channel must be binary {0, 255}".into(),
                    ));
                }
            }
            Planes::F64(planes) => {
                if planes.iter().any(|p| p.len() != n) {
                    return Err(Error::DimensionMismatch(format!(
                        "plane length differs from {}x{}",
                        self.width, self.height
                    )));
                }
                if planes.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData("non-finite sample".into()));
                }
                if self.space == ColorSpace::OpticalDensity
                    && planes.iter().flatten().any(|&v| v < 0.0)
                {
                    return Err(Error::InvalidData("negative optical density".into()));
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn channels(&self) -> &'static [ChannelKind] {
        self.space.channels()
    }

    pub fn channel_count(&self) -> usize {
        self.planes.len()
    }

    pub fn depth(&self) -> Depth {
        self.planes.depth()
    }

    pub fn planes(&self) -> &Planes {
        &self.planes
    }

    pub fn into_planes(self) -> Planes {
        self.planes
    }

    pub fn plane_u8(&self, channel: usize) -> Option<&[u8]> {
        match &self.planes {
            Planes::U8(p) => p.get(channel).map(Vec::as_slice),
            Planes::F64(_) => None,
        }
    }

    pub fn plane_f64(&self, channel: usize) -> Option<&[f64]> {
        match &self.planes {
            Planes::F64(p) => p.get(channel).map(Vec::as_slice),
            Planes::U8(_) => None,
        }
    }

    /// Copy of one plane widened to real samples, whatever the stored depth.
    pub fn plane_real(&self, channel: usize) -> Option<Vec<f64>> {
        match &self.planes {
            Planes::U8(p) => p
                .get(channel)
                .map(|p| p.iter().map(|&v| f64::from(v)).collect()),
            Planes::F64(p) => p.get(channel).cloned(),
        }
    }

    pub(crate) fn expect_space(&self, space: ColorSpace) -> Result<()> {
        if self.space != space {
            return Err(Error::WrongColorspace {
                expected: space,
                actual: self.space,
            });
        }
        Ok(())
    }

    /// Returns the `w`×`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<PlanarImage> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        fn cut<T: Copy>(plane: &[T], stride: usize, x: usize, y: usize, w: usize, h: usize) -> Vec<T> {
            (y..y + h)
                .flat_map(|row| plane[row * stride + x..row * stride + x + w].iter().copied())
                .collect()
        }
        let planes = match &self.planes {
            Planes::U8(p) => Planes::U8(p.iter().map(|p| cut(p, self.width, x, y, w, h)).collect()),
            Planes::F64(p) => {
                Planes::F64(p.iter().map(|p| cut(p, self.width, x, y, w, h)).collect())
            }
        };
        Ok(PlanarImage {
            width: w,
            height: h,
            space: self.space,
            planes,
        })
    }
}

/// Per-channel population mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn of(img: &PlanarImage) -> Self {
        let (mean, std) = (0..img.channel_count())
            .map(|c| crate::stats::mean_std(&img.plane_real(c).expect("channel exists")))
            .unzip();
        ChannelStats { mean, std }
    }
}

/// Splits an RGB image into three single-channel 8-bit planes.
pub fn split_channels(img: &PlanarImage) -> Result<[PlanarImage; 3]> {
    img.expect_space(ColorSpace::Rgb8)?;
    let Planes::U8(planes) = &img.planes else {
        unreachable!("validated RGB8 image holds 8-bit planes")
    };
    let plane = |c: usize| PlanarImage {
        width: img.width,
        height: img.height,
        space: ColorSpace::Gray,
        planes: Planes::U8(vec![planes[c].clone()]),
    };
    Ok([plane(0), plane(1), plane(2)])
}

/// Stacks single-channel planes into one image tagged `space`.
///
/// 8-bit planes are widened when the target colorspace is real-valued;
/// real planes are never narrowed into an 8-bit colorspace.
pub fn merge_channels(planes: &[PlanarImage], space: ColorSpace) -> Result<PlanarImage> {
    let first = planes.first().ok_or(Error::ChannelCountMismatch {
        space,
        expected: space.channel_count(),
        actual: 0,
    })?;
    for p in planes {
        p.expect_space(ColorSpace::Gray)?;
        if p.width != first.width || p.height != first.height {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge {}x{} with {}x{}",
                first.width, first.height, p.width, p.height
            )));
        }
    }
    if planes.len() != space.channel_count() {
        return Err(Error::ChannelCountMismatch {
            space,
            expected: space.channel_count(),
            actual: planes.len(),
        });
    }

    let all_u8 = planes.iter().all(|p| p.depth() == Depth::U8);
    let target_depth = space
        .depth()
        .unwrap_or(if all_u8 { Depth::U8 } else { Depth::F64 });
    let data = match target_depth {
        Depth::U8 => {
            let mut out = Vec::with_capacity(planes.len());
            for p in planes {
                match p.plane_u8(0) {
                    Some(d) => out.push(d.to_vec()),
                    None => {
                        return Err(Error::InvalidData(format!(
                            "real-valued plane cannot be merged into {space:?}"
                        )))
                    }
                }
            }
            Planes::U8(out)
        }
        Depth::F64 => Planes::F64(
            planes
                .iter()
                .map(|p| p.plane_real(0).expect("single-channel plane"))
                .collect(),
        ),
    };
    PlanarImage::new(first.width, first.height, space, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_single_pixel() {
        let img = PlanarImage::from_interleaved(1, 1, ColorSpace::Rgb8, &[10, 20, 30]).unwrap();
        let [r, g, b] = split_channels(&img).unwrap();
        assert_eq!(r.plane_u8(0).unwrap(), &[10]);
        assert_eq!(g.plane_u8(0).unwrap(), &[20]);
        assert_eq!(b.plane_u8(0).unwrap(), &[30]);
        assert_eq!(r.space(), ColorSpace::Gray);
    }

    #[test]
    fn split_zero_image() {
        let img = PlanarImage::from_interleaved(2, 2, ColorSpace::Rgb8, &[0; 12]).unwrap();
        for p in split_channels(&img).unwrap() {
            assert_eq!(p.plane_u8(0).unwrap(), &[0, 0, 0, 0]);
        }
    }

    #[test]
    fn split_rejects_non_rgb() {
        let g = PlanarImage::gray_u8(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(
            split_channels(&g),
            Err(Error::WrongColorspace { .. })
        ));
    }

    #[test]
    fn merge_mismatched_dimensions() {
        let a = PlanarImage::gray_u8(2, 2, vec![0; 4]).unwrap();
        let b = PlanarImage::gray_u8(3, 3, vec![0; 9]).unwrap();
        assert!(matches!(
            merge_channels(&[a.clone(), a, b], ColorSpace::Rgb8),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn merge_wrong_count() {
        let a = PlanarImage::gray_u8(2, 2, vec![0; 4]).unwrap();
        assert!(matches!(
            merge_channels(&[a.clone(), a], ColorSpace::Rgb8),
            Err(Error::ChannelCountMismatch { expected: 3, actual: 2, .. })
        ));
    }

    #[test]
    fn merge_four_channel_enhanced() {
        let img =
            PlanarImage::from_interleaved(1, 2, ColorSpace::Rgb8, &[1, 2, 3, 4, 5, 6]).unwrap();
        let [r, g, b] = split_channels(&img).unwrap();
        let t = PlanarImage::gray_u8(1, 2, vec![255, 0]).unwrap();
        let out = merge_channels(&[r, g, b, t], ColorSpace::RgbaEnhanced).unwrap();
        assert_eq!(out.channel_count(), 4);
        assert_eq!(out.to_interleaved().unwrap(), vec![1, 2, 3, 255, 4, 5, 6, 0]);
    }

    #[test]
    fn enhanced_channel_must_be_binary() {
        let p = vec![vec![0u8; 4], vec![0; 4], vec![0; 4], vec![0, 255, 7, 0]];
        assert!(PlanarImage::from_u8_planes(2, 2, ColorSpace::RgbaEnhanced, p).is_err());
    }

    #[test]
    fn merge_refuses_narrowing_real_planes() {
        let r = PlanarImage::gray_f64(1, 1, vec![0.5]).unwrap();
        assert!(merge_channels(&[r.clone(), r.clone(), r], ColorSpace::Rgb8).is_err());
    }

    #[test]
    fn crop_window() {
        let img = PlanarImage::gray_u8(3, 3, (0..9).collect()).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.plane_u8(0).unwrap(), &[4, 5, 7, 8]);
        assert!(img.crop(2, 2, 2, 2).is_err());
    }

    #[test]
    fn split_merge_round_trip_256() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<u8> = (0..256 * 256 * 3).map(|_| rng.random()).collect();
        let img = PlanarImage::from_interleaved(256, 256, ColorSpace::Rgb8, &data).unwrap();
        let planes = split_channels(&img).unwrap();
        assert_eq!(merge_channels(&planes, ColorSpace::Rgb8).unwrap(), img);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn split_merge_is_identity(
            (w, h, data) in (1usize..24, 1usize..24)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h * 3)))
        ) {
            let img = PlanarImage::from_interleaved(w, h, ColorSpace::Rgb8, &data).unwrap();
            let merged = merge_channels(&split_channels(&img).unwrap(), ColorSpace::Rgb8).unwrap();
            prop_assert_eq!(merged.to_interleaved().unwrap(), data);
        }
    }
}
