//! 8-bit PNG and TIFF reading and writing.
//!
//! Input scans are assumed to be sRGB-like 8-bit rasters; no color
//! management is applied.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::raster::{ColorSpace, Depth, PlanarImage};

/// File extensions the batch commands pick up.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "tif", "tiff"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Reads any supported raster as RGB8; an alpha channel is dropped.
pub fn read_rgb8(path: &Path) -> Result<PlanarImage> {
    let img = open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    PlanarImage::from_interleaved(w as usize, h as usize, ColorSpace::Rgb8, img.as_raw())
}

/// Reads a raster as a single 8-bit channel (luma for color files).
pub fn read_gray8(path: &Path) -> Result<PlanarImage> {
    let img = open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    PlanarImage::gray_u8(w as usize, h as usize, img.into_raw())
}

/// Reads a mask plane: the alpha channel when the file has one (the
/// enhancement plane of a 4-channel output), luma otherwise.
pub fn read_mask8(path: &Path) -> Result<PlanarImage> {
    let img = open(path)?;
    if img.color().has_alpha() {
        let rgba = img.to_rgba8();
        let (w, h) = rgba.dimensions();
        let alpha = rgba.pixels().map(|p| p.0[3]).collect();
        return PlanarImage::gray_u8(w as usize, h as usize, alpha);
    }
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    PlanarImage::gray_u8(w as usize, h as usize, luma.into_raw())
}

/// Writes an 8-bit image. The container follows the file extension
/// (PNG by default, TIFF for `.tif`/`.tiff`).
pub fn write_image(img: &PlanarImage, path: &Path) -> Result<()> {
    if img.depth() != Depth::U8 {
        return Err(Error::InvalidData(format!(
            "cannot write real-valued {:?} image to {}",
            img.space(),
            path.display()
        )));
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let data = img.to_interleaved()?;
    let dynamic = match img.channel_count() {
        1 => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).expect("buffer size"),
        ),
        3 => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).expect("buffer size"),
        ),
        4 => DynamicImage::ImageRgba8(
            ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, data).expect("buffer size"),
        ),
        n => {
            return Err(Error::InvalidData(format!(
                "no 8-bit container for {n} channels"
            )))
        }
    };
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("tif") || e.eq_ignore_ascii_case("tiff") => {
            ImageFormat::Tiff
        }
        _ => ImageFormat::Png,
    };
    dynamic
        .save_with_format(path, format)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}

/// Min-max stretches a real plane into an 8-bit grayscale image for inspection.
pub fn normalized_gray(width: usize, height: usize, data: &[f64]) -> Result<PlanarImage> {
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let out = data
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    PlanarImage::gray_u8(width, height, out)
}
