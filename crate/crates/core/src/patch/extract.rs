use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::patch::annotation::AnnotationSet;
use crate::patch::rasterize::{polygon_pixels, rasterize_mask};
use crate::raster::PlanarImage;

pub const PATCH_SIZE: usize = 256;
/// Gap kept between an annotation and the patch border by corner placement.
pub const CORNER_MARGIN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Centered,
    CornerTl,
    CornerTr,
    CornerBl,
    CornerBr,
}

impl Provenance {
    pub const CORNERS: [Provenance; 4] = [
        Provenance::CornerTl,
        Provenance::CornerTr,
        Provenance::CornerBl,
        Provenance::CornerBr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Provenance::Centered => "centered",
            Provenance::CornerTl => "corner_tl",
            Provenance::CornerTr => "corner_tr",
            Provenance::CornerBl => "corner_bl",
            Provenance::CornerBr => "corner_br",
        }
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    fn of(pixels: &[(usize, usize)]) -> Option<PixelBox> {
        let first = pixels.first()?;
        let mut b = PixelBox {
            x0: first.0,
            y0: first.1,
            x1: first.0,
            y1: first.1,
        };
        for &(x, y) in pixels {
            b.x0 = b.x0.min(x);
            b.y0 = b.y0.min(y);
            b.x1 = b.x1.max(x);
            b.y1 = b.y1.max(y);
        }
        Some(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub subject_id: String,
    pub patch_id: String,
    pub annotation_index: usize,
    /// Top-left corner of the window in slide pixels.
    pub origin: (usize, usize),
    pub provenance: Provenance,
    pub image: PlanarImage,
    /// `{0, 255}` gray mask of every annotation inside the window.
    pub mask: PlanarImage,
}

/// Metadata of a patch without its pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub patch_id: String,
    pub subject_id: String,
    pub annotation_index: usize,
    pub origin: (usize, usize),
    pub provenance: Provenance,
}

impl PatchRecord {
    pub fn entry(&self) -> PatchEntry {
        PatchEntry {
            patch_id: self.patch_id.clone(),
            subject_id: self.subject_id.clone(),
            annotation_index: self.annotation_index,
            origin: self.origin,
            provenance: self.provenance,
        }
    }
}

/// Content-addressed id: the first 16 hex digits of a SHA-256 over the
/// subject, annotation index, window origin and provenance.
pub fn patch_id(subject: &str, annotation_index: usize, origin: (usize, usize), p: Provenance) -> String {
    let mut h = Sha256::new();
    h.update(subject.as_bytes());
    h.update([0]);
    h.update(format!("{annotation_index}:{}:{}:{}", origin.0, origin.1, p.name()).as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Window start that centers `center` and stays inside `0..=extent - size`.
fn centered_start(center: f64, size: usize, extent: usize) -> usize {
    let start = (center - size as f64 / 2.0).round();
    start.clamp(0.0, (extent - size) as f64) as usize
}

fn clamp_start(start: i64, size: usize, extent: usize) -> usize {
    start.clamp(0, (extent - size) as i64) as usize
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub records: Vec<PatchRecord>,
    pub warnings: Vec<String>,
}

/// A slide, its annotations and the rasterized slide-level mask.
pub struct PatchSource<'a> {
    slide: &'a PlanarImage,
    set: &'a AnnotationSet,
    mask: PlanarImage,
    boxes: Vec<Option<PixelBox>>,
    patch: usize,
}

impl<'a> PatchSource<'a> {
    pub fn new(slide: &'a PlanarImage, set: &'a AnnotationSet, patch: usize) -> Result<Self> {
        if patch == 0 {
            return Err(Error::InvalidParameter("patch size must be positive".into()));
        }
        let (w, h) = (slide.width(), slide.height());
        if w < patch || h < patch {
            return Err(Error::SlideTooSmall {
                width: w,
                height: h,
                patch,
            });
        }
        let mask = rasterize_mask(set, w, h)?;
        let boxes = set
            .annotations
            .par_iter()
            .map(|a| PixelBox::of(&polygon_pixels(&a.polygon, w, h)))
            .collect();
        Ok(PatchSource {
            slide,
            set,
            mask,
            boxes,
            patch,
        })
    }

    pub fn mask(&self) -> &PlanarImage {
        &self.mask
    }

    /// Pixel bounding box of annotation `index`; `None` when it covers no pixel.
    pub fn bounding_box(&self, index: usize) -> Option<PixelBox> {
        self.boxes.get(index).copied().flatten()
    }

    fn record(&self, index: usize, origin: (usize, usize), provenance: Provenance) -> Result<PatchRecord> {
        let p = self.patch;
        Ok(PatchRecord {
            subject_id: self.set.subject_id.clone(),
            patch_id: patch_id(&self.set.subject_id, index, origin, provenance),
            annotation_index: index,
            origin,
            provenance,
            image: self.slide.crop(origin.0, origin.1, p, p)?,
            mask: self.mask.crop(origin.0, origin.1, p, p)?,
        })
    }

    /// The window centered on annotation `index`'s bounding box.
    pub fn centered(&self, index: usize) -> Result<PatchRecord> {
        let b = self.bounding_box(index).ok_or_else(|| {
            Error::InvalidData(format!("annotation {index} covers no pixel centers"))
        })?;
        let cx = (b.x0 + b.x1) as f64 / 2.0;
        let cy = (b.y0 + b.y1) as f64 / 2.0;
        let origin = (
            centered_start(cx, self.patch, self.slide.width()),
            centered_start(cy, self.patch, self.slide.height()),
        );
        self.record(index, origin, Provenance::Centered)
    }

    /// One centered record per annotation, in annotation order. Annotations
    /// that cover no pixel center are skipped with a warning.
    pub fn extract_patches(&self) -> Result<Extraction> {
        let results: Vec<Option<Result<PatchRecord>>> = (0..self.set.annotations.len())
            .into_par_iter()
            .map(|i| self.bounding_box(i).map(|_| self.centered(i)))
            .collect();
        let mut out = Extraction::default();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Some(r) => out.records.push(r?),
                None => out.warnings.push(format!(
                    "{}: annotation {i} covers no pixel centers; no patch extracted",
                    self.set.subject_id
                )),
            }
        }
        Ok(out)
    }

    /// Four windows that put the annotation's bounding box against each
    /// corner of the patch, [`CORNER_MARGIN`] pixels in. Windows are clamped
    /// to the slide, so near the slide border some of them may coincide.
    pub fn corner_translate_augment(&self, centered: &PatchRecord) -> Result<[PatchRecord; 4]> {
        if centered.provenance != Provenance::Centered {
            return Err(Error::InvalidParameter(format!(
                "patch {} is already a corner translation",
                centered.patch_id
            )));
        }
        let index = centered.annotation_index;
        let b = self.bounding_box(index).ok_or_else(|| {
            Error::InvalidData(format!("annotation {index} covers no pixel centers"))
        })?;
        let (p, m) = (self.patch, CORNER_MARGIN);
        let limit = p.saturating_sub(2 * m);
        if b.width() > limit || b.height() > limit {
            return Err(Error::AnnotationTooLarge {
                width: b.width(),
                height: b.height(),
                limit,
            });
        }
        let (w, h) = (self.slide.width(), self.slide.height());
        let left = clamp_start(b.x0 as i64 - m as i64, p, w);
        let right = clamp_start(b.x1 as i64 - (p - 1 - m) as i64, p, w);
        let top = clamp_start(b.y0 as i64 - m as i64, p, h);
        let bottom = clamp_start(b.y1 as i64 - (p - 1 - m) as i64, p, h);
        let origin = |c: Provenance| match c {
            Provenance::CornerTl => (left, top),
            Provenance::CornerTr => (right, top),
            Provenance::CornerBl => (left, bottom),
            Provenance::CornerBr => (right, bottom),
            Provenance::Centered => unreachable!(),
        };
        let [a, b2, c, d] = Provenance::CORNERS.map(|c| self.record(index, origin(c), c));
        Ok([a?, b2?, c?, d?])
    }

    /// Centered patches plus, when `augment` is set, their corner
    /// translations. Annotations too large for corner placement keep only
    /// their centered patch and add a warning.
    pub fn extract_all(&self, augment: bool) -> Result<Extraction> {
        let mut base = self.extract_patches()?;
        if !augment {
            return Ok(base);
        }
        let corners: Vec<Result<[PatchRecord; 4]>> = base
            .records
            .par_iter()
            .map(|r| self.corner_translate_augment(r))
            .collect();
        let mut records = Vec::with_capacity(base.records.len() * 5);
        for (r, c) in base.records.into_iter().zip(corners) {
            let index = r.annotation_index;
            records.push(r);
            match c {
                Ok(four) => records.extend(four),
                Err(e @ Error::AnnotationTooLarge { .. }) => base.warnings.push(format!(
                    "{}: annotation {index} not augmented: {e}",
                    self.set.subject_id
                )),
                Err(e) => return Err(e),
            }
        }
        base.records = records;
        Ok(base)
    }
}

/// Convenience wrapper: centered patches of `patch`×`patch` pixels.
pub fn extract_patches(slide: &PlanarImage, set: &AnnotationSet, patch: usize) -> Result<Extraction> {
    PatchSource::new(slide, set, patch)?.extract_patches()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::annotation::Annotation;
    use crate::raster::ColorSpace;

    fn square(x: f64, y: f64, side: f64) -> Annotation {
        Annotation {
            label: "plaque".into(),
            id: None,
            polygon: vec![[x, y], [x + side, y], [x + side, y + side], [x, y + side]],
        }
    }

    fn slide(w: usize, h: usize) -> PlanarImage {
        let data: Vec<u8> = (0..w * h * 3).map(|i| (i % 251) as u8).collect();
        PlanarImage::from_interleaved(w, h, ColorSpace::Rgb8, &data).unwrap()
    }

    fn set(annotations: Vec<Annotation>) -> AnnotationSet {
        AnnotationSet {
            subject_id: "S".into(),
            annotations,
        }
    }

    fn mask_box(m: &PlanarImage) -> Option<PixelBox> {
        let p = m.plane_u8(0).unwrap();
        let px: Vec<(usize, usize)> = (0..p.len())
            .filter(|&i| p[i] != 0)
            .map(|i| (i % m.width(), i / m.width()))
            .collect();
        PixelBox::of(&px)
    }

    #[test]
    fn centered_plaque_sits_in_the_middle() {
        let s = slide(600, 500);
        let a = set(vec![square(290.0, 240.0, 19.0)]);
        let out = extract_patches(&s, &a, PATCH_SIZE).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        let b = mask_box(&r.mask).unwrap();
        let (cx, cy) = ((b.x0 + b.x1) as f64 / 2.0, (b.y0 + b.y1) as f64 / 2.0);
        assert!((cx - 128.0).abs() <= 0.5 && (cy - 128.0).abs() <= 0.5, "{b:?}");
        assert_eq!(r.image, s.crop(r.origin.0, r.origin.1, 256, 256).unwrap());
    }

    #[test]
    fn window_clamps_at_the_left_edge() {
        let s = slide(600, 500);
        let a = set(vec![square(10.0, 240.0, 12.0)]);
        let r = &extract_patches(&s, &a, PATCH_SIZE).unwrap().records[0];
        assert_eq!(r.origin.0, 0);
        let b = mask_box(&r.mask).unwrap();
        assert_eq!(b.x0, 10);
    }

    #[test]
    fn one_patch_per_annotation() {
        let s = slide(800, 800);
        let anns: Vec<_> = (0..9)
            .map(|i| square(50.0 + 80.0 * i as f64, 40.0 + 75.0 * i as f64, 15.0))
            .collect();
        let out = extract_patches(&s, &set(anns), PATCH_SIZE).unwrap();
        assert_eq!(out.records.len(), 9);
        for r in &out.records {
            assert!(r.mask.plane_u8(0).unwrap().contains(&255));
            assert_eq!((r.image.width(), r.image.height()), (256, 256));
        }
    }

    #[test]
    fn small_slide_is_rejected() {
        let s = slide(200, 300);
        let a = set(vec![square(10.0, 10.0, 5.0)]);
        assert!(matches!(
            extract_patches(&s, &a, PATCH_SIZE),
            Err(Error::SlideTooSmall { .. })
        ));
    }

    #[test]
    fn corners_touch_their_insets() {
        let s = slide(1000, 1000);
        let a = set(vec![square(490.0, 490.0, 19.0)]);
        let src = PatchSource::new(&s, &a, PATCH_SIZE).unwrap();
        let centered = src.centered(0).unwrap();
        let four = src.corner_translate_augment(&centered).unwrap();
        let (lo, hi) = (CORNER_MARGIN, PATCH_SIZE - 1 - CORNER_MARGIN);
        let expect = [(lo, lo, true, true), (hi, lo, false, true), (lo, hi, true, false), (hi, hi, false, false)];
        for (r, (ex, ey, left, top)) in four.iter().zip(expect) {
            let b = mask_box(&r.mask).unwrap();
            assert_eq!(if left { b.x0 } else { b.x1 }, ex, "{:?}", r.provenance);
            assert_eq!(if top { b.y0 } else { b.y1 }, ey, "{:?}", r.provenance);
            assert_eq!(r.image, s.crop(r.origin.0, r.origin.1, 256, 256).unwrap());
        }
        let ids: std::collections::BTreeSet<_> = four.iter().map(|r| &r.patch_id).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn corner_windows_clamp_near_the_slide_corner() {
        let s = slide(300, 300);
        let a = set(vec![square(2.0, 2.0, 10.0)]);
        let src = PatchSource::new(&s, &a, PATCH_SIZE).unwrap();
        let four = src.corner_translate_augment(&src.centered(0).unwrap()).unwrap();
        assert_eq!(four.len(), 4);
        assert!(four.iter().all(|r| r.origin == (0, 0)));
    }

    #[test]
    fn oversized_annotation_is_not_augmented() {
        let s = slide(1000, 1000);
        let a = set(vec![square(100.0, 100.0, 300.0), square(600.0, 600.0, 20.0)]);
        let src = PatchSource::new(&s, &a, PATCH_SIZE).unwrap();
        assert!(matches!(
            src.corner_translate_augment(&src.centered(0).unwrap()),
            Err(Error::AnnotationTooLarge { .. })
        ));
        let all = src.extract_all(true).unwrap();
        assert_eq!(all.records.len(), 1 + 5);
        assert_eq!(all.warnings.len(), 1);
    }

    #[test]
    fn augmentation_is_fourfold() {
        let s = slide(900, 700);
        let anns: Vec<_> = (0..6)
            .map(|i| square(30.0 + 140.0 * i as f64, 60.0 + 100.0 * i as f64, 8.0 + 5.0 * i as f64))
            .collect();
        let a = set(anns);
        let src = PatchSource::new(&s, &a, PATCH_SIZE).unwrap();
        let all = src.extract_all(true).unwrap();
        let centered = all.records.iter().filter(|r| r.provenance == Provenance::Centered).count();
        assert_eq!(all.records.len() - centered, 4 * centered);
    }

    #[test]
    fn extraction_is_reproducible() {
        let s = slide(700, 700);
        let a = set(vec![square(100.0, 200.0, 30.0), square(500.0, 400.0, 25.0)]);
        let x = PatchSource::new(&s, &a, PATCH_SIZE).unwrap().extract_all(true).unwrap();
        let y = PatchSource::new(&s, &a, PATCH_SIZE).unwrap().extract_all(true).unwrap();
        assert_eq!(x.records, y.records);
    }
}
