use crate::error::{Error, Result};
use crate::raster::{ColorSpace, PlanarImage};

/// Gray values above this are foreground when reading mask images.
pub const FOREGROUND_THRESHOLD: u8 = 127;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask values for {width}x{height}",
                data.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    /// Foreground wherever the gray value exceeds [`FOREGROUND_THRESHOLD`].
    pub fn from_image(img: &PlanarImage) -> Result<Self> {
        img.expect_space(ColorSpace::Gray)?;
        let data = match img.plane_u8(0) {
            Some(p) => p.iter().map(|&v| v > FOREGROUND_THRESHOLD).collect(),
            None => img
                .plane_f64(0)
                .expect("gray plane")
                .iter()
                .map(|&v| v > f64::from(FOREGROUND_THRESHOLD))
                .collect(),
        };
        BinaryMask::new(img.width(), img.height(), data)
    }

    /// `{0, 255}` gray image.
    pub fn to_image(&self) -> PlanarImage {
        let data = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        PlanarImage::gray_u8(self.width, self.height, data).expect("matching size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|b| *b)
    }

    pub(crate) fn check_same_size(&self, other: &BinaryMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch(format!(
                "masks are {}x{} and {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// `2|P∩G| / (|P| + |G|)`, and 1 when both masks are empty.
pub fn dice_score(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.check_same_size(gt)?;
    let (mut inter, mut total) = (0usize, 0usize);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        inter += usize::from(p && g);
        total += usize::from(p) + usize::from(g);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: usize, h: usize, x0: usize, y0: usize, bw: usize, bh: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(w, h);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                m.set(x, y, true);
            }
        }
        m
    }

    #[test]
    fn dice_examples() {
        let a = block(8, 8, 2, 2, 2, 2);
        assert_eq!(dice_score(&a, &a).unwrap(), 1.0);
        assert_eq!(dice_score(&a, &block(8, 8, 5, 5, 2, 2)).unwrap(), 0.0);
        assert_eq!(dice_score(&a, &block(8, 8, 3, 2, 2, 2)).unwrap(), 0.5);
        let e = BinaryMask::empty(8, 8);
        assert_eq!(dice_score(&e, &e).unwrap(), 1.0);
        assert_eq!(dice_score(&e, &a).unwrap(), 0.0);
    }

    #[test]
    fn dice_rejects_size_mismatch() {
        assert!(matches!(
            dice_score(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 4)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn image_round_trip() {
        let m = block(5, 4, 1, 1, 3, 2);
        assert_eq!(BinaryMask::from_image(&m.to_image()).unwrap(), m);
        let gray = PlanarImage::gray_u8(2, 1, vec![127, 128]).unwrap();
        assert_eq!(BinaryMask::from_image(&gray).unwrap().data(), &[false, true]);
    }
}
