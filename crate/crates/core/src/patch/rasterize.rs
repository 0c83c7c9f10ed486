use crate::error::Result;
use crate::patch::annotation::{polygon_area, AnnotationSet};
use crate::raster::PlanarImage;

/// Mask value of annotated pixels.
pub const MASK_ON: u8 = 255;

fn on_edge(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    cross == 0.0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Even-odd inclusion of point `p`; points exactly on the outline count as inside.
pub fn contains_point(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if on_edge(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Pixels `(x, y)` of a `width`×`height` raster whose centers lie in `poly`.
/// Zero-area outlines cover nothing.
pub fn polygon_pixels(poly: &[[f64; 2]], width: usize, height: usize) -> Vec<(usize, usize)> {
    if poly.len() < 3 || polygon_area(poly) == 0.0 || width == 0 || height == 0 {
        return Vec::new();
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for v in poly {
        x0 = x0.min(v[0]);
        y0 = y0.min(v[1]);
        x1 = x1.max(v[0]);
        y1 = y1.max(v[1]);
    }
    // clip the scan window to the raster
    let lo = |v: f64| v.ceil().max(0.0);
    let (cx0, cy0) = (lo(x0), lo(y0));
    let (cx1, cy1) = (x1.floor().min(width as f64 - 1.0), y1.floor().min(height as f64 - 1.0));
    if cx0 > cx1 || cy0 > cy1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for y in cy0 as usize..=cy1 as usize {
        for x in cx0 as usize..=cx1 as usize {
            if contains_point(poly, [x as f64, y as f64]) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Union of every annotation's fill as a `{0, 255}` gray mask.
pub fn rasterize_mask(set: &AnnotationSet, width: usize, height: usize) -> Result<PlanarImage> {
    let mut data = vec![0u8; width * height];
    for a in &set.annotations {
        for (x, y) in polygon_pixels(&a.polygon, width, height) {
            data[y * width + x] = MASK_ON;
        }
    }
    PlanarImage::gray_u8(width, height, data)
}
