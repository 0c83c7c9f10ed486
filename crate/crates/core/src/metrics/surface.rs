use crate::error::Result;
use crate::metrics::mask::BinaryMask;

/// Foreground pixels `(x, y)` with a background 4-neighbor; pixels on the
/// image border always qualify.
pub fn surface_points(mask: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// Stand-in for infinity that keeps the parabola arithmetic finite.
const FAR: f64 = 1e20;

/// Lower envelope of parabolas: squared distance transform of one line.
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * (qf - p));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest seed.
pub(crate) fn squared_distance_transform(
    width: usize,
    height: usize,
    seeds: &[(usize, usize)],
) -> Vec<f64> {
    let mut grid = vec![FAR; width * height];
    for &(x, y) in seeds {
        grid[y * width + x] = 0.0;
    }
    let n = width.max(height);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        dt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        dt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

fn directed_mean(from: &[(usize, usize)], dt: &[f64], width: usize) -> f64 {
    let total: f64 = from.iter().map(|&(x, y)| dt[y * width + x].sqrt()).sum();
    total / from.len() as f64
}

/// Symmetric mean absolute surface distance in pixels. `None` when either
/// mask has no surface, i.e. is empty.
pub fn masd(pred: &BinaryMask, gt: &BinaryMask) -> Result<Option<f64>> {
    pred.check_same_size(gt)?;
    let (sp, sg) = (surface_points(pred), surface_points(gt));
    if sp.is_empty() || sg.is_empty() {
        return Ok(None);
    }
    let (w, h) = (pred.width(), pred.height());
    let to_g = squared_distance_transform(w, h, &sg);
    let to_p = squared_distance_transform(w, h, &sp);
    Ok(Some(0.5 * (directed_mean(&sp, &to_g, w) + directed_mean(&sg, &to_p, w))))
}
