use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metrics::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl FromStr for Connectivity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {other:?}"
            ))),
        }
    }
}

/// Component labeling of a mask. Ids run `1..=count` in raster order of
/// each component's first pixel; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// Pixel indices (`y * width + x`) of component `id` at position `id - 1`.
    pub pixels: Vec<Vec<usize>>,
}

impl LabeledComponents {
    pub fn count(&self) -> usize {
        self.pixels.len()
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi as usize] = lo;
    }
}

/// Two-pass labeling with union-find.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabeledComponents {
    let (w, h) = (mask.width(), mask.height());
    let mut provisional = vec![0u32; w * h];
    // slot 0 is unused so provisional label 0 can mean background
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut n = 0;
            let mut look = |nx: usize, ny: usize| {
                let l = provisional[ny * w + nx];
                if l != 0 {
                    neighbors[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                look(x - 1, y);
            }
            if y > 0 {
                look(x, y - 1);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        look(x - 1, y - 1);
                    }
                    if x + 1 < w {
                        look(x + 1, y - 1);
                    }
                }
            }
            let label = if n == 0 {
                let id = parent.len() as u32;
                parent.push(id);
                id
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    union(&mut parent, first, other);
                }
                first
            };
            provisional[y * w + x] = label;
        }
    }

    let mut final_id = vec![0u32; parent.len()];
    let mut labels = vec![0u32; w * h];
    let mut pixels: Vec<Vec<usize>> = Vec::new();
    for (i, &p) in provisional.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if final_id[root] == 0 {
            pixels.push(Vec::new());
            final_id[root] = pixels.len() as u32;
        }
        let id = final_id[root];
        labels[i] = id;
        pixels[id as usize - 1].push(i);
    }
    LabeledComponents {
        width: w,
        height: h,
        labels,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    /// Breadth-first flood fill started from each unvisited pixel in raster order.
    fn flood_fill(mask: &BinaryMask, connectivity: Connectivity) -> Vec<u32> {
        let (w, h) = (mask.width() as i64, mask.height() as i64);
        let mut labels = vec![0u32; (w * h) as usize];
        let mut next = 0;
        let steps: &[(i64, i64)] = match connectivity {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        };
        for start in 0..(w * h) {
            let (sx, sy) = (start % w, start / w);
            if !mask.get(sx as usize, sy as usize) || labels[start as usize] != 0 {
                continue;
            }
            next += 1;
            labels[start as usize] = next;
            let mut queue = VecDeque::from([(sx, sy)]);
            while let Some((x, y)) = queue.pop_front() {
                for (dx, dy) in steps {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let i = (ny * w + nx) as usize;
                    if mask.get(nx as usize, ny as usize) && labels[i] == 0 {
                        labels[i] = next;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
        labels
    }

    #[test]
    fn diagonal_neighbors() {
        let mut m = BinaryMask::empty(3, 3);
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(connected_components(&m, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).count(), 2);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let c = connected_components(&BinaryMask::empty(4, 4), Connectivity::Eight);
        assert_eq!(c.count(), 0);
        assert!(c.labels.iter().all(|l| *l == 0));
    }

    #[test]
    fn u_shape_merges_late() {
        // two arms that only join on the last row
        let rows = ["x.x", "x.x", "xxx"];
        let mut m = BinaryMask::empty(3, 3);
        for (y, r) in rows.iter().enumerate() {
            for (x, ch) in r.chars().enumerate() {
                m.set(x, y, ch == 'x');
            }
        }
        let c = connected_components(&m, Connectivity::Four);
        assert_eq!(c.count(), 1);
        assert_eq!(c.pixels[0].len(), 7);
    }

    proptest! {
        #[test]
        fn matches_flood_fill(
            bits in prop::collection::vec(prop::bool::weighted(0.45), 32 * 32),
            eight in any::<bool>(),
        ) {
            let m = BinaryMask::new(32, 32, bits).unwrap();
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let c = connected_components(&m, conn);
            prop_assert_eq!(&c.labels, &flood_fill(&m, conn));
            let total: usize = c.pixels.iter().map(Vec::len).sum();
            prop_assert_eq!(total, m.count());
        }
    }
}
