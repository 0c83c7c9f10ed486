//! Deterministic synthetic stained images with known ground truth, used by
//! tests, benchmarks and fixture generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::patch::{contains_point, Annotation, AnnotationSet};
use crate::raster::{ColorSpace, PlanarImage, DEFAULT_BACKGROUND_INTENSITY};
use crate::stain::{reconstruct, ConcentrationMap, StainMatrix};

/// Typical hematoxylin and DAB optical-density directions.
pub fn reference_basis() -> StainMatrix {
    StainMatrix::from_raw([0.65, 0.70, 0.29], [0.27, 0.57, 0.78]).expect("valid basis")
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image: PlanarImage,
    /// Exact concentrations the image was rendered from.
    pub concentrations: ConcentrationMap,
}

fn render(
    width: usize,
    height: usize,
    basis: &StainMatrix,
    values: Vec<[f64; 2]>,
) -> SynthImage {
    let concentrations = ConcentrationMap::new(width, height, values).expect("valid concentrations");
    let image =
        reconstruct(&concentrations, basis, DEFAULT_BACKGROUND_INTENSITY).expect("valid render");
    SynthImage {
        image,
        concentrations,
    }
}

/// Pixels are background, pure stain 0, pure stain 1 or a mixture, with
/// concentrations drawn from `0.3..1.5`.
pub fn two_stain_image(width: usize, height: usize, basis: &StainMatrix, seed: u64) -> SynthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..width * height)
        .map(|_| {
            let kind: f64 = rng.random();
            let mut c = || rng.random_range(0.3..1.5);
            if kind < 0.15 {
                [0.0, 0.0]
            } else if kind < 0.40 {
                [c(), 0.0]
            } else if kind < 0.65 {
                [0.0, c()]
            } else {
                [c(), c()]
            }
        })
        .collect();
    render(width, height, basis, values)
}

/// Every tissue pixel lies on the single OD ray `direction`.
pub fn single_stain_image(width: usize, height: usize, direction: [f64; 3], seed: u64) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut planes: Vec<Vec<u8>> = (0..3).map(|_| Vec::with_capacity(width * height)).collect();
    for _ in 0..width * height {
        let c = if rng.random_bool(0.1) {
            0.0
        } else {
            rng.random_range(0.3..1.5)
        };
        for (ch, plane) in planes.iter_mut().enumerate() {
            plane.push(crate::raster::od_to_intensity(
                direction[ch] / n * c,
                DEFAULT_BACKGROUND_INTENSITY,
            ));
        }
    }
    PlanarImage::from_u8_planes(width, height, ColorSpace::Rgb8, planes).expect("valid image")
}

/// A basis rotated a random few degrees away from [`reference_basis`].
pub fn jittered_basis(rng: &mut impl Rng) -> StainMatrix {
    let [a, b] = reference_basis().columns();
    let mut jitter = |v: [f64; 3]| v.map(|x| (x + rng.random_range(-0.08..0.08)).max(0.01));
    StainMatrix::from_raw(jitter(a), jitter(b)).expect("valid basis")
}

/// A two-stain image with a randomly jittered basis and random stain mix.
pub fn random_tissue_image(width: usize, height: usize, seed: u64) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = jittered_basis(&mut rng);
    let h_bias = rng.random_range(0.4..1.6);
    let d_bias = rng.random_range(0.4..1.6);
    let values = (0..width * height)
        .map(|_| {
            if rng.random_bool(0.1) {
                [0.0, 0.0]
            } else {
                let h: f64 = rng.random_range(0.0..1.2) * h_bias;
                let d: f64 = rng.random_range(0.0..1.2) * d_bias;
                let mask: u8 = rng.random_range(0..3);
                match mask {
                    0 => [h.max(0.2), 0.0],
                    1 => [0.0, d.max(0.2)],
                    _ => [h, d],
                }
            }
        })
        .collect();
    render(width, height, &basis, values).image
}

/// Star-shaped outline around `center` with `k` vertices.
fn blob_outline(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64, k: usize) -> Vec<[f64; 2]> {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    (0..k)
        .map(|i| {
            let t = phase + std::f64::consts::TAU * i as f64 / k as f64;
            let r = radius * rng.random_range(0.7..1.0);
            [
                ((center[0] + r * t.cos()) * 4.0).round() / 4.0,
                ((center[1] + r * t.sin()) * 4.0).round() / 4.0,
            ]
        })
        .collect()
}

/// A DAB-stained section with `plaques` dark annotated plaques on pale,
/// hematoxylin-counterstained tissue with scattered nuclei. Plaques keep at
/// least `2·radius + 8` pixels between centers; fewer are placed if the
/// slide runs out of room.
pub fn plaque_slide(
    width: usize,
    height: usize,
    plaques: usize,
    subject: &str,
    seed: u64,
) -> (PlanarImage, AnnotationSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = reference_basis();
    let mut values: Vec<[f64; 2]> = (0..width * height)
        .map(|_| [rng.random_range(0.08..0.22), rng.random_range(0.0..0.05)])
        .collect();

    let nuclei = width * height / 900;
    for _ in 0..nuclei {
        let (cx, cy) = (rng.random_range(0.0..width as f64), rng.random_range(0.0..height as f64));
        let r: f64 = rng.random_range(2.0..4.5);
        let c = rng.random_range(0.45..0.85);
        let (x0, x1) = ((cx - r).floor().max(0.0) as usize, ((cx + r).ceil() as usize).min(width - 1));
        let (y0, y1) = ((cy - r).floor().max(0.0) as usize, ((cy + r).ceil() as usize).min(height - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r {
                    values[y * width + x][0] = c;
                }
            }
        }
    }

    let mut placed: Vec<([f64; 2], f64)> = Vec::new();
    let mut annotations = Vec::new();
    let mut attempts = 0;
    while annotations.len() < plaques && attempts < plaques * 200 {
        attempts += 1;
        let radius: f64 = rng.random_range(9.0..26.0);
        let margin = radius + 2.0;
        if width as f64 <= 2.0 * margin || height as f64 <= 2.0 * margin {
            break;
        }
        let center = [
            rng.random_range(margin..width as f64 - margin),
            rng.random_range(margin..height as f64 - margin),
        ];
        let clear = placed.iter().all(|(c, r)| {
            ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt() > r + radius + 8.0
        });
        if !clear {
            continue;
        }
        let k = rng.random_range(9..15);
        let polygon = blob_outline(&mut rng, center, radius, k);
        let (x0, x1) = ((center[0] - radius).floor() as usize, (center[0] + radius).ceil() as usize);
        let (y0, y1) = ((center[1] - radius).floor() as usize, (center[1] + radius).ceil() as usize);
        for y in y0..=y1.min(height - 1) {
            for x in x0..=x1.min(width - 1) {
                if contains_point(&polygon, [x as f64, y as f64]) {
                    let d = ((x as f64 - center[0]).powi(2) + (y as f64 - center[1]).powi(2)).sqrt();
                    let core = 1.0 - (d / radius).min(1.0);
                    let v = &mut values[y * width + x];
                    v[1] = 1.2 + 0.5 * core + rng.random_range(0.0..0.3);
                    v[0] = v[0].min(0.2);
                }
            }
        }
        placed.push((center, radius));
        annotations.push(Annotation {
            label: "plaque".into(),
            id: Some(annotations.len().to_string()),
            polygon,
        });
    }
    let image = render(width, height, &basis, values).image;
    (
        image,
        AnnotationSet {
            subject_id: subject.to_string(),
            annotations,
        },
    )
}
