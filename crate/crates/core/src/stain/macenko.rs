use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::raster::PlanarImage;
use crate::stain::{dot3, od_pixels, tissue_pixels, StainMatrix, StainParams, MIN_TISSUE_PIXELS};
use crate::stats::percentile_in_place;

/// Top-two right singular directions of the tissue OD matrix, i.e. the
/// leading eigenvectors of `Σ od·odᵀ`.
pub(crate) fn principal_plane(tissue: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let mut gram = Matrix3::<f64>::zeros();
    for v in tissue {
        let v = Vector3::from(*v);
        gram += v * v.transpose();
    }
    let eig = SymmetricEigen::new(gram);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let col = |i: usize| {
        let c = eig.eigenvectors.column(order[i]);
        let v = [c[0], c[1], c[2]];
        if v.iter().sum::<f64>() < 0.0 {
            v.map(|x| -x)
        } else {
            v
        }
    };
    (col(0), col(1))
}

/// Macenko estimate: project tissue OD onto the principal plane and take the
/// `alpha` / `100 − alpha` percentile angles as the two stain directions.
pub fn estimate_stains_macenko(img: &PlanarImage, params: &StainParams) -> Result<StainMatrix> {
    params.validate()?;
    let od = od_pixels(img, params.background_intensity)?;
    let tissue = tissue_pixels(&od, params.od_threshold);
    if tissue.len() < MIN_TISSUE_PIXELS {
        return Err(Error::InsufficientTissue {
            found: tissue.len(),
            required: MIN_TISSUE_PIXELS,
        });
    }
    let (v1, v2) = principal_plane(&tissue);
    let mut angles: Vec<f64> = tissue
        .iter()
        .map(|p| dot3(*p, v2).atan2(dot3(*p, v1)))
        .collect();
    let lo = percentile_in_place(&mut angles, params.alpha_percentile);
    let hi = percentile_in_place(&mut angles, 100.0 - params.alpha_percentile);
    let direction = |t: f64| {
        let (s, c) = t.sin_cos();
        [0, 1, 2].map(|i| c * v1[i] + s * v2[i])
    };
    let stains = StainMatrix::from_raw(direction(lo), direction(hi))?;
    stains.check_invariants();
    Ok(stains)
}
