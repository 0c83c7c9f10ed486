//! Sparse non-negative factorization `OD ≈ W·H` for stain separation.
//!
//! Objective: `½‖V − WH‖²_F + λ·Σ H` with `W` (3×2) kept at unit column norm.
//! `H` takes the ℓ1-penalized multiplicative update; `W` takes the standard
//! multiplicative update followed by column renormalization, backtracked
//! toward the previous `W` whenever renormalization would raise the
//! objective. Either step is rejected outright if it fails to decrease the
//! objective, so the recorded sequence never increases.

use crate::error::{Error, Result};
use crate::raster::PlanarImage;
use crate::stain::deconv::Nnls2;
use crate::stain::macenko::estimate_stains_macenko;
use crate::stain::{
    angle_deg, deconvolve, od_pixels, tissue_pixels, ConcentrationMap, StainMatrix, StainParams,
    MIN_TISSUE_PIXELS,
};

/// Initial concentrations are floored here so multiplicative updates can move them.
const H_FLOOR: f64 = 1e-4;
const MAX_BACKTRACK: usize = 20;

#[derive(Debug, Clone)]
pub struct SnmfFactorization {
    pub stains: StainMatrix,
    /// 2×N coefficients of the factorized pixels.
    pub coefficients: Vec<[f64; 2]>,
    /// Objective before the first iteration followed by one value per iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖V − WH‖_F / ‖V‖_F` at the returned iterate.
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct SnmfFit {
    pub stains: StainMatrix,
    /// Concentrations of every image pixel against the recovered basis.
    pub concentrations: ConcentrationMap,
    pub factorization: SnmfFactorization,
}

struct Problem<'a> {
    v: &'a [[f64; 3]],
    lambda: f64,
    /// tr(VᵀV)
    v_energy: f64,
}

impl Problem<'_> {
    fn reconstruction(&self, w: &[[f64; 3]; 2], h: &[[f64; 2]]) -> f64 {
        self.v
            .iter()
            .zip(h)
            .map(|(v, c)| {
                (0..3)
                    .map(|i| (v[i] - w[0][i] * c[0] - w[1][i] * c[1]).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    fn objective(&self, w: &[[f64; 3]; 2], h: &[[f64; 2]]) -> f64 {
        let penalty: f64 = h.iter().map(|c| c[0] + c[1]).sum();
        0.5 * self.reconstruction(w, h) + self.lambda * penalty
    }
}

/// Sufficient statistics for the W step with H fixed: `A = V Hᵀ`, `S = H Hᵀ`.
struct WStats {
    a: [[f64; 3]; 2],
    s: [[f64; 2]; 2],
}

impl WStats {
    fn new(v: &[[f64; 3]], h: &[[f64; 2]]) -> Self {
        let mut a = [[0.0; 3]; 2];
        let mut s = [[0.0; 2]; 2];
        for (v, c) in v.iter().zip(h) {
            for k in 0..2 {
                for i in 0..3 {
                    a[k][i] += v[i] * c[k];
                }
                for l in 0..2 {
                    s[k][l] += c[k] * c[l];
                }
            }
        }
        WStats { a, s }
    }

    /// ½‖V − WH‖² from the statistics alone.
    fn half_reconstruction(&self, v_energy: f64, w: &[[f64; 3]; 2]) -> f64 {
        let mut cross = 0.0;
        let mut quad = 0.0;
        for k in 0..2 {
            cross += (0..3).map(|i| w[k][i] * self.a[k][i]).sum::<f64>();
            for l in 0..2 {
                let g: f64 = (0..3).map(|i| w[k][i] * w[l][i]).sum();
                quad += g * self.s[k][l];
            }
        }
        0.5 * (v_energy - 2.0 * cross + quad)
    }
}

fn normalize_columns(w: [[f64; 3]; 2]) -> Option<[[f64; 3]; 2]> {
    let mut out = w;
    for col in &mut out {
        let n = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        *col = col.map(|x| x / n);
    }
    Some(out)
}

fn h_step(w: &[[f64; 3]; 2], v: &[[f64; 3]], h: &[[f64; 2]], lambda: f64) -> Vec<[f64; 2]> {
    let g00 = w[0].iter().map(|x| x * x).sum::<f64>();
    let g11 = w[1].iter().map(|x| x * x).sum::<f64>();
    let g01 = (0..3).map(|i| w[0][i] * w[1][i]).sum::<f64>();
    v.iter()
        .zip(h)
        .map(|(v, c)| {
            let r0 = (0..3).map(|i| w[0][i] * v[i]).sum::<f64>();
            let r1 = (0..3).map(|i| w[1][i] * v[i]).sum::<f64>();
            let d0 = g00 * c[0] + g01 * c[1] + lambda;
            let d1 = g01 * c[0] + g11 * c[1] + lambda;
            [
                if d0 > 0.0 { c[0] * r0 / d0 } else { 0.0 },
                if d1 > 0.0 { c[1] * r1 / d1 } else { 0.0 },
            ]
        })
        .collect()
}

fn w_multiplicative(w: &[[f64; 3]; 2], st: &WStats) -> [[f64; 3]; 2] {
    let mut out = *w;
    for k in 0..2 {
        for i in 0..3 {
            let denom = w[0][i] * st.s[0][k] + w[1][i] * st.s[1][k];
            out[k][i] = if denom > 0.0 { w[k][i] * st.a[k][i] / denom } else { 0.0 };
        }
    }
    out
}

/// Factorizes the OD vectors `v` starting from basis `init`.
pub fn snmf_factorize(
    v: &[[f64; 3]],
    init: &StainMatrix,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SnmfFactorization> {
    if v.is_empty() {
        return Err(Error::InsufficientTissue {
            found: 0,
            required: MIN_TISSUE_PIXELS,
        });
    }
    if v.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidData("OD samples must be finite and non-negative".into()));
    }
    let problem = Problem {
        v,
        lambda,
        v_energy: v.iter().flatten().map(|x| x * x).sum(),
    };

    let mut w = init.columns();
    let nnls = Nnls2::new(init);
    let mut h: Vec<[f64; 2]> = v
        .iter()
        .map(|b| nnls.solve(*b).map(|c| c.max(H_FLOOR)))
        .collect();
    let mut f = problem.objective(&w, &h);
    let mut objective = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        let f_start = f;

        let h_new = h_step(&w, v, &h, lambda);
        let f_h = problem.objective(&w, &h_new);
        if f_h <= f {
            h = h_new;
            f = f_h;
        }

        let st = WStats::new(v, &h);
        let base = st.half_reconstruction(problem.v_energy, &w);
        let proposal = w_multiplicative(&w, &st);
        let mut t = 1.0;
        for _ in 0..MAX_BACKTRACK {
            let mixed = [0, 1].map(|k| [0, 1, 2].map(|i| (1.0 - t) * w[k][i] + t * proposal[k][i]));
            if let Some(cand) = normalize_columns(mixed) {
                if st.half_reconstruction(problem.v_energy, &cand) <= base {
                    let f_w = problem.objective(&cand, &h);
                    if f_w <= f {
                        w = cand;
                        f = f_w;
                        break;
                    }
                }
            }
            t *= 0.5;
        }

        objective.push(f);
        let scale = f_start.abs().max(f64::MIN_POSITIVE);
        if (f_start - f) / scale < tol {
            converged = true;
            break;
        }
    }

    let recon = problem.reconstruction(&w, &h);
    let relative_error = if problem.v_energy > 0.0 {
        (recon / problem.v_energy).sqrt()
    } else {
        0.0
    };
    let stains = StainMatrix::from_raw(w[0], w[1])?;
    // keep coefficients aligned with the (possibly swapped) columns
    let swapped = angle_deg(stains.column(0), w[1]) < angle_deg(stains.column(0), w[0]);
    let coefficients = if swapped {
        h.iter().map(|c| [c[1], c[0]]).collect()
    } else {
        h
    };
    stains.check_invariants();
    Ok(SnmfFactorization {
        stains,
        coefficients,
        objective,
        iterations,
        converged,
        relative_error,
    })
}

/// Vahadane-style estimate: SNMF on (a strided subsample of) the tissue OD,
/// initialized from the Macenko basis, followed by NNLS concentrations for
/// every pixel against the recovered basis.
pub fn estimate_stains_snmf(img: &PlanarImage, params: &StainParams) -> Result<SnmfFit> {
    params.validate()?;
    let init = estimate_stains_macenko(img, params)?;
    let od = od_pixels(img, params.background_intensity)?;
    let tissue = tissue_pixels(&od, params.od_threshold);
    let sample: Vec<[f64; 3]> = if tissue.len() > params.snmf_max_pixels {
        let m = params.snmf_max_pixels;
        (0..m).map(|i| tissue[i * tissue.len() / m]).collect()
    } else {
        tissue
    };
    let factorization = snmf_factorize(
        &sample,
        &init,
        params.snmf_lambda,
        params.snmf_max_iters,
        params.snmf_tol,
    )?;
    let stains = factorization.stains;
    let concentrations = deconvolve(img, &stains, params.background_intensity)?;
    Ok(SnmfFit {
        stains,
        concentrations,
        factorization,
    })
}
