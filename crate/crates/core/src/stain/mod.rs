//! Stain normalization: Reinhard statistics transfer, and three methods that
//! work on a two-stain optical-density basis (Macenko, Vahadane/SNMF and
//! complement-based color deconvolution).

mod deconv;
mod macenko;
mod reinhard;
mod snmf;

pub use deconv::{deconvolve, deconvolve_complement, deconvolve_od, reconstruct};
pub use macenko::estimate_stains_macenko;
pub use reinhard::{reinhard_normalize, reinhard_transfer};
pub use snmf::{estimate_stains_snmf, snmf_factorize, SnmfFit};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    optical_density, rgb_to_decorrelated_lab, ChannelStats, ColorSpace, IntensityTable, PlanarImage,
    Planes,
    DEFAULT_BACKGROUND_INTENSITY,
};

/// Minimum number of tissue pixels a basis estimate needs.
pub const MIN_TISSUE_PIXELS: usize = 100;

/// Columns closer than this are treated as parallel by deconvolution.
pub const SINGULAR_ANGLE_RAD: f64 = 1e-6;

/// Targets and sources whose two stain columns are closer than this (degrees)
/// carry no usable two-stain signal.
pub const MIN_STAIN_SEPARATION_DEG: f64 = 1.0;

/// Targets whose RGB channels all have a standard deviation below this
/// (8-bit units) are rejected as near-constant.
pub const MIN_TARGET_STD: f64 = 1.0;

/// Percentile used to match concentration ranges between source and target.
pub const CONCENTRATION_PERCENTILE: f64 = 99.0;

const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Reinhard,
    Macenko,
    Vahadane,
    ColorDeconv,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Reinhard,
        Method::Macenko,
        Method::Vahadane,
        Method::ColorDeconv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Reinhard => "reinhard",
            Method::Macenko => "macenko",
            Method::Vahadane => "vahadane",
            Method::ColorDeconv => "color_deconv",
        }
    }

    /// Label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Reinhard => "Reinhard",
            Method::Macenko => "Macenko",
            Method::Vahadane => "Vahadane",
            Method::ColorDeconv => "HistomicsTK",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "reinhard" => Ok(Method::Reinhard),
            "macenko" => Ok(Method::Macenko),
            "vahadane" | "snmf" => Ok(Method::Vahadane),
            "color_deconv" | "colordeconv" | "histomicstk" | "deconv" => Ok(Method::ColorDeconv),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization method {other:?}"
            ))),
        }
    }
}

/// Tunables of the stain estimators. Serialized into every fitted target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StainParams {
    pub background_intensity: f64,
    /// Macenko: percentile of the angle distribution taken as the extremes.
    pub alpha_percentile: f64,
    /// Pixels whose OD vector norm does not exceed this are background.
    pub od_threshold: f64,
    pub snmf_lambda: f64,
    pub snmf_max_iters: usize,
    pub snmf_tol: f64,
    /// SNMF factorizes at most this many tissue pixels (evenly strided).
    pub snmf_max_pixels: usize,
}

impl Default for StainParams {
    fn default() -> Self {
        StainParams {
            background_intensity: DEFAULT_BACKGROUND_INTENSITY,
            alpha_percentile: 1.0,
            od_threshold: 0.15,
            snmf_lambda: 0.1,
            snmf_max_iters: 200,
            snmf_tol: 1e-4,
            snmf_max_pixels: 8192,
        }
    }
}

impl StainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.background_intensity > 0.0 && self.background_intensity.is_finite()) {
            return bad("background intensity must be positive");
        }
        if !(0.0..50.0).contains(&self.alpha_percentile) {
            return bad("alpha percentile must lie in [0, 50)");
        }
        if !(self.od_threshold >= 0.0) {
            return bad("OD threshold must be non-negative");
        }
        if !(self.snmf_lambda >= 0.0) || !(self.snmf_tol >= 0.0) {
            return bad("SNMF lambda and tolerance must be non-negative");
        }
        if self.snmf_max_pixels < MIN_TISSUE_PIXELS {
            return bad("SNMF pixel budget below the tissue minimum");
        }
        Ok(())
    }
}

/// Two unit-norm, non-negative OD stain vectors. Column 0 is the
/// hematoxylin-like stain, column 1 the DAB/eosin-like stain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 3]", into = "[[f64; 2]; 3]")]
pub struct StainMatrix {
    columns: [[f64; 3]; 2],
}

impl TryFrom<[[f64; 2]; 3]> for StainMatrix {
    type Error = Error;
    fn try_from(rows: [[f64; 2]; 3]) -> Result<Self> {
        StainMatrix::new([
            [rows[0][0], rows[1][0], rows[2][0]],
            [rows[0][1], rows[1][1], rows[2][1]],
        ])
    }
}

impl From<StainMatrix> for [[f64; 2]; 3] {
    fn from(m: StainMatrix) -> Self {
        m.rows()
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl StainMatrix {
    /// Validating constructor; columns must already be unit-norm and non-negative.
    pub fn new(columns: [[f64; 3]; 2]) -> Result<Self> {
        for col in &columns {
            if col.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "stain vector {col:?} has negative or non-finite entries"
                )));
            }
            if (norm3(*col) - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "stain vector {col:?} is not unit-norm"
                )));
            }
        }
        Ok(StainMatrix { columns })
    }

    /// Clamps negatives to zero, normalizes, and orders the columns so the
    /// one with the larger red OD component comes first.
    pub fn from_raw(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        let fix = |v: [f64; 3]| -> Result<[f64; 3]> {
            let v = if v.iter().sum::<f64>() < 0.0 { v.map(|x| -x) } else { v };
            let v = v.map(|x| x.max(0.0));
            let n = norm3(v);
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::DegenerateTarget("zero stain vector".into()));
            }
            Ok(v.map(|x| x / n))
        };
        let (a, b) = (fix(a)?, fix(b)?);
        let columns = if a[0] >= b[0] { [a, b] } else { [b, a] };
        StainMatrix::new(columns)
    }

    pub fn column(&self, k: usize) -> [f64; 3] {
        self.columns[k]
    }

    pub fn columns(&self) -> [[f64; 3]; 2] {
        self.columns
    }

    /// Row-major 3×2 view.
    pub fn rows(&self) -> [[f64; 2]; 3] {
        let c = &self.columns;
        [[c[0][0], c[1][0]], [c[0][1], c[1][1]], [c[0][2], c[1][2]]]
    }

    /// Angle between the two stain vectors in radians.
    pub fn separation(&self) -> f64 {
        dot3(self.columns[0], self.columns[1]).clamp(-1.0, 1.0).acos()
    }

    pub(crate) fn check_invariants(&self) {
        debug_assert!(self
            .columns
            .iter()
            .all(|c| (norm3(*c) - 1.0).abs() <= UNIT_NORM_TOL && c.iter().all(|v| *v >= 0.0)));
    }
}

/// Angle in degrees between two (not necessarily unit) vectors.
pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    (dot3(a, b) / (norm3(a) * norm3(b)))
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

/// Per-pixel concentrations of the two stains.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMap {
    width: usize,
    height: usize,
    values: Vec<[f64; 2]>,
}

impl ConcentrationMap {
    pub fn new(width: usize, height: usize, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} concentrations for {width}x{height}",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidData(
                "concentrations must be finite and non-negative".into(),
            ));
        }
        Ok(ConcentrationMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn stain(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|c| c[k]).collect()
    }

    pub fn percentile(&self, k: usize, p: f64) -> f64 {
        crate::stats::percentile(&self.stain(k), p)
    }
}

/// OD vectors of every pixel of an RGB8 image, row-major.
pub(crate) fn od_pixels(img: &PlanarImage, background_intensity: f64) -> Result<Vec<[f64; 3]>> {
    img.expect_space(ColorSpace::Rgb8)?;
    let Planes::U8(p) = img.planes() else {
        unreachable!()
    };
    let lut: Vec<f64> = (0..=255u8)
        .map(|v| optical_density(f64::from(v), background_intensity))
        .collect();
    Ok((0..img.pixel_count())
        .map(|i| [p[0][i], p[1][i], p[2][i]].map(|v| lut[usize::from(v)]))
        .collect())
}

/// OD vectors whose norm exceeds `threshold`.
pub(crate) fn tissue_pixels(od: &[[f64; 3]], threshold: f64) -> Vec<[f64; 3]> {
    od.iter().copied().filter(|v| norm3(*v) > threshold).collect()
}

/// A fitted normalization reference. Serializes to a self-describing JSON
/// document so normalization can be repeated without the reference image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTarget {
    pub method: Method,
    pub parameters: StainParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinhard_stats: Option<ChannelStats>,
    /// Row-major 3×2 when serialized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stain_matrix: Option<StainMatrix>,
    /// Per-stain 99th-percentile concentration of the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration_scale: Option<[f64; 2]>,
}

impl NormalizationTarget {
    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        let stats = self.reinhard_stats.is_some();
        let basis = self.stain_matrix.is_some() && self.concentration_scale.is_some();
        let any_basis = self.stain_matrix.is_some() || self.concentration_scale.is_some();
        let ok = match self.method {
            Method::Reinhard => stats && !any_basis,
            _ => basis && !stats,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{} target has the wrong set of fields",
                self.method
            )));
        }
        if let Some(s) = &self.reinhard_stats {
            if s.mean.len() != 3 || s.std.len() != 3 {
                return Err(Error::InvalidParameter("Reinhard stats need 3 channels".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: NormalizationTarget = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

fn check_not_flat(img: &PlanarImage) -> Result<()> {
    let stats = ChannelStats::of(img);
    if stats.std.iter().all(|&s| s < MIN_TARGET_STD) {
        return Err(Error::DegenerateTarget(format!(
            "channel standard deviations {:?} are below {MIN_TARGET_STD}",
            stats.std
        )));
    }
    Ok(())
}

fn as_degenerate_target(e: Error) -> Error {
    match e {
        Error::InsufficientTissue { .. } | Error::SingularBasis { .. } => {
            Error::DegenerateTarget(e.to_string())
        }
        e => e,
    }
}

/// Estimates the source basis the way `method` prescribes.
fn estimate_basis(img: &PlanarImage, method: Method, params: &StainParams) -> Result<StainMatrix> {
    match method {
        Method::Macenko | Method::ColorDeconv => estimate_stains_macenko(img, params),
        Method::Vahadane => estimate_stains_snmf(img, params).map(|fit| fit.stains),
        Method::Reinhard => unreachable!("Reinhard has no stain basis"),
    }
}

fn concentrations_for(
    img: &PlanarImage,
    stains: &StainMatrix,
    method: Method,
    params: &StainParams,
) -> Result<ConcentrationMap> {
    match method {
        Method::ColorDeconv => deconvolve_complement(img, stains, params.background_intensity),
        _ => deconvolve(img, stains, params.background_intensity),
    }
}

fn concentration_scale(c: &ConcentrationMap) -> [f64; 2] {
    [
        c.percentile(0, CONCENTRATION_PERCENTILE),
        c.percentile(1, CONCENTRATION_PERCENTILE),
    ]
}

pub fn fit_target(
    img: &PlanarImage,
    method: Method,
    params: &StainParams,
) -> Result<NormalizationTarget> {
    img.expect_space(ColorSpace::Rgb8)?;
    params.validate()?;
    check_not_flat(img)?;

    let target = match method {
        Method::Reinhard => {
            let stats = ChannelStats::of(&rgb_to_decorrelated_lab(img)?);
            if stats.std.iter().any(|&s| s <= 0.0) {
                return Err(Error::DegenerateTarget(
                    "zero variance in a lαβ channel".into(),
                ));
            }
            NormalizationTarget {
                method,
                parameters: params.clone(),
                reinhard_stats: Some(stats),
                stain_matrix: None,
                concentration_scale: None,
            }
        }
        _ => {
            let stains = estimate_basis(img, method, params).map_err(as_degenerate_target)?;
            if stains.separation().to_degrees() < MIN_STAIN_SEPARATION_DEG {
                return Err(Error::DegenerateTarget(format!(
                    "stain vectors only {:.3}° apart",
                    stains.separation().to_degrees()
                )));
            }
            let c = concentrations_for(img, &stains, method, params)
                .map_err(as_degenerate_target)?;
            let scale = concentration_scale(&c);
            if scale.iter().any(|&s| s <= 0.0) {
                return Err(Error::DegenerateTarget(format!(
                    "99th-percentile concentrations {scale:?} leave a stain empty"
                )));
            }
            NormalizationTarget {
                method,
                parameters: params.clone(),
                reinhard_stats: None,
                stain_matrix: Some(stains),
                concentration_scale: Some(scale),
            }
        }
    };
    target.validate()?;
    Ok(target)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum NormalizeStatus {
    Normalized,
    /// Zero-variance source channel; only the mean shift was applied.
    MeanShiftOnly(String),
    /// No usable stain signal; the source is returned unchanged.
    Passthrough(String),
}

impl NormalizeStatus {
    pub fn is_degenerate(&self) -> bool {
        !matches!(self, NormalizeStatus::Normalized)
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub image: PlanarImage,
    pub status: NormalizeStatus,
}

/// Rebuilds `src` with each stain's concentrations multiplied by `factors`
/// and drawn in the target basis. The part of every pixel's optical density
/// the two source stains do not explain (colour outside the stain cone,
/// quantization noise) is carried over unchanged, so an image normalized to
/// its own target comes back as itself.
fn restain(
    src: &PlanarImage,
    c: &ConcentrationMap,
    src_stains: &StainMatrix,
    factors: [f64; 2],
    tgt_stains: &StainMatrix,
    background_intensity: f64,
) -> Result<PlanarImage> {
    let od = od_pixels(src, background_intensity)?;
    let ([sa, sb], [ta, tb]) = (src_stains.columns(), tgt_stains.columns());
    let table = IntensityTable::new(background_intensity);
    let mut planes = vec![vec![0u8; od.len()]; 3];
    for (i, (v, k)) in od.iter().zip(c.values()).enumerate() {
        for ch in 0..3 {
            let residual = v[ch] - (sa[ch] * k[0] + sb[ch] * k[1]);
            let out = ta[ch] * k[0] * factors[0] + tb[ch] * k[1] * factors[1] + residual;
            planes[ch][i] = table.get(out);
        }
    }
    PlanarImage::from_u8_planes(src.width(), src.height(), ColorSpace::Rgb8, planes)
}

/// Normalizes `src` to the style of any kind of target.
pub fn normalize(src: &PlanarImage, tgt: &NormalizationTarget) -> Result<Normalized> {
    match tgt.method {
        Method::Reinhard => reinhard_normalize(src, tgt),
        _ => normalize_to_target(src, tgt),
    }
}

/// Shared path of the basis methods: estimate, deconvolve, rescale to the
/// target's concentration range, rebuild with the target basis.
pub fn normalize_to_target(src: &PlanarImage, tgt: &NormalizationTarget) -> Result<Normalized> {
    src.expect_space(ColorSpace::Rgb8)?;
    tgt.validate()?;
    let (Some(tgt_stains), Some(tgt_scale)) = (tgt.stain_matrix, tgt.concentration_scale) else {
        return Err(Error::InvalidParameter(format!(
            "{} target has no stain basis",
            tgt.method
        )));
    };
    let params = &tgt.parameters;
    let passthrough = |reason: String| {
        log::warn!("stain normalization passthrough: {reason}");
        Ok(Normalized {
            image: src.clone(),
            status: NormalizeStatus::Passthrough(reason),
        })
    };

    let stains = match estimate_basis(src, tgt.method, params) {
        Ok(s) => s,
        Err(e @ Error::InsufficientTissue { .. }) => return passthrough(e.to_string()),
        Err(e) => return Err(e),
    };
    if stains.separation().to_degrees() < MIN_STAIN_SEPARATION_DEG {
        return passthrough(format!(
            "source stain vectors only {:.3}° apart",
            stains.separation().to_degrees()
        ));
    }
    let c = concentrations_for(src, &stains, tgt.method, params)?;
    let src_scale = concentration_scale(&c);
    let factors = [0, 1].map(|k| {
        if src_scale[k] > 1e-12 {
            tgt_scale[k] / src_scale[k]
        } else {
            1.0
        }
    });
    let image = restain(src, &c, &stains, factors, &tgt_stains, params.background_intensity)?;
    Ok(Normalized {
        image,
        status: NormalizeStatus::Normalized,
    })
}
