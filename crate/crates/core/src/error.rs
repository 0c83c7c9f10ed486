use std::path::PathBuf;

use crate::raster::ColorSpace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit reports. Variants map one-to-one onto the
/// stable status codes exposed through the C ABI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("expected a {expected:?} image, got {actual:?}")]
    WrongColorspace {
        expected: ColorSpace,
        actual: ColorSpace,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel count mismatch: {space:?} needs {expected} planes, got {actual}")]
    ChannelCountMismatch {
        space: ColorSpace,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid image data: {0}")]
    InvalidData(String),

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("degenerate source: {0}")]
    DegenerateSource(String),

    #[error("insufficient tissue: {found} pixels above the optical density threshold, need {required}")]
    InsufficientTissue { found: usize, required: usize },

    #[error("stain basis is singular (columns {angle_rad:e} rad apart)")]
    SingularBasis { angle_rad: f64 },

    #[error("inverse transform left an imaginary residue of {residue:e} (tolerance {tolerance:e})")]
    NonRealResult { residue: f64, tolerance: f64 },

    #[error("malformed annotation XML: {0}")]
    MalformedXml(String),

    #[error("annotation document contains no usable annotations")]
    EmptyAnnotationSet,

    #[error("slide {width}x{height} is smaller than the {patch}px patch")]
    SlideTooSmall {
        width: usize,
        height: usize,
        patch: usize,
    },

    #[error("annotation bounding box {width}x{height} does not fit a corner placement (limit {limit})")]
    AnnotationTooLarge {
        width: usize,
        height: usize,
        limit: usize,
    },

    #[error("subject {0:?} is assigned to both train and test")]
    OverlappingSplit(String),

    #[error("subject {0:?} is not assigned to any split")]
    UnassignedSubject(String),

    #[error("IoU threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("bootstrap needs at least one sample")]
    EmptySamples,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
