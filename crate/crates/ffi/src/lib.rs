//! C ABI for npseg.
//!
//! Images and normalization targets are opaque handles created and freed
//! through this API. Every fallible call returns an [`NpsegStatus`]; on
//! failure `npseg_last_error()` describes what went wrong on the calling
//! thread. Pixel buffers are interleaved, row-major, 8 bits per sample.
//! Panics never cross the boundary; they surface as `NPSEG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use npseg::enhance::{default_cutoff, enhance_image, EnhanceParams};
use npseg::metrics::{self, BinaryMask, Connectivity};
use npseg::raster::{ColorSpace, PlanarImage};
use npseg::stain::{self, Method, NormalizationTarget, StainParams};
use npseg::Error;

/// Result code of every fallible call. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpsegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    WrongColorspace = 10,
    DimensionMismatch = 11,
    ChannelCountMismatch = 12,
    InvalidParameter = 13,
    InvalidData = 14,
    DegenerateTarget = 20,
    DegenerateSource = 21,
    InsufficientTissue = 22,
    SingularBasis = 23,
    NonRealResult = 30,
    MalformedXml = 40,
    EmptyAnnotationSet = 41,
    SlideTooSmall = 42,
    AnnotationTooLarge = 43,
    OverlappingSplit = 44,
    UnassignedSubject = 45,
    InvalidThreshold = 50,
    EmptySamples = 51,
    EmptyInput = 52,
    Io = 60,
    Image = 61,
    Json = 62,
    Panic = 99,
}

impl From<&Error> for NpsegStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::WrongColorspace { .. } => NpsegStatus::WrongColorspace,
            Error::DimensionMismatch(_) => NpsegStatus::DimensionMismatch,
            Error::ChannelCountMismatch { .. } => NpsegStatus::ChannelCountMismatch,
            Error::InvalidParameter(_) => NpsegStatus::InvalidParameter,
            Error::InvalidData(_) => NpsegStatus::InvalidData,
            Error::DegenerateTarget(_) => NpsegStatus::DegenerateTarget,
            Error::DegenerateSource(_) => NpsegStatus::DegenerateSource,
            Error::InsufficientTissue { .. } => NpsegStatus::InsufficientTissue,
            Error::SingularBasis { .. } => NpsegStatus::SingularBasis,
            Error::NonRealResult { .. } => NpsegStatus::NonRealResult,
            Error::MalformedXml(_) => NpsegStatus::MalformedXml,
            Error::EmptyAnnotationSet => NpsegStatus::EmptyAnnotationSet,
            Error::SlideTooSmall { .. } => NpsegStatus::SlideTooSmall,
            Error::AnnotationTooLarge { .. } => NpsegStatus::AnnotationTooLarge,
            Error::OverlappingSplit(_) => NpsegStatus::OverlappingSplit,
            Error::UnassignedSubject(_) => NpsegStatus::UnassignedSubject,
            Error::InvalidThreshold(_) => NpsegStatus::InvalidThreshold,
            Error::EmptySamples => NpsegStatus::EmptySamples,
            Error::EmptyInput(_) => NpsegStatus::EmptyInput,
            Error::Io { .. } => NpsegStatus::Io,
            Error::Image { .. } => NpsegStatus::Image,
            Error::Json(_) => NpsegStatus::Json,
        }
    }
}

/// Stain normalization method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpsegMethod {
    Reinhard = 0,
    Macenko = 1,
    Vahadane = 2,
    ColorDeconv = 3,
}

impl From<NpsegMethod> for Method {
    fn from(m: NpsegMethod) -> Self {
        match m {
            NpsegMethod::Reinhard => Method::Reinhard,
            NpsegMethod::Macenko => Method::Macenko,
            NpsegMethod::Vahadane => Method::Vahadane,
            NpsegMethod::ColorDeconv => Method::ColorDeconv,
        }
    }
}

/// Opaque 8-bit image.
pub struct NpsegImage(PlanarImage);

/// Opaque fitted normalization target.
pub struct NpsegTarget(NormalizationTarget);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NpsegMatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NpsegInterval {
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Status(NpsegStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(NpsegStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NpsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NpsegStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            NpsegStatus::from(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            NpsegStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn image<'a>(img: *const NpsegImage) -> Result<&'a PlanarImage, Failure> {
    img.as_ref().map(|i| &i.0).ok_or_else(|| null("image"))
}

unsafe fn out_ptr<'a, T>(out: *mut T) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null("output pointer"))
}

fn boxed_image(img: PlanarImage) -> *mut NpsegImage {
    Box::into_raw(Box::new(NpsegImage(img)))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn npseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn npseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `width*height*3` interleaved RGB bytes into a new image.
///
/// # Safety
/// `data` must point to `width*height*3` readable bytes and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_image_from_rgb8(
    data: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut NpsegImage,
) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let len = width.checked_mul(height).and_then(|n| n.checked_mul(3)).ok_or_else(|| {
            Failure::Status(NpsegStatus::InvalidParameter, "image size overflows".into())
        })?;
        let px = slice(data, len, "pixel data")?;
        *out = boxed_image(PlanarImage::from_interleaved(width, height, ColorSpace::Rgb8, px)?);
        Ok(())
    })
}

/// Copies `width*height` gray bytes into a new image.
///
/// # Safety
/// `data` must point to `width*height` readable bytes and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_image_from_gray8(
    data: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut NpsegImage,
) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let px = slice(data, width.saturating_mul(height), "pixel data")?;
        *out = boxed_image(PlanarImage::gray_u8(width, height, px.to_vec())?);
        Ok(())
    })
}

/// Width, height and channel count of an image.
///
/// # Safety
/// `img` must be a live image handle; the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn npseg_image_shape(
    img: *const NpsegImage,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
) -> NpsegStatus {
    guard(|| {
        let img = image(img)?;
        for (p, v) in [(width, img.width()), (height, img.height()), (channels, img.channel_count())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the interleaved pixels into `buf`, which must hold
/// `width*height*channels` bytes.
///
/// # Safety
/// `img` must be a live image handle and `buf` must point to `len`
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn npseg_image_copy_pixels(
    img: *const NpsegImage,
    buf: *mut u8,
    len: usize,
) -> NpsegStatus {
    guard(|| {
        let px = image(img)?.to_interleaved()?;
        if len < px.len() {
            return Err(Failure::Status(
                NpsegStatus::BufferTooSmall,
                format!("buffer holds {len} bytes, image needs {}", px.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(px.as_ptr(), buf, px.len());
        Ok(())
    })
}

/// # Safety
/// `img` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn npseg_image_free(img: *mut NpsegImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// RGB image plus the binary enhancement channel. A `cutoff` of zero or
/// less selects the default for the image size.
///
/// # Safety
/// `img` must be a live RGB image handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_enhance(
    img: *const NpsegImage,
    cutoff: f64,
    t_low: f64,
    t_high: f64,
    out: *mut *mut NpsegImage,
) -> NpsegStatus {
    guard(|| {
        let (img, out) = (image(img)?, out_ptr(out)?);
        let cutoff = if cutoff > 0.0 {
            cutoff
        } else {
            default_cutoff(img.width(), img.height())
        };
        let params = EnhanceParams::new(cutoff, t_low, t_high)?;
        *out = boxed_image(enhance_image(img, &params)?);
        Ok(())
    })
}

/// Fits a normalization target to a reference RGB image with default
/// estimator settings.
///
/// # Safety
/// `img` must be a live RGB image handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_target_fit(
    img: *const NpsegImage,
    method: NpsegMethod,
    out: *mut *mut NpsegTarget,
) -> NpsegStatus {
    guard(|| {
        let (img, out) = (image(img)?, out_ptr(out)?);
        let t = stain::fit_target(img, method.into(), &StainParams::default())?;
        *out = Box::into_raw(Box::new(NpsegTarget(t)));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_target_from_json(json: *const c_char, out: *mut *mut NpsegTarget) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::Status(NpsegStatus::InvalidUtf8, e.to_string()))?;
        *out = Box::into_raw(Box::new(NpsegTarget(NormalizationTarget::from_json(text)?)));
        Ok(())
    })
}

/// Serializes a target; release the string with `npseg_string_free`.
///
/// # Safety
/// `target` must be a live target handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_target_to_json(target: *const NpsegTarget, out: *mut *mut c_char) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let t = target.as_ref().ok_or_else(|| null("target"))?;
        let json = CString::new(t.0.to_json()?).expect("JSON has no NUL bytes");
        *out = json.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn npseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `target` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn npseg_target_free(target: *mut NpsegTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Normalizes an RGB image to `target`. `degenerate` (optional) is set to 1
/// when the source had no usable stain signal and was passed through or
/// only mean-shifted, 0 otherwise.
///
/// # Safety
/// Handles must be live; `out` must be writable; `degenerate` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn npseg_normalize(
    img: *const NpsegImage,
    target: *const NpsegTarget,
    out: *mut *mut NpsegImage,
    degenerate: *mut i32,
) -> NpsegStatus {
    guard(|| {
        let (img, out) = (image(img)?, out_ptr(out)?);
        let t = target.as_ref().ok_or_else(|| null("target"))?;
        let n = stain::normalize(img, &t.0)?;
        if let Some(d) = degenerate.as_mut() {
            *d = i32::from(n.status.is_degenerate());
        }
        *out = boxed_image(n.image);
        Ok(())
    })
}

unsafe fn masks(pred: *const u8, gt: *const u8, width: usize, height: usize) -> Result<(BinaryMask, BinaryMask), Failure> {
    let n = width.saturating_mul(height);
    let to_mask = |px: &[u8]| BinaryMask::from_image(&PlanarImage::gray_u8(width, height, px.to_vec())?);
    Ok((to_mask(slice(pred, n, "prediction")?)?, to_mask(slice(gt, n, "ground truth")?)?))
}

/// Dice score of two `width*height` gray masks (foreground above 127).
///
/// # Safety
/// Both masks must point to `width*height` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_dice(
    pred: *const u8,
    gt: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let (p, g) = masks(pred, gt, width, height)?;
        *out = metrics::dice_score(&p, &g)?;
        Ok(())
    })
}

/// Mean absolute surface distance in pixels. `defined` is set to 0 (and
/// `out` to NaN) when either mask is empty.
///
/// # Safety
/// Both masks must point to `width*height` bytes; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_masd(
    pred: *const u8,
    gt: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
    defined: *mut i32,
) -> NpsegStatus {
    guard(|| {
        let (out, defined) = (out_ptr(out)?, out_ptr(defined)?);
        let (p, g) = masks(pred, gt, width, height)?;
        let m = metrics::masd(&p, &g)?;
        *defined = i32::from(m.is_some());
        *out = m.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Instance-level matching counts and F1. `connectivity` is 4 or 8.
///
/// # Safety
/// Both masks must point to `width*height` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_instance_f1(
    pred: *const u8,
    gt: *const u8,
    width: usize,
    height: usize,
    iou_threshold: f64,
    connectivity: u32,
    out: *mut NpsegMatchCounts,
) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let conn = match connectivity {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            c => {
                return Err(Failure::Status(
                    NpsegStatus::InvalidParameter,
                    format!("connectivity must be 4 or 8, got {c}"),
                ))
            }
        };
        let (p, g) = masks(pred, gt, width, height)?;
        let r = metrics::instance_f1(&p, &g, iou_threshold, conn)?;
        *out = NpsegMatchCounts {
            tp: r.tp,
            fp: r.fp,
            fn_: r.fn_,
            f1: r.f1(),
        };
        Ok(())
    })
}

/// Percentile bootstrap interval of the mean of `n` samples.
///
/// # Safety
/// `samples` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn npseg_bootstrap_ci(
    samples: *const f64,
    n: usize,
    level: f64,
    resamples: usize,
    seed: u64,
    out: *mut NpsegInterval,
) -> NpsegStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let ci = metrics::bootstrap_ci(slice(samples, n, "samples")?, level, resamples, seed)?;
        *out = NpsegInterval {
            lower: ci.lower,
            mean: ci.mean,
            upper: ci.upper,
        };
        Ok(())
    })
}
