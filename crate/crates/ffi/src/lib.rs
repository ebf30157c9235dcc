//! C ABI for `inamp`.
//!
//! - Every fallible function returns an [`InampStatus`]; on failure a
//!   message is available from [`inamp_last_error_message`] on the same
//!   thread until the next failing call.
//! - Images and models are opaque heap handles released with their `_free`
//!   function.
//! - Panics are caught at the boundary and reported as
//!   `INAMP_STATUS_PANIC`.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access described in each
//! function; handles must come from this library and not be used after
//! being freed. Output arrays must hold at least the stated length.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use inamp::data::{read_msib, spectral_index, BandMap, IndexKind, MultiSpectralImage};
use inamp::metrics::{confusion_matrix, MetricsReport};
use inamp::model::{load_model, SavedModel};
use inamp::tensor::Tensor;
use inamp::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InampStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InampIndexKind {
    Ndvi = 0,
    Nbr = 1,
    Ndbi = 2,
}

/// Scores from [`inamp_metrics`]. `kappa` is NaN when every label and
/// prediction fall in one class.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InampMetrics {
    pub accuracy: f64,
    pub kappa: f64,
    pub fn_rate: f64,
}

/// Opaque multi-spectral raster.
pub struct InampImage {
    inner: MultiSpectralImage,
}

/// Opaque trained classifier.
pub struct InampModel {
    inner: SavedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> InampStatus {
    match e {
        Error::Io { .. } => InampStatus::Io,
        Error::BadMagic(_) | Error::UnsupportedVersion { .. } | Error::TruncatedFile(_) | Error::Format { .. } => {
            InampStatus::Format
        }
        Error::ShapeMismatch { .. } | Error::InvalidShape(_) | Error::ChannelMismatch { .. } => InampStatus::Shape,
        Error::Config(_)
        | Error::MissingBand(_)
        | Error::LabelOutOfRange { .. }
        | Error::IndexOutOfRange { .. }
        | Error::EmptyInput
        | Error::NoTargetSamples(_) => InampStatus::InvalidArgument,
        _ => InampStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (InampStatus, String)>) -> InampStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InampStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside inamp".into());
            InampStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (InampStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (InampStatus, String) {
    (InampStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (InampStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (InampStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn inamp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn inamp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Reads an MSIB raster into `*out`.
#[no_mangle]
pub unsafe extern "C" fn inamp_image_read(path: *const c_char, out: *mut *mut InampImage) -> InampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let img = read_msib(&path_arg(path)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(InampImage { inner: img }));
        Ok(())
    })
}

/// Builds an image from `height × width × channels` values in (row, col,
/// band) order. Bands are named by `names` (`channels` C strings) or, if
/// `names` is null, `b0, b1, …`.
#[no_mangle]
pub unsafe extern "C" fn inamp_image_new(
    width: usize,
    height: usize,
    channels: usize,
    values: *const f32,
    names: *const *const c_char,
    out: *mut *mut InampImage,
) -> InampStatus {
    guard(|| {
        if out.is_null() || values.is_null() {
            return Err(null("values or out"));
        }
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or((InampStatus::Shape, "image too large".to_string()))?;
        let data = std::slice::from_raw_parts(values, n).to_vec();
        let bands = if names.is_null() {
            (0..channels).map(|i| format!("b{i}")).collect()
        } else {
            std::slice::from_raw_parts(names, channels)
                .iter()
                .map(|&p| {
                    if p.is_null() {
                        return Err(null("band name"));
                    }
                    CStr::from_ptr(p)
                        .to_str()
                        .map(str::to_string)
                        .map_err(|_| (InampStatus::InvalidArgument, "band name is not UTF-8".to_string()))
                })
                .collect::<Result<_, _>>()?
        };
        let img = MultiSpectralImage::new(width, height, bands, data).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(InampImage { inner: img }));
        Ok(())
    })
}

/// Writes width, height and band count; any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn inamp_image_dims(
    img: *const InampImage,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
) -> InampStatus {
    guard(|| {
        let img = img.as_ref().ok_or_else(|| null("image"))?;
        if let Some(w) = width.as_mut() {
            *w = img.inner.width;
        }
        if let Some(h) = height.as_mut() {
            *h = img.inner.height;
        }
        if let Some(c) = channels.as_mut() {
            *c = img.inner.channels();
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn inamp_image_free(img: *mut InampImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Writes the `height × width` index map into `out` (length `len`), using
/// bands named red, nir and swir2.
#[no_mangle]
pub unsafe extern "C" fn inamp_spectral_index(
    img: *const InampImage,
    kind: InampIndexKind,
    out: *mut f32,
    len: usize,
) -> InampStatus {
    guard(|| {
        let img = img.as_ref().ok_or_else(|| null("image"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match kind {
            InampIndexKind::Ndvi => IndexKind::Ndvi,
            InampIndexKind::Nbr => IndexKind::Nbr,
            InampIndexKind::Ndbi => IndexKind::Ndbi,
        };
        let values = spectral_index(&img.inner, kind, &BandMap::default()).map_err(lib_err)?;
        if len != values.len() {
            return Err((
                InampStatus::Shape,
                format!("output holds {len} values, need {}", values.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&values);
        Ok(())
    })
}

/// Loads a model checkpoint into `*out`.
#[no_mangle]
pub unsafe extern "C" fn inamp_model_load(path: *const c_char, out: *mut *mut InampModel) -> InampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = load_model(&path_arg(path)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(InampModel { inner: m }));
        Ok(())
    })
}

/// Number of classes the model predicts, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn inamp_model_n_classes(model: *const InampModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.classifier.cfg.n_classes)
}

#[no_mangle]
pub unsafe extern "C" fn inamp_model_free(model: *mut InampModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies one image. The model's bands are looked up by name in the
/// image. `probs` receives `n_classes` probabilities (length `len`);
/// `predicted` may be null.
#[no_mangle]
pub unsafe extern "C" fn inamp_model_classify(
    model: *const InampModel,
    img: *const InampImage,
    probs: *mut f32,
    len: usize,
    predicted: *mut usize,
) -> InampStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let img = &img.as_ref().ok_or_else(|| null("image"))?.inner;
        if probs.is_null() {
            return Err(null("probs"));
        }
        let k = model.classifier.cfg.n_classes;
        if len != k {
            return Err((InampStatus::Shape, format!("probs holds {len} values, need {k}")));
        }
        let idx = model
            .bands
            .iter()
            .map(|b| img.band_index(b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib_err)?;
        let sel = img.select_bands(&idx).map_err(lib_err)?;
        let batch = Tensor::from_vec(&[1, sel.height, sel.width, sel.channels()], sel.values).map_err(lib_err)?;
        let (p, pred) = model.classifier.classify(&batch).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(probs, k).copy_from_slice(p.data());
        if let Some(out) = predicted.as_mut() {
            *out = pred[0];
        }
        Ok(())
    })
}

/// Accuracy, kappa and miss rate of `target` from `n` label pairs over `k`
/// classes.
#[no_mangle]
pub unsafe extern "C" fn inamp_metrics(
    truth: *const u32,
    predicted: *const u32,
    n: usize,
    k: usize,
    target: usize,
    out: *mut InampMetrics,
) -> InampStatus {
    guard(|| {
        if truth.is_null() || predicted.is_null() || out.is_null() {
            return Err(null("truth, predicted or out"));
        }
        let t: Vec<usize> = std::slice::from_raw_parts(truth, n)
            .iter()
            .map(|&v| v as usize)
            .collect();
        let p: Vec<usize> = std::slice::from_raw_parts(predicted, n)
            .iter()
            .map(|&v| v as usize)
            .collect();
        let cm = confusion_matrix(&t, &p, k).map_err(lib_err)?;
        let r = MetricsReport::new(cm, target).map_err(lib_err)?;
        *out = InampMetrics {
            accuracy: r.accuracy,
            kappa: r.kappa.unwrap_or(f64::NAN),
            fn_rate: r.fn_rate,
        };
        Ok(())
    })
}
