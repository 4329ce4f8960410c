//! C ABI over `dcode`.
//!
//! Every function returns a [`DcStatus`]; on failure a one-line message is
//! available from [`dc_last_error_message`] on the same thread. Handles are
//! opaque, created by `*_load`/`*_from_*`/`dc_encode`, and released with the
//! matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dcode::codefile;
use dcode::encoder::{encode_image, DensityCode, EncodeParams};
use dcode::image_io::{load_image, GrayImage, ImageFormat, Polarity, DEFAULT_LAMBDA};
use dcode::matcher::delta_median;
use dcode::quasirandom::halton;
use dcode::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    DegenerateImage = 5,
    CodeTooShort = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcPolarity {
    LightOnDark = 0,
    DarkOnLight = 1,
}

/// Encoding options; start from [`dc_encode_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DcEncodeOptions {
    /// Halton sequence length.
    pub points: usize,
    /// Nonzero selects `m = round(alpha * mass)` capped by `points`.
    pub use_alpha: i32,
    pub alpha: f64,
    pub lambda: f64,
}

/// Opaque grayscale image.
pub struct DcImage(GrayImage);

/// Opaque density code.
pub struct DcCode(DensityCode);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> DcStatus {
    match err {
        Error::Io { .. } => DcStatus::Io,
        Error::UnsupportedFormat(_) | Error::MalformedImage(_) | Error::MalformedCode(_) | Error::MalformedCsv(_) => {
            DcStatus::Format
        }
        Error::ImageTooSmall { .. } | Error::InvalidPixels(_) | Error::DegenerateContrast(_) => DcStatus::DegenerateImage,
        Error::EmptyCode { .. } | Error::SequenceTooShort { .. } | Error::CodeTooShort { .. } => DcStatus::CodeTooShort,
        Error::Underdetermined { .. } | Error::DegenerateTargetScale | Error::DegenerateDesign(_) => DcStatus::Numerical,
        _ => DcStatus::InvalidArgument,
    }
}

fn fail(status: DcStatus, msg: impl Into<String>) -> DcStatus {
    set_error(msg.into());
    status
}

/// Run `body`, turning library errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), DcStatus>) -> DcStatus {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(DcStatus::Internal, "internal panic"),
    }
}

fn lib<T>(r: dcode::Result<T>) -> Result<T, DcStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullArgument, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DcStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, DcStatus> {
    p.as_ref().ok_or_else(|| fail(DcStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_ptr<T>(p: *mut *mut T) -> Result<(), DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullArgument, "output pointer is null"));
    }
    *p = ptr::null_mut();
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a `DcStatus` value.
#[no_mangle]
pub extern "C" fn dc_status_name(status: i32) -> *const c_char {
    let name: &'static CStr = match status {
        0 => c"ok",
        1 => c"null argument",
        2 => c"invalid argument",
        3 => c"i/o error",
        4 => c"malformed input",
        5 => c"degenerate image",
        6 => c"code too short",
        7 => c"numerical failure",
        8 => c"buffer too small",
        9 => c"internal error",
        _ => c"unknown status",
    };
    name.as_ptr()
}

/// Load a PGM or PNG file; the format follows the extension.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_image_load(path: *const c_char, out: *mut *mut DcImage) -> DcStatus {
    guard(|| {
        out_ptr(out)?;
        let path = path_arg(path)?;
        let format = lib(ImageFormat::from_path(&path))?;
        let img = lib(load_image(&path, format))?;
        *out = Box::into_raw(Box::new(DcImage(img)));
        Ok(())
    })
}

/// Build an image from `width * height` row-major intensities.
///
/// # Safety
/// `pixels` must point to `width * height` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn dc_image_from_pixels(
    width: usize,
    height: usize,
    pixels: *const f64,
    out: *mut *mut DcImage,
) -> DcStatus {
    guard(|| {
        out_ptr(out)?;
        if pixels.is_null() {
            return Err(fail(DcStatus::NullArgument, "pixels is null"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| fail(DcStatus::InvalidArgument, "image size overflows"))?;
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        let img = lib(GrayImage::new(width, height, data))?;
        *out = Box::into_raw(Box::new(DcImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a live image handle.
#[no_mangle]
pub unsafe extern "C" fn dc_image_width(img: *const DcImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be null or a live image handle.
#[no_mangle]
pub unsafe extern "C" fn dc_image_height(img: *const DcImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_image_free(img: *mut DcImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

#[no_mangle]
pub extern "C" fn dc_encode_options_default() -> DcEncodeOptions {
    DcEncodeOptions {
        points: 1025,
        use_alpha: 0,
        alpha: 0.25,
        lambda: DEFAULT_LAMBDA,
    }
}

/// Encode an image against the 2-D Halton sequence. `polarity` is a
/// `DcPolarity` value.
///
/// # Safety
/// `img` and `options` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_encode(
    img: *const DcImage,
    polarity: i32,
    options: *const DcEncodeOptions,
    out: *mut *mut DcCode,
) -> DcStatus {
    guard(|| {
        out_ptr(out)?;
        let img = handle(img, "image")?;
        let opts = handle(options, "options")?;
        let polarity = match polarity {
            p if p == DcPolarity::LightOnDark as i32 => Polarity::LightOnDark,
            p if p == DcPolarity::DarkOnLight as i32 => Polarity::DarkOnLight,
            p => return Err(fail(DcStatus::InvalidArgument, format!("unknown polarity {p}"))),
        };
        let seq = lib(halton(opts.points, 2))?;
        let params = EncodeParams {
            lambda: opts.lambda,
            alpha: (opts.use_alpha != 0).then_some(opts.alpha),
            max_points: None,
        };
        let code = lib(encode_image(&img.0, polarity, &seq, &params))?;
        *out = Box::into_raw(Box::new(DcCode(code)));
        Ok(())
    })
}

/// Wrap `m` interleaved `(x, y)` pairs as a code.
///
/// # Safety
/// `xy` must point to `2 * m` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn dc_code_from_points(xy: *const f64, m: usize, out: *mut *mut DcCode) -> DcStatus {
    guard(|| {
        out_ptr(out)?;
        if xy.is_null() {
            return Err(fail(DcStatus::NullArgument, "points are null"));
        }
        let flat = std::slice::from_raw_parts(xy, 2 * m);
        let points = flat.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
        *out = Box::into_raw(Box::new(DcCode(DensityCode::from_points(points))));
        Ok(())
    })
}

/// # Safety
/// `code` must be null or a live code handle.
#[no_mangle]
pub unsafe extern "C" fn dc_code_len(code: *const DcCode) -> usize {
    code.as_ref().map_or(0, |c| c.0.len())
}

/// Copy the points as interleaved `(x, y)` into `xy`, which holds
/// `capacity` points.
///
/// # Safety
/// `xy` must be writable for `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn dc_code_points(code: *const DcCode, xy: *mut f64, capacity: usize) -> DcStatus {
    guard(|| {
        let code = handle(code, "code")?;
        if xy.is_null() {
            return Err(fail(DcStatus::NullArgument, "output buffer is null"));
        }
        let m = code.0.len();
        if capacity < m {
            return Err(fail(
                DcStatus::BufferTooSmall,
                format!("buffer holds {capacity} points, code has {m}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(xy, 2 * m);
        for (d, p) in dst.chunks_exact_mut(2).zip(code.0.points()) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_code_read(path: *const c_char, out: *mut *mut DcCode) -> DcStatus {
    guard(|| {
        out_ptr(out)?;
        let path = path_arg(path)?;
        let code = lib(codefile::read(&path))?;
        *out = Box::into_raw(Box::new(DcCode(code)));
        Ok(())
    })
}

/// # Safety
/// `code` must be live and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_code_write(code: *const DcCode, path: *const c_char) -> DcStatus {
    guard(|| {
        let code = handle(code, "code")?;
        let path = path_arg(path)?;
        lib(codefile::write(&code.0, &path))
    })
}

/// # Safety
/// `code` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_code_free(code: *mut DcCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Median residual (percent of the target spread) after fitting a degree
/// `degree` polynomial map from `reference` onto `target`.
///
/// # Safety
/// Both handles must be live and `delta` writable.
#[no_mangle]
pub unsafe extern "C" fn dc_delta_median(
    reference: *const DcCode,
    target: *const DcCode,
    degree: u32,
    delta: *mut f64,
) -> DcStatus {
    guard(|| {
        let v = handle(reference, "reference")?;
        let w = handle(target, "target")?;
        if delta.is_null() {
            return Err(fail(DcStatus::NullArgument, "delta is null"));
        }
        *delta = lib(delta_median(&v.0, &w.0, degree))?.delta;
        Ok(())
    })
}
