//! C ABI for shiptrack.
//!
//! Objects cross the boundary as opaque handles created by `st_*_new` /
//! `st_*_load` functions and released with the matching `st_*_free`. Every
//! fallible call returns an [`StStatus`]; on failure the message is available
//! from [`st_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use shiptrack::calibrator::{calibrate, Correspondence};
use shiptrack::camera::{camera_heading, CameraModel, DistortionModel, Homography, Pixel, ScreenPoint};
use shiptrack::config::Config;
use shiptrack::geodesy::{gps_to_local, haversine, local_to_gps, EarthModel, GeoPoint, WorldPoint};
use shiptrack::ingest::{Detection, GpsSample};
use shiptrack::pipeline::run_track;
use shiptrack::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// A geometric operation has no finite answer (horizon, divergence).
    Geometry = 5,
    /// Calibration or tracking input cannot determine a result.
    Degenerate = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Opaque camera model.
pub struct StCamera(CameraModel);

/// Opaque tracking result: the target's GPS fixes.
pub struct StTrack(Vec<GpsSample>);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StCorrespondence {
    pub timestamp_s: f64,
    pub x_s: f64,
    pub y_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

/// Detection in detector pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct StDetection {
    pub frame: u64,
    pub timestamp_s: f64,
    pub confidence: f64,
    pub cx: f64,
    pub cy: f64,
    pub sx: f64,
    pub sy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StGpsFix {
    pub timestamp_s: f64,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> StStatus {
    match e {
        Error::File { source, .. } => status_of(source),
        Error::Parse { .. } | Error::Csv(_) => StStatus::Parse,
        Error::Io(_) => StStatus::Io,
        Error::AtInfinity
        | Error::OnHorizon
        | Error::NoConvergence { .. }
        | Error::NoHorizonIntersection
        | Error::DegenerateRow
        | Error::PolarOrigin => StStatus::Geometry,
        Error::DegenerateConfiguration(_)
        | Error::DegenerateData(_)
        | Error::SingularInnovation
        | Error::NoTrajectories
        | Error::AllMasked
        | Error::EmptyTrack
        | Error::NoOverlap => StStatus::Degenerate,
        Error::OutOfRange { .. } => StStatus::OutOfRange,
        _ => StStatus::InvalidArgument,
    }
}

/// Runs `f`, recording the error message and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (StStatus, String)>) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StStatus::Panic
        }
    }
}

fn lift<T>(r: shiptrack::Result<T>) -> Result<T, (StStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (StStatus, String) {
    (StStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (StStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (StStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (StStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn camera_arg<'a>(p: *const StCamera) -> Result<&'a CameraModel, (StStatus, String)> {
    p.as_ref().map(|c| &c.0).ok_or_else(|| null("camera"))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (StStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a camera from a row-major homography, distortion and origin.
///
/// # Safety
/// `h` must point to 9 readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_camera_new(
    h: *const f64,
    k1: f64,
    center_x: f64,
    center_y: f64,
    origin_lat_deg: f64,
    origin_lon_deg: f64,
    width: u32,
    height: u32,
    out: *mut *mut StCamera,
) -> StStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = slice_arg(h, 9, "h")?;
        let rows = [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]];
        let cam = lift(Homography::from_rows(rows).and_then(|h| {
            CameraModel::with_origin_degrees(
                h,
                DistortionModel::new(k1, Pixel::new(center_x, center_y)),
                [origin_lat_deg, origin_lon_deg],
                (width, height),
            )
        }))?;
        *out = Box::into_raw(Box::new(StCamera(cam)));
        Ok(())
    })
}

/// Parses a camera document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_camera_from_document(text: *const c_char, out: *mut *mut StCamera) -> StStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cam = lift(CameraModel::from_document(str_arg(text, "text")?))?;
        *out = Box::into_raw(Box::new(StCamera(cam)));
        Ok(())
    })
}

/// Reads a camera file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_camera_load(path: *const c_char, out: *mut *mut StCamera) -> StStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = Path::new(str_arg(path, "path")?);
        let text = lift(std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path)))?;
        let cam = lift(CameraModel::from_document(&text).map_err(|e| e.in_file(path)))?;
        *out = Box::into_raw(Box::new(StCamera(cam)));
        Ok(())
    })
}

/// Serializes a camera. The returned string must be released with
/// [`st_string_free`].
///
/// # Safety
/// `cam` must be a live handle and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn st_camera_to_document(cam: *const StCamera, out: *mut *mut c_char) -> StStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = camera_arg(cam)?.to_document();
        *out =
            CString::new(doc).map_err(|_| (StStatus::InvalidArgument, "document contains NUL".to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `cam` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_camera_free(cam: *mut StCamera) {
    if !cam.is_null() {
        drop(Box::from_raw(cam));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Screen pixel to sea-plane meters; `z` receives the signed projective scale.
///
/// # Safety
/// `cam` must be a live handle; `x_w`, `y_w`, `z` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn st_camera_screen_to_world(
    cam: *const StCamera,
    x: f64,
    y: f64,
    x_w: *mut f64,
    y_w: *mut f64,
    z: *mut f64,
) -> StStatus {
    guard(|| {
        let cam = camera_arg(cam)?;
        let (xo, yo, zo) = (out_arg(x_w, "x_w")?, out_arg(y_w, "y_w")?, out_arg(z, "z")?);
        let (w, scale) = lift(cam.screen_to_world(ScreenPoint::new(x, y)))?;
        (*xo, *yo, *zo) = (w.x, w.y, scale);
        Ok(())
    })
}

/// Sea-plane meters to screen pixel.
///
/// # Safety
/// `cam` must be a live handle; `x`, `y`, `z` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn st_camera_world_to_screen(
    cam: *const StCamera,
    x_w: f64,
    y_w: f64,
    x: *mut f64,
    y: *mut f64,
    z: *mut f64,
) -> StStatus {
    guard(|| {
        let cam = camera_arg(cam)?;
        let (xo, yo, zo) = (out_arg(x, "x")?, out_arg(y, "y")?, out_arg(z, "z")?);
        let (s, scale) = lift(cam.world_to_screen(WorldPoint::new(x_w, y_w)))?;
        (*xo, *yo, *zo) = (s.x, s.y, scale);
        Ok(())
    })
}

/// Bearing of the optical axis in degrees clockwise from north.
///
/// # Safety
/// `cam` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn st_camera_heading_deg(cam: *const StCamera, out: *mut f64) -> StStatus {
    guard(|| {
        let cam = camera_arg(cam)?;
        let out = out_arg(out, "out")?;
        *out = lift(camera_heading(cam))?.to_degrees();
        Ok(())
    })
}

/// Local east/north meters of a GPS point relative to an origin.
///
/// # Safety
/// `x`, `y` must be writable doubles.
#[no_mangle]
pub unsafe extern "C" fn st_gps_to_local(
    origin_lat_deg: f64,
    origin_lon_deg: f64,
    lat_deg: f64,
    lon_deg: f64,
    x: *mut f64,
    y: *mut f64,
) -> StStatus {
    guard(|| {
        let (xo, yo) = (out_arg(x, "x")?, out_arg(y, "y")?);
        let w = gps_to_local(
            GeoPoint::from_degrees(lat_deg, lon_deg),
            GeoPoint::from_degrees(origin_lat_deg, origin_lon_deg),
            EarthModel::default(),
        );
        (*xo, *yo) = (w.x, w.y);
        Ok(())
    })
}

/// Inverse of [`st_gps_to_local`].
///
/// # Safety
/// `lat_deg`, `lon_deg` must be writable doubles.
#[no_mangle]
pub unsafe extern "C" fn st_local_to_gps(
    origin_lat_deg: f64,
    origin_lon_deg: f64,
    x: f64,
    y: f64,
    lat_deg: *mut f64,
    lon_deg: *mut f64,
) -> StStatus {
    guard(|| {
        let (lat, lon) = (out_arg(lat_deg, "lat_deg")?, out_arg(lon_deg, "lon_deg")?);
        let g = lift(local_to_gps(
            WorldPoint::new(x, y),
            GeoPoint::from_degrees(origin_lat_deg, origin_lon_deg),
            EarthModel::default(),
        ))?;
        (*lat, *lon) = (g.lat_deg(), g.lon_deg());
        Ok(())
    })
}

/// Great-circle distance in meters on the default earth.
#[no_mangle]
pub extern "C" fn st_haversine_m(lat1_deg: f64, lon1_deg: f64, lat2_deg: f64, lon2_deg: f64) -> f64 {
    haversine(
        GeoPoint::from_degrees(lat1_deg, lon1_deg),
        GeoPoint::from_degrees(lat2_deg, lon2_deg),
        EarthModel::default(),
    )
}

/// Calibrates with the default configuration and the given camera position.
/// `k1` and `rmse_px` may be null.
///
/// # Safety
/// `pairs` must point to `n` readable correspondences and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_calibrate(
    pairs: *const StCorrespondence,
    n: usize,
    origin_lat_deg: f64,
    origin_lon_deg: f64,
    out: *mut *mut StCamera,
    k1: *mut f64,
    rmse_px: *mut f64,
) -> StStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pairs: Vec<Correspondence> = slice_arg(pairs, n, "pairs")?
            .iter()
            .map(|p| Correspondence {
                timestamp: p.timestamp_s,
                screen: ScreenPoint::new(p.x_s, p.y_s),
                geo: GeoPoint::from_degrees(p.lat_deg, p.lon_deg),
            })
            .collect();
        let cfg = Config { origin_deg: Some([origin_lat_deg, origin_lon_deg]), ..Config::default() };
        let result = lift(cfg.calibration_setup().and_then(|s| calibrate(&pairs, &s)))?;
        if let Some(k) = k1.as_mut() {
            *k = result.k1();
        }
        if let Some(r) = rmse_px.as_mut() {
            *r = result.rmse();
        }
        *out = Box::into_raw(Box::new(StCamera(result.camera)));
        Ok(())
    })
}

/// Tracks the target vessel with the default configuration. `fps <= 0`
/// derives the frame rate from the timestamps.
///
/// # Safety
/// `cam` must be a live handle, `dets` must point to `n` readable detections
/// sorted by frame, and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_track(
    cam: *const StCamera,
    dets: *const StDetection,
    n: usize,
    fps: f64,
    out: *mut *mut StTrack,
) -> StStatus {
    guard(|| {
        let cam = camera_arg(cam)?;
        let out = out_arg(out, "out")?;
        let dets: Vec<Detection> = slice_arg(dets, n, "dets")?
            .iter()
            .map(|d| Detection {
                frame_index: d.frame,
                timestamp: d.timestamp_s,
                confidence: d.confidence,
                cx: d.cx,
                cy: d.cy,
                sx: d.sx,
                sy: d.sy,
            })
            .collect();
        if dets.windows(2).any(|w| w[1].frame_index < w[0].frame_index) {
            return Err((StStatus::InvalidArgument, "detections must be sorted by frame".into()));
        }
        let cfg = Config { fps: (fps > 0.0).then_some(fps), ..Config::default() };
        let result = lift(run_track(&dets, cam, &cfg))?;
        *out = Box::into_raw(Box::new(StTrack(result.gps)));
        Ok(())
    })
}

/// Number of fixes in a track; 0 for null.
///
/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn st_track_len(track: *const StTrack) -> usize {
    track.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `track` must be a live handle and `out` a writable fix.
#[no_mangle]
pub unsafe extern "C" fn st_track_get(track: *const StTrack, i: usize, out: *mut StGpsFix) -> StStatus {
    guard(|| {
        let t = track.as_ref().ok_or_else(|| null("track"))?;
        let out = out_arg(out, "out")?;
        let g =
            t.0.get(i)
                .ok_or_else(|| (StStatus::OutOfRange, format!("index {i} outside track of {} fixes", t.0.len())))?;
        *out = StGpsFix { timestamp_s: g.timestamp, lat_deg: g.point.lat_deg(), lon_deg: g.point.lon_deg() };
        Ok(())
    })
}

/// # Safety
/// `track` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_track_free(track: *mut StTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}
