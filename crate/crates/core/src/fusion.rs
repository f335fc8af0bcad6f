//! From a pixel trajectory to a world and GPS track.
//!
//! The detected vertical position is averaged with the positions implied by
//! the box width and height, smoothed by a forward Kalman pass that masks
//! outliers, deprojected onto the sea plane and gap-filled with a natural
//! cubic spline.

use std::fmt;
use std::io::Write;

use crate::camera::{deproject, distance_from_size, y_p_from_distance, BBoxSizeModel, CameraModel, Pixel, ScreenPoint};
use crate::error::{Error, Result};
use crate::geodesy::{local_to_gps, EarthModel, GeoPoint, WorldPoint};
use crate::ingest::GpsSample;
use crate::tracker::{kalman_predict, kalman_update, KalmanConfig, KalmanState, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weights of the detected y, the width-implied y and the height-implied y.
    pub weights: [f64; 3],
    pub mask_threshold: f64,
    pub iterations: usize,
    pub far_limit: f64,
    pub clip_limit: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { weights: [0.5, 0.25, 0.25], mask_threshold: 5.0, iterations: 5, far_limit: 2000.0, clip_limit: 2000.0 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "fusion weights must be non-negative and sum to 1, got {:?}",
                self.weights
            )));
        }
        if !(self.mask_threshold > 0.0) || self.iterations == 0 || !(self.far_limit > 0.0) || !(self.clip_limit > 0.0) {
            return Err(Error::Config(format!("invalid fusion configuration {self:?}")));
        }
        Ok(())
    }
}

/// One frame of the fused trajectory, in projected pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedPoint {
    pub frame_index: u64,
    pub timestamp: f64,
    /// Detected y, width-implied y, height-implied y.
    pub sources: [Option<f64>; 3],
    /// Fused measurement; `None` for frames without a detection.
    pub fused: Option<Pixel>,
    /// Filter estimate; `None` before the first usable measurement.
    pub smoothed: Option<Pixel>,
    pub masked: bool,
}

impl FusedPoint {
    pub fn is_usable(&self) -> bool {
        self.fused.is_some() && !self.masked
    }
}

/// Fuses one detection. `size` is the box in detector pixels, where the
/// size model is defined.
pub fn fuse_y(
    center: ScreenPoint,
    size: (f64, f64),
    cam: &CameraModel,
    model: &BBoxSizeModel,
    cfg: &FusionConfig,
) -> ([Option<f64>; 3], Pixel) {
    let p = cam.screen_to_projected(center);
    let from_size = |s: f64, numerator: f64| {
        let distance = distance_from_size(s, numerator, model.b)?;
        y_p_from_distance(cam.forward_sign() * distance, p.x, cam.homography()).ok()
    };
    let sources = [Some(p.y), from_size(size.0, model.a_x), from_size(size.1, model.a_y)];
    (sources, Pixel::new(p.x, weighted_y(&sources, &cfg.weights)))
}

/// Weighted mean of the available sources, weights renormalized.
pub fn weighted_y(sources: &[Option<f64>; 3], weights: &[f64; 3]) -> f64 {
    let (num, den) = sources
        .iter()
        .zip(weights)
        .filter_map(|(s, w)| s.map(|s| (s * w, *w)))
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
    if den > 0.0 {
        num / den
    } else {
        sources[0].unwrap_or(f64::NAN)
    }
}

/// Fuses every observed point of a trajectory. Unobserved frames are kept as
/// gaps. `detector_scale` converts the stored screen-space box sizes back to
/// detector pixels.
pub fn fuse_trajectory(
    t: &Trajectory,
    cam: &CameraModel,
    model: &BBoxSizeModel,
    detector_scale: f64,
    cfg: &FusionConfig,
) -> Vec<FusedPoint> {
    t.points
        .iter()
        .map(|p| {
            let (sources, fused) = if p.observed {
                let size = (p.size.0 / detector_scale, p.size.1 / detector_scale);
                let (s, f) = fuse_y(ScreenPoint::new(p.center.x, p.center.y), size, cam, model, cfg);
                (s, Some(f))
            } else {
                ([None; 3], None)
            };
            FusedPoint {
                frame_index: p.frame_index,
                timestamp: p.timestamp,
                sources,
                fused,
                smoothed: None,
                masked: false,
            }
        })
        .collect()
}

fn forward_pass(points: &mut [FusedPoint], kc: &KalmanConfig) -> Result<()> {
    let mut state: Option<(KalmanState, u64)> = None;
    for p in points.iter_mut() {
        let prior = state.map(|(mut s, frame)| {
            for _ in frame..p.frame_index {
                s = kalman_predict(&s, kc);
            }
            s
        });
        let posterior = match (prior, p.fused.filter(|_| !p.masked)) {
            (Some(s), Some(z)) => Some(kalman_update(&s, z, kc)?),
            (None, Some(z)) => Some(KalmanState::spawn(z, kc)),
            (s, None) => s,
        };
        p.smoothed = posterior.map(|s| s.position());
        if let Some(s) = posterior {
            state = Some((s, p.frame_index));
        }
    }
    Ok(())
}

/// Iterated smoothing with outlier masking; returns the mask of every round.
/// Stops early once a round leaves the masks unchanged.
pub fn smooth_and_mask_history(
    points: &[FusedPoint],
    kc: &KalmanConfig,
    cfg: &FusionConfig,
) -> Result<(Vec<FusedPoint>, Vec<Vec<bool>>)> {
    let mut out = points.to_vec();
    let mut history = Vec::new();
    for _ in 0..cfg.iterations {
        if !out.iter().any(FusedPoint::is_usable) {
            return Err(Error::AllMasked);
        }
        forward_pass(&mut out, kc)?;
        let masks: Vec<bool> = out
            .iter()
            .map(|p| match (p.fused, p.smoothed) {
                (Some(f), Some(s)) => (f.y - s.y).abs() > cfg.mask_threshold,
                _ => false,
            })
            .collect();
        let stable = out.iter().zip(&masks).all(|(p, m)| p.masked == *m);
        for (p, m) in out.iter_mut().zip(&masks) {
            p.masked = *m;
        }
        history.push(masks);
        if stable {
            break;
        }
    }
    if !out.iter().any(FusedPoint::is_usable) {
        return Err(Error::AllMasked);
    }
    // the returned estimate reflects the final masks
    forward_pass(&mut out, kc)?;
    Ok((out, history))
}

pub fn smooth_and_mask(points: &[FusedPoint], kc: &KalmanConfig, cfg: &FusionConfig) -> Result<Vec<FusedPoint>> {
    smooth_and_mask_history(points, kc, cfg).map(|(p, _)| p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    Masked,
    /// No filter estimate exists for the frame.
    Missing,
    OnHorizon,
    /// Deprojects behind the camera, i.e. above the horizon.
    AboveHorizon,
    TooFar,
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exclusion::Masked => "masked",
            Exclusion::Missing => "missing",
            Exclusion::OnHorizon => "on_horizon",
            Exclusion::AboveHorizon => "above_horizon",
            Exclusion::TooFar => "too_far",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldTrackPoint {
    pub timestamp: f64,
    /// Present for valid and gap-filled points.
    pub world: Option<WorldPoint>,
    pub masked: bool,
    pub clipped: bool,
    /// Why the frame's own estimate was rejected. Gap filling keeps the reason.
    pub excluded: Option<Exclusion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldTrack {
    pub points: Vec<WorldTrackPoint>,
    pub origin: GeoPoint,
}

fn clip(w: WorldPoint, limit: f64) -> (WorldPoint, bool) {
    let c = WorldPoint::new(w.x.clamp(-limit, limit), w.y.clamp(-limit, limit));
    (c, c != w)
}

/// Deprojects the smoothed points.
pub fn to_world(points: &[FusedPoint], cam: &CameraModel, cfg: &FusionConfig) -> WorldTrack {
    let points = points
        .iter()
        .map(|p| {
            let mut out = WorldTrackPoint {
                timestamp: p.timestamp,
                world: None,
                masked: p.masked,
                clipped: false,
                excluded: None,
            };
            let estimate = match p.smoothed {
                _ if p.masked => Err(Exclusion::Masked),
                None => Err(Exclusion::Missing),
                Some(s) => match deproject(s, cam.homography()) {
                    Err(_) => Err(Exclusion::OnHorizon),
                    Ok((_, z)) if !cam.is_forward(z) => Err(Exclusion::AboveHorizon),
                    Ok((_, z)) if z.abs() > cfg.far_limit => Err(Exclusion::TooFar),
                    Ok((w, _)) => Ok(w),
                },
            };
            match estimate {
                Ok(w) => {
                    let (w, clipped) = clip(w, cfg.clip_limit);
                    out.world = Some(w);
                    out.clipped = clipped;
                }
                Err(e) => out.excluded = Some(e),
            }
            out
        })
        .collect();
    WorldTrack { points, origin: cam.origin() }
}

/// Second derivatives of the natural cubic spline through `(t, v)`.
fn natural_spline_moments(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior moments, Thomas algorithm
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((v[i + 2] - v[i + 1]) / h1 - (v[i + 1] - v[i]) / h0);
    }
    for i in 1..k {
        let lower = t[i + 1] - t[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
    }
    m
}

fn spline_eval(t: &[f64], v: &[f64], m: &[f64], x: f64) -> f64 {
    let i = t.partition_point(|ti| *ti <= x).clamp(1, t.len() - 1) - 1;
    let h = t[i + 1] - t[i];
    let (a, b) = ((t[i + 1] - x) / h, (x - t[i]) / h);
    a * v[i] + b * v[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
}

/// Interpolant through the samples: natural cubic from four samples,
/// piecewise linear from two, constant from one.
pub fn interpolate(t: &[f64], v: &[f64], x: f64) -> f64 {
    match t.len() {
        0 => f64::NAN,
        1 => v[0],
        2 | 3 => spline_eval(t, v, &[0.0; 3][..t.len()], x),
        _ => spline_eval(t, v, &natural_spline_moments(t, v), x),
    }
}

/// Fills excluded frames inside the valid span. Nothing is extrapolated.
pub fn interpolate_missing(track: &WorldTrack, cfg: &FusionConfig) -> Result<WorldTrack> {
    let valid: Vec<_> = track.points.iter().filter(|p| p.excluded.is_none() && p.world.is_some()).collect();
    if valid.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let t: Vec<f64> = valid.iter().map(|p| p.timestamp).collect();
    let xs: Vec<f64> = valid.iter().map(|p| p.world.unwrap().x).collect();
    let ys: Vec<f64> = valid.iter().map(|p| p.world.unwrap().y).collect();
    let moments =
        if t.len() >= 4 { Some((natural_spline_moments(&t, &xs), natural_spline_moments(&t, &ys))) } else { None };
    let (first, last) = (t[0], t[t.len() - 1]);
    let points = track
        .points
        .iter()
        .map(|p| {
            if p.excluded.is_none() || p.timestamp < first || p.timestamp > last {
                return *p;
            }
            let w = match &moments {
                Some((mx, my)) => {
                    WorldPoint::new(spline_eval(&t, &xs, mx, p.timestamp), spline_eval(&t, &ys, my, p.timestamp))
                }
                None => WorldPoint::new(interpolate(&t, &xs, p.timestamp), interpolate(&t, &ys, p.timestamp)),
            };
            let (w, clipped) = clip(w, cfg.clip_limit);
            WorldTrackPoint { world: Some(w), clipped, ..*p }
        })
        .collect();
    Ok(WorldTrack { points, origin: track.origin })
}

/// GPS fixes for every point that has a world position.
pub fn track_to_gps(track: &WorldTrack, earth: EarthModel) -> Result<Vec<GpsSample>> {
    track
        .points
        .iter()
        .filter_map(|p| p.world.map(|w| (p.timestamp, w)))
        .map(|(timestamp, w)| Ok(GpsSample { timestamp, point: local_to_gps(w, track.origin, earth)? }))
        .collect()
}

pub const WORLD_TRACK_HEADER: [&str; 6] = ["timestamp_s", "x_w", "y_w", "masked", "clipped", "excluded_reason"];

pub fn write_world_track(w: impl Write, track: &WorldTrack) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(WORLD_TRACK_HEADER)?;
    for p in &track.points {
        let (x, y) = p.world.map_or((String::new(), String::new()), |w| (w.x.to_string(), w.y.to_string()));
        writer.write_record([
            p.timestamp.to_string(),
            x,
            y,
            u8::from(p.masked).to_string(),
            u8::from(p.clipped).to_string(),
            p.excluded.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
