//! Detections to GPS: tracking, selection, fusion, deprojection, gap filling.

use crate::camera::CameraModel;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fusion::{
    fuse_trajectory, interpolate_missing, smooth_and_mask, to_world, track_to_gps, FusedPoint, WorldTrack,
};
use crate::ingest::{detector_to_calibration_space, Detection, GpsSample};
use crate::tracker::{select_and_stitch, track_detections, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    /// Every trajectory, in screen pixels.
    pub trajectories: Vec<Trajectory>,
    /// The selected and stitched target.
    pub target: Trajectory,
    pub fused: Vec<FusedPoint>,
    pub world: WorldTrack,
    pub gps: Vec<GpsSample>,
}

/// Seconds per frame: the configured rate, else the median spacing of
/// consecutive distinct frames.
pub fn frame_interval(detections: &[Detection], fps: Option<f64>) -> Result<f64> {
    if let Some(fps) = fps {
        return Ok(1.0 / fps);
    }
    let mut frames: Vec<(u64, f64)> = detections.iter().map(|d| (d.frame_index, d.timestamp)).collect();
    frames.dedup_by_key(|f| f.0);
    let mut steps: Vec<f64> =
        frames.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64).filter(|s| *s > 0.0).collect();
    if steps.is_empty() {
        return Err(Error::Config("cannot derive the frame rate; set ingest.fps".into()));
    }
    steps.sort_by(f64::total_cmp);
    Ok(steps[steps.len() / 2])
}

/// Runs the full chain on detector-space detections sorted by frame.
pub fn run_track(detections: &[Detection], cam: &CameraModel, cfg: &Config) -> Result<TrackOutput> {
    cfg.validate()?;
    let dt = frame_interval(detections, cfg.fps)?;
    let kalman = cfg.kalman.build(dt);
    let screen: Vec<Detection> = detections.iter().map(|d| detector_to_calibration_space(d, &cfg.geometry)).collect();
    let trajectories = track_detections(&screen, cfg.tracker, kalman)?;
    let target = select_and_stitch(&trajectories, &cfg.tracker, cam)?;
    let fused = fuse_trajectory(&target, cam, &cfg.bbox, cfg.geometry.detector_scale, &cfg.fusion);
    let fused = smooth_and_mask(&fused, &kalman, &cfg.fusion)?;
    let world = interpolate_missing(&to_world(&fused, cam, &cfg.fusion), &cfg.fusion)?;
    let gps = track_to_gps(&world, cfg.earth)?;
    Ok(TrackOutput { trajectories, target, fused, world, gps })
}
