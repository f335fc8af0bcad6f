//! Multi-vessel tracking in screen pixels.
//!
//! Every trajectory runs a constant-velocity Kalman filter. Detections in a
//! frame are accounted to the nearest predicted position within the gate; a
//! trajectory then updates with the closest detection accounted to it, and
//! detections no trajectory claimed start new trajectories. A trajectory that
//! goes unupdated for more than `finish_after` frames is finished.

use std::io::Write;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::camera::{CameraModel, Pixel, ScreenPoint};
use crate::error::{Error, Result};
use crate::ingest::Detection;

/// Linear-Gaussian motion and observation model. The state is
/// `(x, vx, y, vy)`; velocities are in pixels per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub dt: f64,
    pub transition: Matrix4<f64>,
    pub observation: Matrix2x4<f64>,
    pub process_cov: Matrix4<f64>,
    pub observation_cov: Matrix2<f64>,
    /// Prior velocity variance of a freshly spawned trajectory.
    pub initial_velocity_var: f64,
}

impl KalmanConfig {
    /// Model with `Q = diag(0, dt², 0, dt²)` and `R = diag(10², 10²)`.
    pub fn new(dt: f64) -> Self {
        Self::with_noise(dt, 1.0, 10.0)
    }

    /// `Q = q * diag(0, dt², 0, dt²)`, `R = sigma² I`.
    pub fn with_noise(dt: f64, q: f64, observation_sigma: f64) -> Self {
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 1.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 1.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let observation = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        let qv = q * dt * dt;
        let r = observation_sigma * observation_sigma;
        Self {
            dt,
            transition,
            observation,
            process_cov: Matrix4::from_diagonal(&Vector4::new(0.0, qv, 0.0, qv)),
            observation_cov: Matrix2::from_diagonal(&Vector2::new(r, r)),
            initial_velocity_var: 100.0 * 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl KalmanState {
    /// At rest at `z`, with the observation variance on position and an
    /// uninformative velocity.
    pub fn spawn(z: Pixel, c: &KalmanConfig) -> Self {
        Self {
            mean: Vector4::new(z.x, 0.0, z.y, 0.0),
            cov: Matrix4::from_diagonal(&Vector4::new(
                c.observation_cov[(0, 0)],
                c.initial_velocity_var,
                c.observation_cov[(1, 1)],
                c.initial_velocity_var,
            )),
        }
    }

    pub fn position(&self) -> Pixel {
        Pixel::new(self.mean[0], self.mean[2])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[1], self.mean[3])
    }
}

pub fn kalman_predict(s: &KalmanState, c: &KalmanConfig) -> KalmanState {
    let f = &c.transition;
    let cov = f * s.cov * f.transpose() + c.process_cov;
    KalmanState { mean: f * s.mean, cov: 0.5 * (cov + cov.transpose()) }
}

pub fn kalman_update(s: &KalmanState, z: Pixel, c: &KalmanConfig) -> Result<KalmanState> {
    let h = &c.observation;
    let innovation = Vector2::new(z.x, z.y) - h * s.mean;
    let innovation_cov = h * s.cov * h.transpose() + c.observation_cov;
    let inv = innovation_cov.try_inverse().ok_or(Error::SingularInnovation)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let gain = s.cov * h.transpose() * inv;
    // Joseph form keeps the covariance positive semi-definite
    let i_kh = Matrix4::identity() - gain * h;
    let cov = i_kh * s.cov * i_kh.transpose() + gain * c.observation_cov * gain.transpose();
    Ok(KalmanState { mean: s.mean + gain * innovation, cov: 0.5 * (cov + cov.transpose()) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub gate_radius: f64,
    pub finish_after: u64,
    pub percentile: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { gate_radius: 80.0, finish_after: 10, percentile: 0.8 }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate_radius > 0.0) || self.finish_after == 0 || !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return Err(Error::Config(format!("invalid tracker configuration {self:?}")));
        }
        Ok(())
    }
}

/// One frame of a trajectory. Unobserved points carry the filter prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame_index: u64,
    pub timestamp: f64,
    pub center: Pixel,
    pub size: (f64, f64),
    pub confidence: f64,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub points: Vec<TrackPoint>,
    pub kalman: KalmanState,
    pub frames_since_update: u64,
}

impl Trajectory {
    pub fn observed(&self) -> impl Iterator<Item = &TrackPoint> {
        self.points.iter().filter(|p| p.observed)
    }

    pub fn first_observed(&self) -> Option<&TrackPoint> {
        self.observed().next()
    }

    pub fn last_observed(&self) -> Option<&TrackPoint> {
        self.points.iter().rev().find(|p| p.observed)
    }

    /// Frame span of the observed points.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.first_observed()?.frame_index, self.last_observed()?.frame_index))
    }

    fn trim_unobserved_tail(&mut self) {
        while self.points.last().is_some_and(|p| !p.observed) {
            self.points.pop();
        }
    }
}

/// Per-frame bookkeeping returned by [`Tracker::step`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub spawned: Vec<u64>,
    pub finished: Vec<u64>,
    /// Trajectory id each input detection was accounted to, if any.
    pub accounted: Vec<Option<u64>>,
}

/// Single-stream tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    kalman: KalmanConfig,
    live: Vec<Trajectory>,
    finished: Vec<Trajectory>,
    next_id: u64,
    last_frame: Option<(u64, f64)>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, kalman: KalmanConfig) -> Self {
        Self { cfg, kalman, live: Vec::new(), finished: Vec::new(), next_id: 0, last_frame: None }
    }

    pub fn live(&self) -> &[Trajectory] {
        &self.live
    }

    pub fn finished(&self) -> &[Trajectory] {
        &self.finished
    }

    /// Advances to `frame_index` and consumes that frame's detections, which
    /// must be in screen pixels.
    pub fn step(&mut self, frame_index: u64, timestamp: f64, detections: &[Detection]) -> Result<StepOutcome> {
        let elapsed = match self.last_frame {
            Some((last, _)) if frame_index <= last => {
                return Err(Error::Config(format!("frames must advance: {frame_index} after {last}")))
            }
            Some((last, _)) => frame_index - last,
            None => 1,
        };
        self.last_frame = Some((frame_index, timestamp));

        for t in &mut self.live {
            for _ in 0..elapsed {
                t.kalman = kalman_predict(&t.kalman, &self.kalman);
            }
        }

        // account every detection to its nearest prediction within the gate
        let accounted: Vec<Option<usize>> = detections
            .iter()
            .map(|d| {
                let mut best: Option<(usize, f64)> = None;
                for (i, t) in self.live.iter().enumerate() {
                    let dist = t.kalman.position().distance(&d.center());
                    if dist <= self.cfg.gate_radius && best.is_none_or(|(_, b)| dist < b) {
                        best = Some((i, dist));
                    }
                }
                best.map(|(i, _)| i)
            })
            .collect();

        let mut outcome = StepOutcome {
            accounted: accounted.iter().map(|a| a.map(|i| self.live[i].id)).collect(),
            ..Default::default()
        };

        for (i, t) in self.live.iter_mut().enumerate() {
            let predicted = t.kalman.position();
            let closest = detections
                .iter()
                .zip(&accounted)
                .filter(|(_, a)| **a == Some(i))
                .map(|(d, _)| (d, d.center().distance(&predicted)))
                .fold(None::<(&Detection, f64)>, |best, (d, dist)| match best {
                    Some((_, b)) if b <= dist => best,
                    _ => Some((d, dist)),
                });
            match closest {
                Some((d, _)) => {
                    t.kalman = kalman_update(&t.kalman, d.center(), &self.kalman)?;
                    t.frames_since_update = 0;
                    t.points.push(TrackPoint {
                        frame_index,
                        timestamp,
                        center: d.center(),
                        size: (d.sx, d.sy),
                        confidence: d.confidence,
                        observed: true,
                    });
                }
                None => {
                    t.frames_since_update += elapsed;
                    t.points.push(TrackPoint {
                        frame_index,
                        timestamp,
                        center: predicted,
                        size: (0.0, 0.0),
                        confidence: 0.0,
                        observed: false,
                    });
                }
            }
        }

        let finish_after = self.cfg.finish_after;
        let (done, live): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.live).into_iter().partition(|t| t.frames_since_update > finish_after);
        self.live = live;
        for mut t in done {
            t.trim_unobserved_tail();
            outcome.finished.push(t.id);
            self.finished.push(t);
        }

        for (d, a) in detections.iter().zip(&accounted) {
            if a.is_some() {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.live.push(Trajectory {
                id,
                points: vec![TrackPoint {
                    frame_index,
                    timestamp,
                    center: d.center(),
                    size: (d.sx, d.sy),
                    confidence: d.confidence,
                    observed: true,
                }],
                kalman: KalmanState::spawn(d.center(), &self.kalman),
                frames_since_update: 0,
            });
            outcome.spawned.push(id);
        }
        Ok(outcome)
    }

    /// Finishes every live trajectory and returns all trajectories by id.
    pub fn finish(mut self) -> Vec<Trajectory> {
        for mut t in self.live.drain(..) {
            t.trim_unobserved_tail();
            self.finished.push(t);
        }
        self.finished.sort_by_key(|t| t.id);
        self.finished
    }
}

/// Runs the tracker over screen-space detections (sorted by frame) and
/// returns every trajectory. Frames without detections still advance the
/// filters.
pub fn track_detections(detections: &[Detection], cfg: TrackerConfig, kalman: KalmanConfig) -> Result<Vec<Trajectory>> {
    let mut tracker = Tracker::new(cfg, kalman);
    let mut i = 0;
    while i < detections.len() {
        let frame = detections[i].frame_index;
        let end = i + detections[i..].iter().take_while(|d| d.frame_index == frame).count();
        tracker.step(frame, detections[i].timestamp, &detections[i..end])?;
        i = end;
    }
    Ok(tracker.finish())
}

/// Length in meters of the path through the observed points, measured on the
/// sea plane. Points that do not deproject in front of the camera are
/// skipped.
pub fn arc_length(t: &Trajectory, cam: &CameraModel) -> f64 {
    let world: Vec<_> = t
        .observed()
        .filter_map(|p| cam.screen_to_world(ScreenPoint::new(p.center.x, p.center.y)).ok())
        .filter(|(_, z)| cam.is_forward(*z))
        .map(|(w, _)| w)
        .collect();
    world.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Nearest-rank percentile of the observed confidences.
pub fn confidence_percentile(t: &Trajectory, percentile: f64) -> Option<f64> {
    let mut c: Vec<f64> = t.observed().map(|p| p.confidence).collect();
    if c.is_empty() {
        return None;
    }
    c.sort_by(f64::total_cmp);
    let rank = (percentile * c.len() as f64).ceil() as usize;
    Some(c[rank.clamp(1, c.len()) - 1])
}

/// Confidence percentile times the natural log of the arc length;
/// negative infinity for paths of at most one meter.
pub fn score(t: &Trajectory, cam: &CameraModel, cfg: &TrackerConfig) -> f64 {
    let Some(c) = confidence_percentile(t, cfg.percentile) else {
        return f64::NEG_INFINITY;
    };
    let length = arc_length(t, cam);
    if length <= 1.0 {
        return f64::NEG_INFINITY;
    }
    c * length.ln()
}

/// Picks the highest-scoring trajectory and joins non-overlapping
/// trajectories that continue it before or after.
pub fn select_and_stitch(finished: &[Trajectory], cfg: &TrackerConfig, cam: &CameraModel) -> Result<Trajectory> {
    let scored: Vec<(f64, &Trajectory)> =
        finished.iter().filter(|t| t.span().is_some()).map(|t| (score(t, cam, cfg), t)).collect();
    let best = scored
        .iter()
        .enumerate()
        .fold(None::<usize>, |best, (i, (s, t))| match best {
            Some(b) if scored[b].0 > *s || (scored[b].0 == *s && scored[b].1.id < t.id) => Some(b),
            _ => Some(i),
        })
        .ok_or(Error::NoTrajectories)?;

    let mut used = vec![false; scored.len()];
    used[best] = true;
    let mut chosen = scored[best].1.clone();
    let max_jump = 2.0 * cfg.gate_radius;

    loop {
        let (first, last) = chosen.span().ok_or(Error::NoTrajectories)?;
        let head = *chosen.first_observed().ok_or(Error::NoTrajectories)?;
        let tail = *chosen.last_observed().ok_or(Error::NoTrajectories)?;
        let mut pick: Option<(usize, bool)> = None;
        for (i, (s, t)) in scored.iter().enumerate() {
            if used[i] {
                continue;
            }
            let Some((a, b)) = t.span() else { continue };
            let joint = if b < first {
                let end = t.last_observed().expect("span implies observed");
                (first - b - 1 <= cfg.finish_after && end.center.distance(&head.center) <= max_jump).then_some(true)
            } else if a > last {
                let start = t.first_observed().expect("span implies observed");
                (a - last - 1 <= cfg.finish_after && start.center.distance(&tail.center) <= max_jump).then_some(false)
            } else {
                None
            };
            let Some(prepend) = joint else { continue };
            let better = match pick {
                None => true,
                Some((p, _)) => *s > scored[p].0 || (*s == scored[p].0 && t.id < scored[p].1.id),
            };
            if better {
                pick = Some((i, prepend));
            }
        }
        let Some((i, prepend)) = pick else { break };
        used[i] = true;
        let other = scored[i].1;
        if prepend {
            let mut points = other.points.clone();
            points.extend(chosen.points.iter().filter(|p| p.frame_index > other.span().unwrap().1));
            chosen.points = points;
        } else {
            chosen.points.retain(|p| p.frame_index < other.span().unwrap().0);
            chosen.points.extend(other.points.iter().copied());
            chosen.kalman = other.kalman;
            chosen.frames_since_update = other.frames_since_update;
        }
    }
    Ok(chosen)
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["traj_id", "frame", "timestamp_s", "cx", "cy", "confidence", "observed"];

/// Trajectory dump, one row per point.
pub fn write_trajectories(w: impl Write, trajectories: &[Trajectory]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(TRAJECTORY_HEADER)?;
    for t in trajectories {
        for p in &t.points {
            writer.write_record([
                t.id.to_string(),
                p.frame_index.to_string(),
                p.timestamp.to_string(),
                p.center.x.to_string(),
                p.center.y.to_string(),
                p.confidence.to_string(),
                u8::from(p.observed).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{DistortionModel, Homography};
    use crate::geodesy::{GeoPoint, WorldPoint};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn det(frame: u64, x: f64, y: f64, confidence: f64) -> Detection {
        Detection { frame_index: frame, timestamp: frame as f64 * 0.1, confidence, cx: x, cy: y, sx: 60.0, sy: 50.0 }
    }

    fn state(x: f64, vx: f64, y: f64, vy: f64) -> KalmanState {
        KalmanState { mean: Vector4::new(x, vx, y, vy), cov: Matrix4::identity() }
    }

    #[test]
    fn predict_moves_by_velocity() {
        let c = KalmanConfig::new(0.1);
        let s = kalman_predict(&state(5.0, 0.0, 7.0, 0.0), &c);
        assert_eq!(s.position(), Pixel::new(5.0, 7.0));
        let s = kalman_predict(&state(0.0, 1.0, 0.0, 2.0), &c);
        assert_eq!(s.mean, Vector4::new(1.0, 1.0, 2.0, 2.0));
    }

    #[test]
    fn predict_never_shrinks_trace() {
        let c = KalmanConfig::new(0.5);
        let mut s = state(0.0, 1.0, 0.0, 1.0);
        for _ in 0..20 {
            let next = kalman_predict(&s, &c);
            assert!(next.cov.trace() >= s.cov.trace());
            s = next;
        }
    }

    #[test]
    fn update_limits() {
        let mut c = KalmanConfig::new(0.1);
        let s = state(10.0, 0.0, 20.0, 0.0);
        c.observation_cov = Matrix2::identity() * 1e-12;
        let u = kalman_update(&s, Pixel::new(13.0, 18.0), &c).unwrap();
        assert_abs_diff_eq!(u.mean[0], 13.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u.mean[2], 18.0, epsilon = 1e-9);
        c.observation_cov = Matrix2::identity() * 1e30;
        let u = kalman_update(&s, Pixel::new(13.0, 18.0), &c).unwrap();
        assert_abs_diff_eq!(u.mean[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u.mean[2], 20.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_innovation_detected() {
        let mut c = KalmanConfig::new(0.1);
        c.observation_cov = Matrix2::zeros();
        let s = KalmanState { mean: Vector4::zeros(), cov: Matrix4::zeros() };
        assert!(matches!(kalman_update(&s, Pixel::new(1.0, 1.0), &c), Err(Error::SingularInnovation)));
    }

    #[test]
    fn velocity_converges_on_noisy_constant_velocity_track() {
        let c = KalmanConfig::new(0.1);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let (vx, vy) = (6.0, -3.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = KalmanState::spawn(Pixel::new(100.0, 300.0), &c);
            for k in 1..=20 {
                s = kalman_predict(&s, &c);
                let z = Pixel::new(
                    100.0 + vx * k as f64 + noise.sample(&mut rng),
                    300.0 + vy * k as f64 + noise.sample(&mut rng),
                );
                s = kalman_update(&s, z, &c).unwrap();
            }
            let (ex, ey) = s.velocity();
            let err = (ex - vx).hypot(ey - vy) / vx.hypot(vy);
            assert!(err < 0.05, "seed {seed}: relative velocity error {err}");
        }
    }

    #[test]
    fn fresh_detections_spawn_trajectories() {
        let mut tr = Tracker::new(TrackerConfig::default(), KalmanConfig::new(0.1));
        let out = tr.step(0, 0.0, &[det(0, 100.0, 100.0, 0.9), det(0, 400.0, 100.0, 0.8)]).unwrap();
        assert_eq!(out.spawned, vec![0, 1]);
        assert_eq!(tr.live().len(), 2);
    }

    #[test]
    fn gate_boundary() {
        let mut tr = Tracker::new(TrackerConfig::default(), KalmanConfig::new(0.1));
        tr.step(0, 0.0, &[det(0, 100.0, 100.0, 0.9)]).unwrap();
        let out = tr.step(1, 0.1, &[det(1, 181.0, 100.0, 0.9)]).unwrap();
        assert_eq!(out.spawned, vec![1]);
        assert_eq!(out.accounted, vec![None]);
        let out = tr.step(2, 0.2, &[det(2, 180.0, 100.0, 0.9)]).unwrap();
        assert!(out.spawned.is_empty());
    }

    #[test]
    fn closest_accounted_detection_wins_and_others_are_absorbed() {
        let mut tr = Tracker::new(TrackerConfig::default(), KalmanConfig::new(0.1));
        tr.step(0, 0.0, &[det(0, 100.0, 100.0, 0.9)]).unwrap();
        let out = tr.step(1, 0.1, &[det(1, 130.0, 100.0, 0.5), det(1, 105.0, 100.0, 0.6)]).unwrap();
        assert_eq!(out.accounted, vec![Some(0), Some(0)]);
        assert!(out.spawned.is_empty());
        assert_eq!(tr.live()[0].points.last().unwrap().center, Pixel::new(105.0, 100.0));
    }

    #[test]
    fn trajectories_finish_after_timeout() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracker::new(cfg, KalmanConfig::new(0.1));
        tr.step(0, 0.0, &[det(0, 100.0, 100.0, 0.9)]).unwrap();
        for f in 1..=10 {
            let out = tr.step(f, f as f64 * 0.1, &[]).unwrap();
            assert!(out.finished.is_empty());
        }
        let out = tr.step(11, 1.1, &[]).unwrap();
        assert_eq!(out.finished, vec![0]);
        // the predicted tail is dropped
        assert_eq!(tr.finished()[0].points.len(), 1);
    }

    /// Two vessels crossing; the second is hidden for `hidden` frames around
    /// the crossing.
    fn crossing(seed: u64, hidden: u64) -> Vec<Detection> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut out = Vec::new();
        for f in 0..60u64 {
            let k = f as f64;
            let a = (200.0 + 8.0 * k, 300.0 + 0.5 * k);
            let b = (680.0 - 8.0 * k, 315.0 - 0.5 * k);
            out.push(Detection {
                confidence: 0.9,
                ..det(f, a.0 + noise.sample(&mut rng), a.1 + noise.sample(&mut rng), 0.9)
            });
            let occluded = (30 - hidden / 2..30 - hidden / 2 + hidden).contains(&f);
            if !occluded {
                out.push(Detection {
                    confidence: 0.5,
                    ..det(f, b.0 + noise.sample(&mut rng), b.1 + noise.sample(&mut rng), 0.5)
                });
            }
        }
        out
    }

    #[test]
    fn crossing_vessels_keep_identity() {
        for seed in 0..50 {
            let dets = crossing(seed, 5);
            let trajectories = track_detections(&dets, TrackerConfig::default(), KalmanConfig::new(0.1)).unwrap();
            let long: Vec<_> = trajectories.iter().filter(|t| t.observed().count() > 20).collect();
            assert_eq!(long.len(), 2, "seed {seed}");
            for t in long {
                // a swap would show up as a jump in the vertical drift direction
                let obs: Vec<_> = t.observed().collect();
                let falling = obs.last().unwrap().center.x > obs[0].center.x;
                for w in obs.windows(2) {
                    assert_eq!(w[1].center.x > w[0].center.x, falling, "seed {seed}: identity swap");
                }
            }
        }
    }

    fn straight_camera() -> CameraModel {
        CameraModel::new(
            Homography::identity(),
            DistortionModel::new(0.0, Pixel::new(0.0, 0.0)),
            GeoPoint::new(0.0, 0.0),
            (1280, 720),
        )
        .unwrap()
    }

    /// Screen point whose deprojection under [`straight_camera`] is `w`.
    fn screen_of(w: WorldPoint) -> Pixel {
        // distortion with k1 = 0 and center 0 doubles coordinates
        Pixel::new(w.x / 2.0, w.y / 2.0)
    }

    fn trajectory(id: u64, frames: std::ops::Range<u64>, at: impl Fn(u64) -> (Pixel, f64)) -> Trajectory {
        Trajectory {
            id,
            points: frames
                .map(|f| {
                    let (center, confidence) = at(f);
                    TrackPoint {
                        frame_index: f,
                        timestamp: f as f64 * 0.1,
                        center,
                        size: (50.0, 40.0),
                        confidence,
                        observed: true,
                    }
                })
                .collect(),
            kalman: KalmanState::spawn(Pixel::new(0.0, 0.0), &KalmanConfig::new(0.1)),
            frames_since_update: 0,
        }
    }

    #[test]
    fn arc_length_cases() {
        let cam = straight_camera();
        let single = trajectory(0, 0..1, |_| (screen_of(WorldPoint::new(3.0, 4.0)), 0.9));
        assert_eq!(arc_length(&single, &cam), 0.0);
        let line = trajectory(0, 0..7, |f| (screen_of(WorldPoint::new(5.0 * f as f64, 0.0)), 0.9));
        assert_abs_diff_eq!(arc_length(&line, &cam), 30.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 50.0).unwrap();
        let pts: Vec<WorldPoint> = (0..40).map(|_| WorldPoint::new(n.sample(&mut rng), n.sample(&mut rng))).collect();
        let t = trajectory(0, 0..40, |f| (screen_of(pts[f as usize]), 0.9));
        let mut brute = 0.0;
        for i in 0..pts.len() - 1 {
            brute += ((pts[i].x - pts[i + 1].x).powi(2) + (pts[i].y - pts[i + 1].y).powi(2)).sqrt();
        }
        assert_abs_diff_eq!(arc_length(&t, &cam), brute, epsilon = 1e-9);
    }

    #[test]
    fn score_cases() {
        let cam = straight_camera();
        let e = std::f64::consts::E;
        let t = trajectory(0, 0..2, |f| (screen_of(WorldPoint::new(e * f as f64, 0.0)), 0.7));
        assert_abs_diff_eq!(score(&t, &cam, &TrackerConfig::default()), 0.7, epsilon = 1e-12);
        let short = trajectory(0, 0..2, |f| (screen_of(WorldPoint::new(0.5 * f as f64, 0.0)), 0.9));
        assert_eq!(score(&short, &cam, &TrackerConfig::default()), f64::NEG_INFINITY);
    }

    #[test]
    fn nearest_rank_percentile() {
        let confidences = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let t = trajectory(0, 0..10, |f| (Pixel::new(f as f64, 0.0), confidences[f as usize]));
        assert_eq!(confidence_percentile(&t, 0.8), Some(0.8));
        let t = trajectory(0, 0..3, |f| (Pixel::new(f as f64, 0.0), confidences[f as usize]));
        // ceil(2.4) = 3rd smallest
        assert_eq!(confidence_percentile(&t, 0.8), Some(0.3));
    }

    proptest! {
        #[test]
        fn score_is_order_free_and_monotone(conf in proptest::collection::vec(0.0f64..1.0, 2..30),
                                             bump in 0usize..30, delta in 0.0f64..0.5,
                                             shift in 0usize..30) {
            let cam = straight_camera();
            let n = conf.len();
            let make = |c: &Vec<f64>| trajectory(0, 0..n as u64, |f| (screen_of(WorldPoint::new(3.0 * f as f64, 0.0)), c[f as usize]));
            let base = score(&make(&conf), &cam, &TrackerConfig::default());
            let mut rotated = conf.clone();
            rotated.rotate_left(shift % n);
            // same path, permuted confidences
            prop_assert_eq!(score(&make(&rotated), &cam, &TrackerConfig::default()), base);
            let mut raised = conf.clone();
            raised[bump % n] = (raised[bump % n] + delta).min(1.0);
            prop_assert!(score(&make(&raised), &cam, &TrackerConfig::default()) >= base);
        }

        #[test]
        fn step_bookkeeping(frames in proptest::collection::vec(
            proptest::collection::vec((0.0f64..600.0, 0.0f64..400.0), 0..6), 1..25)) {
            let mut tr = Tracker::new(TrackerConfig::default(), KalmanConfig::new(0.1));
            for (f, pts) in frames.iter().enumerate() {
                let dets: Vec<_> = pts.iter().map(|(x, y)| det(f as u64, *x, *y, 0.5)).collect();
                let before = tr.live().len();
                let out = tr.step(f as u64, f as f64 * 0.1, &dets).unwrap();
                prop_assert_eq!(tr.live().len() + out.finished.len(), before + out.spawned.len());
                // every detection is either accounted once or spawns exactly one trajectory
                let unaccounted = out.accounted.iter().filter(|a| a.is_none()).count();
                prop_assert_eq!(unaccounted, out.spawned.len());
                for t in tr.live() {
                    let observed_now = t.points.iter().filter(|p| p.frame_index == f as u64 && p.observed).count();
                    prop_assert!(observed_now <= 1);
                    let eig = t.kalman.cov.symmetric_eigenvalues();
                    prop_assert!(eig.iter().all(|v| *v >= -1e-9));
                    prop_assert_eq!(t.kalman.cov, t.kalman.cov.transpose());
                }
            }
        }
    }

    #[test]
    fn tracking_is_deterministic() {
        let dets = crossing(3, 5);
        let a = track_detections(&dets, TrackerConfig::default(), KalmanConfig::new(0.1)).unwrap();
        let b = track_detections(&dets, TrackerConfig::default(), KalmanConfig::new(0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_trajectory_selected_as_is() {
        let cam = straight_camera();
        let t = trajectory(4, 0..10, |f| (screen_of(WorldPoint::new(3.0 * f as f64, 0.0)), 0.8));
        let chosen = select_and_stitch(std::slice::from_ref(&t), &TrackerConfig::default(), &cam).unwrap();
        assert_eq!(chosen, t);
        assert!(matches!(select_and_stitch(&[], &TrackerConfig::default(), &cam), Err(Error::NoTrajectories)));
    }

    #[test]
    fn split_trajectory_is_restitched() {
        let cam = straight_camera();
        let at = |f: u64| (screen_of(WorldPoint::new(4.0 * f as f64, 10.0)), 0.8);
        // frames 0..30 and 35..60: a gap of 5 missing frames
        let a = trajectory(0, 0..30, at);
        let b = trajectory(1, 35..60, at);
        let competitor = trajectory(2, 20..40, |f| (screen_of(WorldPoint::new(-3.0 * f as f64, 200.0)), 0.3));
        let chosen = select_and_stitch(&[a, b, competitor], &TrackerConfig::default(), &cam).unwrap();
        let frames: Vec<u64> = chosen.points.iter().map(|p| p.frame_index).collect();
        assert_eq!(frames.first(), Some(&0));
        assert_eq!(frames.last(), Some(&59));
        assert!(frames.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(frames.len(), 55);
        assert!(chosen.points.iter().all(|p| p.center.y == 5.0));
    }
}
