//! Seeded synthetic scenarios with known ground truth.
//!
//! Ships move on straight lines across the sea plane. Detections are the
//! projected ship positions in detector pixels with Gaussian noise, random
//! dropout and uniformly scattered spurious boxes. The generator is ChaCha8,
//! so a seed gives the same output on every platform.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};

use crate::calibrator::Correspondence;
use crate::camera::{
    bbox_from_distance, BBoxSizeModel, CameraModel, DistortionModel, Homography, Pinhole, Pixel, ScreenPoint,
};
use crate::error::{Error, Result};
use crate::geodesy::{local_to_gps, EarthModel, GeoPoint, WorldPoint};
use crate::ingest::{calibration_to_detector_space, Detection, FrameGeometry, GpsSample};

pub const PUBLISHED_H: [[f64; 3]; 3] = [[441.0, 379.0, -1000.0], [-217.0, -56.5, -548.0], [-0.512, -0.144, 1.0]];
pub const PUBLISHED_K1: f64 = -4.053e-7;
pub const DEFAULT_ORIGIN_DEG: [f64; 2] = [59.9, 10.7];

/// Camera with the published homography, distortion and image size.
pub fn published_camera() -> CameraModel {
    CameraModel::with_origin_degrees(
        Homography::from_rows(PUBLISHED_H).expect("published matrix is invertible"),
        DistortionModel::new(PUBLISHED_K1, Pixel::new(640.0, 360.0)),
        DEFAULT_ORIGIN_DEG,
        (1280, 720),
    )
    .expect("published camera is valid")
}

/// Camera 20 m above the sea looking north, whose sea band lies inside the
/// default detector crop.
pub fn sea_camera() -> CameraModel {
    let h = Pinhole { focal: 1000.0, principal: Pixel::new(640.0, 360.0), height: 20.0, heading: 0.0, pitch: 0.235 }
        .homography()
        .expect("pinhole homography");
    CameraModel::with_origin_degrees(
        h,
        DistortionModel::new(PUBLISHED_K1, Pixel::new(640.0, 360.0)),
        DEFAULT_ORIGIN_DEG,
        (1280, 720),
    )
    .expect("sea camera is valid")
}

/// Screen points of the published calibration fixture.
pub const FIXTURE_SCREEN: [(f64, f64); 11] = [
    (80.0, 520.0),
    (300.0, 500.0),
    (640.0, 490.0),
    (980.0, 505.0),
    (1200.0, 540.0),
    (200.0, 620.0),
    (520.0, 600.0),
    (820.0, 640.0),
    (1100.0, 660.0),
    (400.0, 700.0),
    (700.0, 560.0),
];

/// Eleven exact correspondences for `cam`, one per second.
pub fn calibration_fixture(cam: &CameraModel, earth: EarthModel) -> Result<Vec<Correspondence>> {
    FIXTURE_SCREEN
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let screen = ScreenPoint::new(x, y);
            let (w, _) = cam.screen_to_world(screen)?;
            Ok(Correspondence { timestamp: i as f64, screen, geo: local_to_gps(w, cam.origin(), earth)? })
        })
        .collect()
}

/// Straight-line ship, visible between `appear` and `vanish` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShipPath {
    pub id: u64,
    pub start: WorldPoint,
    /// Meters per second.
    pub velocity: WorldPoint,
    pub confidence: f64,
    pub appear: f64,
    pub vanish: f64,
}

impl ShipPath {
    pub fn at(&self, t: f64) -> WorldPoint {
        WorldPoint::new(self.start.x + self.velocity.x * t, self.start.y + self.velocity.y * t)
    }

    pub fn visible(&self, t: f64) -> bool {
        (self.appear..=self.vanish).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub camera: CameraModel,
    pub geometry: FrameGeometry,
    pub bbox: BBoxSizeModel,
    pub earth: EarthModel,
    /// The first ship is the tracked target.
    pub ships: Vec<ShipPath>,
    pub fps: f64,
    pub duration: f64,
    pub seed: u64,
    /// Position noise in detector pixels.
    pub pixel_sigma: f64,
    pub dropout: f64,
    /// Mean spurious detections per frame.
    pub spurious_rate: f64,
    /// Relative standard deviation of box sizes.
    pub size_noise: f64,
    /// Seconds between ground-truth GPS fixes.
    pub truth_interval: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            camera: sea_camera(),
            geometry: FrameGeometry::default(),
            bbox: BBoxSizeModel::default(),
            earth: EarthModel::default(),
            ships: vec![ShipPath {
                id: 0,
                start: WorldPoint::new(-60.0, 110.0),
                velocity: WorldPoint::new(4.0, 2.5),
                confidence: 0.85,
                appear: 0.0,
                vanish: f64::INFINITY,
            }],
            fps: 10.0,
            duration: 30.0,
            seed: 0,
            pixel_sigma: 0.0,
            dropout: 0.0,
            spurious_rate: 0.0,
            size_noise: 0.0,
            truth_interval: 1.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.ships.is_empty()
            || !(self.fps > 0.0)
            || !(self.duration > 0.0)
            || !(self.pixel_sigma >= 0.0)
            || !prob(self.dropout)
            || !(self.spurious_rate >= 0.0)
            || !(self.size_noise >= 0.0)
            || !(self.truth_interval > 0.0)
        {
            return Err(Error::Config(format!("invalid scenario: {self:?}")));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> u64 {
        (self.duration * self.fps).floor() as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Ground-truth GPS of every ship, in ship order.
    pub truth: Vec<Vec<GpsSample>>,
    /// Detector-space detections, sorted by frame then confidence.
    pub detections: Vec<Detection>,
    /// Exact calibration marks spread over the visible sea.
    pub correspondences: Vec<Correspondence>,
}

/// Exact detector-space detection of a ship at `w`, if it is in front of the
/// camera and its center lies inside the crop.
fn render(s: &Scenario, w: WorldPoint) -> Option<(Detection, f64)> {
    let (screen, z) = s.camera.world_to_screen(w).ok()?;
    if !s.camera.is_forward(z) {
        return None;
    }
    let (sx, sy) = bbox_from_distance(z.abs(), &s.bbox).ok()?;
    let scale = s.geometry.detector_scale;
    let d = calibration_to_detector_space(
        &Detection {
            frame_index: 0,
            timestamp: 0.0,
            confidence: 0.0,
            cx: screen.x,
            cy: screen.y,
            sx: sx * scale,
            sy: sy * scale,
        },
        &s.geometry,
    );
    Some((d, z))
}

pub fn generate(s: &Scenario) -> Result<SynthOutput> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let spurious = (s.spurious_rate > 0.0).then(|| Poisson::new(s.spurious_rate).expect("positive rate"));
    let (cw, ch) = s.geometry.crop;
    let spurious_x = Uniform::new_inclusive(0.0, cw).expect("crop width");
    let spurious_y = Uniform::new_inclusive(0.0, ch).expect("crop height");
    let spurious_size = Uniform::new(s.bbox.b + 5.0, s.bbox.b + 40.0).expect("size range");
    let spurious_conf = Uniform::new(0.2, 0.5).expect("confidence range");

    let mut detections = Vec::new();
    for frame in 0..s.frame_count() {
        let t = frame as f64 / s.fps;
        let mut frame_dets = Vec::new();
        for ship in &s.ships {
            if !ship.visible(t) {
                continue;
            }
            let Some((mut d, _)) = render(s, ship.at(t)) else { continue };
            // draw every variate so one ship's visibility never shifts another's noise
            let (nx, ny, ns, drop) =
                (unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng), rng.random::<f64>());
            d.cx += s.pixel_sigma * nx;
            d.cy += s.pixel_sigma * ny;
            let size_factor = (1.0 + s.size_noise * ns).max(0.1);
            d.sx *= size_factor;
            d.sy *= size_factor;
            if drop < s.dropout || !s.geometry.in_crop(d.center()) {
                continue;
            }
            d.frame_index = frame;
            d.timestamp = t;
            d.confidence = ship.confidence;
            frame_dets.push(d);
        }
        if let Some(p) = &spurious {
            let n = p.sample(&mut rng) as usize;
            for _ in 0..n {
                let side = spurious_size.sample(&mut rng);
                frame_dets.push(Detection {
                    frame_index: frame,
                    timestamp: t,
                    confidence: spurious_conf.sample(&mut rng),
                    cx: spurious_x.sample(&mut rng),
                    cy: spurious_y.sample(&mut rng),
                    sx: side,
                    sy: side * 0.6,
                });
            }
        }
        frame_dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        detections.extend(frame_dets);
    }

    let origin = s.camera.origin();
    let fixes = (s.duration / s.truth_interval).floor() as u64 + 1;
    let mut truth = Vec::new();
    for ship in &s.ships {
        let mut track = Vec::new();
        for i in 0..fixes {
            let t = i as f64 * s.truth_interval;
            if ship.visible(t) {
                track.push(GpsSample { timestamp: t, point: local_to_gps(ship.at(t), origin, s.earth)? });
            }
        }
        truth.push(track);
    }

    // a straight path is collinear on the plane; calibrate from spread-out marks
    let correspondences = calibration_fixture(&s.camera, s.earth)?;

    Ok(SynthOutput { truth, detections, correspondences })
}

/// The origin the scenario's GPS is expressed against.
pub fn scenario_origin(s: &Scenario) -> GeoPoint {
    s.camera.origin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::gps_to_local;
    use crate::ingest::{detector_to_calibration_space, write_detections};

    #[test]
    fn sea_camera_band_is_inside_the_crop() {
        let cam = sea_camera();
        assert_eq!(cam.forward_sign(), 1.0);
        let g = FrameGeometry::default();
        for range in [80.0, 150.0, 200.0, 500.0] {
            let (s, _) = cam.world_to_screen(WorldPoint::new(0.0, range)).unwrap();
            assert!(s.y / g.detector_scale - g.detector_offset.1 < g.crop.1, "{range} m at {s:?}");
        }
    }

    #[test]
    fn zero_noise_detections_lie_on_the_projected_path() {
        let s = Scenario::default();
        let out = generate(&s).unwrap();
        assert_eq!(out.detections.len() as u64, s.frame_count());
        for d in &out.detections {
            let c = detector_to_calibration_space(d, &s.geometry);
            let (screen, z) = s.camera.world_to_screen(s.ships[0].at(d.timestamp)).unwrap();
            assert!((c.cx - screen.x).abs() < 1e-9 && (c.cy - screen.y).abs() < 1e-9);
            let (sx, sy) = bbox_from_distance(z.abs(), &s.bbox).unwrap();
            assert!((d.sx - sx).abs() < 1e-9 && (d.sy - sy).abs() < 1e-9);
        }
    }

    #[test]
    fn truth_matches_the_path() {
        let s = Scenario::default();
        let out = generate(&s).unwrap();
        assert_eq!(out.truth[0].len(), 31);
        for g in &out.truth[0] {
            let w = gps_to_local(g.point, s.camera.origin(), s.earth);
            assert!(w.distance(&s.ships[0].at(g.timestamp)) < 1e-6);
        }
        assert_eq!(out.correspondences.len(), 11);
    }

    fn serialized(s: &Scenario) -> Vec<u8> {
        let mut buf = Vec::new();
        write_detections(&mut buf, &generate(s).unwrap().detections).unwrap();
        buf
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = Scenario {
            pixel_sigma: 1.0,
            dropout: 0.1,
            spurious_rate: 0.5,
            size_noise: 0.05,
            seed: 42,
            ..Scenario::default()
        };
        assert_eq!(serialized(&s), serialized(&s));
        assert_ne!(serialized(&s), serialized(&Scenario { seed: 43, ..s.clone() }));
    }

    #[test]
    fn crossing_ships_meet_once() {
        let s = Scenario {
            ships: vec![
                ShipPath {
                    id: 0,
                    start: WorldPoint::new(-60.0, 150.0),
                    velocity: WorldPoint::new(4.0, 0.0),
                    confidence: 0.9,
                    appear: 0.0,
                    vanish: f64::INFINITY,
                },
                ShipPath {
                    id: 1,
                    start: WorldPoint::new(60.0, 130.0),
                    velocity: WorldPoint::new(-4.0, 0.0),
                    confidence: 0.6,
                    appear: 0.0,
                    vanish: f64::INFINITY,
                },
            ],
            ..Scenario::default()
        };
        let out = generate(&s).unwrap();
        let by_conf = |c: f64| -> Vec<&Detection> { out.detections.iter().filter(|d| d.confidence == c).collect() };
        let (a, b) = (by_conf(0.9), by_conf(0.6));
        assert_eq!(a.len(), b.len());
        let signs: Vec<bool> = a.iter().zip(&b).map(|(a, b)| a.cx < b.cx).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn noise_dropout_and_spurious_detections() {
        let s = Scenario { pixel_sigma: 1.0, dropout: 0.2, spurious_rate: 1.0, seed: 7, ..Scenario::default() };
        let out = generate(&s).unwrap();
        let target = out.detections.iter().filter(|d| d.confidence == 0.85).count() as f64;
        let frames = s.frame_count() as f64;
        assert!((target / frames - 0.8).abs() < 0.08, "{target}");
        let spurious = out.detections.len() as f64 - target;
        assert!((spurious / frames - 1.0).abs() < 0.2, "{spurious}");
        for d in &out.detections {
            assert!(s.geometry.in_crop(d.center()));
        }
    }

    #[test]
    fn published_fixture_is_exact() {
        let cam = published_camera();
        let pairs = calibration_fixture(&cam, EarthModel::default()).unwrap();
        assert_eq!(pairs.len(), 11);
        for p in pairs {
            let w = gps_to_local(p.geo, cam.origin(), EarthModel::default());
            let (s, z) = cam.world_to_screen(w).unwrap();
            assert!(cam.is_forward(z));
            assert!((s.x - p.screen.x).abs() < 1e-6 && (s.y - p.screen.y).abs() < 1e-6);
        }
    }
}
