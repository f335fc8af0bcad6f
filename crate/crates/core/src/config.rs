//! Flat `module.key=value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and repeated
//! keys are errors. Values set later (command-line overrides) replace
//! earlier ones.

use std::fmt::Write as _;
use std::path::Path;

use crate::calibrator::{CalibrationSetup, K1Grid};
use crate::camera::{BBoxSizeModel, Pixel};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::geodesy::{EarthModel, GeoPoint, WorldPoint};
use crate::ingest::FrameGeometry;
use crate::synth::{published_camera, sea_camera, Scenario, ShipPath};
use crate::tracker::{KalmanConfig, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Scale of the velocity process noise `diag(0, Δ², 0, Δ²)`.
    pub process_noise: f64,
    /// Standard deviation of position measurements, pixels.
    pub observation_sigma: f64,
    /// Prior velocity standard deviation of new trajectories.
    pub initial_velocity_sigma: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self { process_noise: 1.0, observation_sigma: 10.0, initial_velocity_sigma: 100.0 }
    }
}

impl KalmanParams {
    pub fn build(&self, dt: f64) -> KalmanConfig {
        let mut k = KalmanConfig::with_noise(dt, self.process_noise, self.observation_sigma);
        k.initial_velocity_var = self.initial_velocity_sigma * self.initial_velocity_sigma;
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthCamera {
    Sea,
    Published,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub camera: SynthCamera,
    pub seed: u64,
    pub fps: f64,
    pub duration: f64,
    pub pixel_sigma: f64,
    pub dropout: f64,
    pub spurious_rate: f64,
    pub size_noise: f64,
    pub truth_interval: f64,
    pub ships: Vec<ShipPath>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = Scenario::default();
        Self {
            camera: SynthCamera::Sea,
            seed: s.seed,
            fps: s.fps,
            duration: s.duration,
            pixel_sigma: s.pixel_sigma,
            dropout: s.dropout,
            spurious_rate: s.spurious_rate,
            size_noise: s.size_noise,
            truth_interval: s.truth_interval,
            ships: s.ships,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub earth: EarthModel,
    pub geometry: FrameGeometry,
    /// Video frame rate; derived from timestamps when absent.
    pub fps: Option<f64>,
    pub bbox: BBoxSizeModel,
    pub grid: K1Grid,
    /// Distortion center; the image center when absent.
    pub center: Option<Pixel>,
    /// Camera position in degrees, required for calibration.
    pub origin_deg: Option<[f64; 2]>,
    pub label_class: u32,
    pub tracker: TrackerConfig,
    pub kalman: KalmanParams,
    pub fusion: FusionConfig,
    pub synth: SynthConfig,
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn opt_num(key: &str, v: &str) -> Result<Option<f64>> {
    match v.trim() {
        "" | "auto" => Ok(None),
        s => num(key, s).map(Some),
    }
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |v| v.to_string())
}

/// `x,y,vx,vy,confidence[,appear,vanish]`, ships separated by `;`.
fn parse_ships(key: &str, v: &str) -> Result<Vec<ShipPath>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(id, s)| {
            let f: Vec<f64> = s.split(',').map(|x| num(key, x)).collect::<Result<_>>()?;
            let (appear, vanish) = match f.len() {
                5 => (0.0, f64::INFINITY),
                7 => (f[5], f[6]),
                _ => return Err(Error::Config(format!("{key}: expected 5 or 7 numbers per ship, got {s:?}"))),
            };
            Ok(ShipPath {
                id: id as u64,
                start: WorldPoint::new(f[0], f[1]),
                velocity: WorldPoint::new(f[2], f[3]),
                confidence: f[4],
                appear,
                vanish,
            })
        })
        .collect()
}

fn show_ships(ships: &[ShipPath]) -> String {
    ships
        .iter()
        .map(|s| {
            let mut t = format!("{},{},{},{},{}", s.start.x, s.start.y, s.velocity.x, s.velocity.y, s.confidence);
            if s.appear != 0.0 || s.vanish != f64::INFINITY {
                let _ = write!(t, ",{},{}", s.appear, s.vanish);
            }
            t
        })
        .collect::<Vec<_>>()
        .join(";")
}

impl Config {
    /// Every key with its current value, in documentation order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.geometry;
        let s = &self.synth;
        vec![
            ("earth.radius", self.earth.radius.to_string()),
            ("ingest.full_width", g.full_size.0.to_string()),
            ("ingest.full_height", g.full_size.1.to_string()),
            ("ingest.detector_scale", g.detector_scale.to_string()),
            ("ingest.crop_width", g.crop.0.to_string()),
            ("ingest.crop_height", g.crop.1.to_string()),
            ("ingest.detector_offset_x", g.detector_offset.0.to_string()),
            ("ingest.detector_offset_y", g.detector_offset.1.to_string()),
            ("ingest.fps", show_opt(self.fps)),
            ("ingest.label_class", self.label_class.to_string()),
            ("camera.bbox_a_x", self.bbox.a_x.to_string()),
            ("camera.bbox_a_y", self.bbox.a_y.to_string()),
            ("camera.bbox_b", self.bbox.b.to_string()),
            ("calibrator.k1_min", self.grid.k1_min.to_string()),
            ("calibrator.k1_max", self.grid.k1_max.to_string()),
            ("calibrator.k1_steps", self.grid.steps.to_string()),
            ("calibrator.center_x", show_opt(self.center.map(|c| c.x))),
            ("calibrator.center_y", show_opt(self.center.map(|c| c.y))),
            ("calibrator.origin_lat_deg", show_opt(self.origin_deg.map(|o| o[0]))),
            ("calibrator.origin_lon_deg", show_opt(self.origin_deg.map(|o| o[1]))),
            ("tracker.gate_radius", self.tracker.gate_radius.to_string()),
            ("tracker.finish_after", self.tracker.finish_after.to_string()),
            ("tracker.percentile", self.tracker.percentile.to_string()),
            ("tracker.process_noise", self.kalman.process_noise.to_string()),
            ("tracker.observation_sigma", self.kalman.observation_sigma.to_string()),
            ("tracker.initial_velocity_sigma", self.kalman.initial_velocity_sigma.to_string()),
            ("fusion.w_yolo", self.fusion.weights[0].to_string()),
            ("fusion.w_sx", self.fusion.weights[1].to_string()),
            ("fusion.w_sy", self.fusion.weights[2].to_string()),
            ("fusion.mask_threshold", self.fusion.mask_threshold.to_string()),
            ("fusion.iterations", self.fusion.iterations.to_string()),
            ("fusion.far_limit", self.fusion.far_limit.to_string()),
            ("fusion.clip_limit", self.fusion.clip_limit.to_string()),
            (
                "synth.camera",
                match s.camera {
                    SynthCamera::Sea => "sea",
                    SynthCamera::Published => "published",
                }
                .to_string(),
            ),
            ("synth.seed", s.seed.to_string()),
            ("synth.fps", s.fps.to_string()),
            ("synth.duration", s.duration.to_string()),
            ("synth.pixel_sigma", s.pixel_sigma.to_string()),
            ("synth.dropout", s.dropout.to_string()),
            ("synth.spurious_rate", s.spurious_rate.to_string()),
            ("synth.size_noise", s.size_noise.to_string()),
            ("synth.truth_interval", s.truth_interval.to_string()),
            ("synth.ships", show_ships(&s.ships)),
        ]
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let g = &mut self.geometry;
        let s = &mut self.synth;
        match key {
            "earth.radius" => self.earth = EarthModel::new(num(key, v)?)?,
            "ingest.full_width" => g.full_size.0 = num(key, v)?,
            "ingest.full_height" => g.full_size.1 = num(key, v)?,
            "ingest.detector_scale" => g.detector_scale = num(key, v)?,
            "ingest.crop_width" => g.crop.0 = num(key, v)?,
            "ingest.crop_height" => g.crop.1 = num(key, v)?,
            "ingest.detector_offset_x" => g.detector_offset.0 = num(key, v)?,
            "ingest.detector_offset_y" => g.detector_offset.1 = num(key, v)?,
            "ingest.fps" => self.fps = opt_num(key, v)?,
            "ingest.label_class" => self.label_class = num(key, v)?,
            "camera.bbox_a_x" => self.bbox.a_x = num(key, v)?,
            "camera.bbox_a_y" => self.bbox.a_y = num(key, v)?,
            "camera.bbox_b" => self.bbox.b = num(key, v)?,
            "calibrator.k1_min" => self.grid.k1_min = num(key, v)?,
            "calibrator.k1_max" => self.grid.k1_max = num(key, v)?,
            "calibrator.k1_steps" => self.grid.steps = num(key, v)?,
            "calibrator.center_x" | "calibrator.center_y" => {
                let value = opt_num(key, v)?;
                let mut c = self.center.map_or([f64::NAN; 2], |c| [c.x, c.y]);
                c[usize::from(key.ends_with('y'))] = value.unwrap_or(f64::NAN);
                self.center = (!c[0].is_nan() || !c[1].is_nan()).then(|| Pixel::new(c[0], c[1]));
            }
            "calibrator.origin_lat_deg" | "calibrator.origin_lon_deg" => {
                let value = opt_num(key, v)?;
                let mut o = self.origin_deg.unwrap_or([f64::NAN; 2]);
                o[usize::from(key.ends_with("lon_deg"))] = value.unwrap_or(f64::NAN);
                self.origin_deg = (!o[0].is_nan() || !o[1].is_nan()).then_some(o);
            }
            "tracker.gate_radius" => self.tracker.gate_radius = num(key, v)?,
            "tracker.finish_after" => self.tracker.finish_after = num(key, v)?,
            "tracker.percentile" => self.tracker.percentile = num(key, v)?,
            "tracker.process_noise" => self.kalman.process_noise = num(key, v)?,
            "tracker.observation_sigma" => self.kalman.observation_sigma = num(key, v)?,
            "tracker.initial_velocity_sigma" => self.kalman.initial_velocity_sigma = num(key, v)?,
            "fusion.w_yolo" => self.fusion.weights[0] = num(key, v)?,
            "fusion.w_sx" => self.fusion.weights[1] = num(key, v)?,
            "fusion.w_sy" => self.fusion.weights[2] = num(key, v)?,
            "fusion.mask_threshold" => self.fusion.mask_threshold = num(key, v)?,
            "fusion.iterations" => self.fusion.iterations = num(key, v)?,
            "fusion.far_limit" => self.fusion.far_limit = num(key, v)?,
            "fusion.clip_limit" => self.fusion.clip_limit = num(key, v)?,
            "synth.camera" => {
                s.camera = match v.trim() {
                    "sea" => SynthCamera::Sea,
                    "published" => SynthCamera::Published,
                    other => return Err(Error::Config(format!("{key}: expected sea or published, got {other:?}"))),
                }
            }
            "synth.seed" => s.seed = num(key, v)?,
            "synth.fps" => s.fps = num(key, v)?,
            "synth.duration" => s.duration = num(key, v)?,
            "synth.pixel_sigma" => s.pixel_sigma = num(key, v)?,
            "synth.dropout" => s.dropout = num(key, v)?,
            "synth.spurious_rate" => s.spurious_rate = num(key, v)?,
            "synth.size_noise" => s.size_noise = num(key, v)?,
            "synth.truth_interval" => s.truth_interval = num(key, v)?,
            "synth.ships" => s.ships = parse_ships(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let key = line.split_once('=').map_or(line, |(k, _)| k).trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(i as u64 + 1, format!("repeated key {key:?}")));
            }
            self.assign(line).map_err(|e| Error::parse(i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_text(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.grid.validate()?;
        self.tracker.validate()?;
        self.fusion.validate()?;
        if let Some(fps) = self.fps {
            if !(fps > 0.0) {
                return Err(Error::Config(format!("ingest.fps must be positive, got {fps}")));
            }
        }
        let k = &self.kalman;
        if !(k.process_noise >= 0.0 && k.observation_sigma > 0.0 && k.initial_velocity_sigma > 0.0) {
            return Err(Error::Config(format!("invalid Kalman parameters {k:?}")));
        }
        if !(self.bbox.a_x > 0.0 && self.bbox.a_y > 0.0 && self.bbox.b >= 0.0) {
            return Err(Error::Config(format!("invalid box size model {:?}", self.bbox)));
        }
        if let Some(o) = self.origin_deg {
            if o.iter().any(|v| v.is_nan()) {
                return Err(Error::Config("origin needs both latitude and longitude".into()));
            }
        }
        if let Some(c) = self.center {
            if c.x.is_nan() || c.y.is_nan() {
                return Err(Error::Config("distortion center needs both coordinates".into()));
            }
        }
        Ok(())
    }

    pub fn distortion_center(&self) -> Pixel {
        self.center.unwrap_or_else(|| {
            Pixel::new(self.geometry.full_size.0 as f64 / 2.0, self.geometry.full_size.1 as f64 / 2.0)
        })
    }

    pub fn calibration_setup(&self) -> Result<CalibrationSetup> {
        let [lat, lon] = self.origin_deg.ok_or_else(|| {
            Error::Config("calibration needs calibrator.origin_lat_deg and calibrator.origin_lon_deg".into())
        })?;
        Ok(CalibrationSetup {
            origin: GeoPoint::from_degrees(lat, lon),
            center: self.distortion_center(),
            image_size: self.geometry.full_size,
            grid: self.grid,
            earth: self.earth,
        })
    }

    pub fn scenario(&self) -> Scenario {
        let s = &self.synth;
        Scenario {
            camera: match s.camera {
                SynthCamera::Sea => sea_camera(),
                SynthCamera::Published => published_camera(),
            },
            geometry: self.geometry,
            bbox: self.bbox,
            earth: self.earth,
            ships: s.ships.clone(),
            fps: s.fps,
            duration: s.duration,
            seed: s.seed,
            pixel_sigma: s.pixel_sigma,
            dropout: s.dropout,
            spurious_rate: s.spurious_rate,
            size_noise: s.size_noise,
            truth_interval: s.truth_interval,
        }
    }
}
