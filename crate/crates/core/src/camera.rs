//! Learned camera model: a plane-to-image homography plus a one-coefficient
//! radial distortion, and every geometric quantity derived from them.
//!
//! Three pixel spaces appear here:
//! * **screen**: raw image coordinates, as seen in the (distorted) frame;
//! * **projected**: screen coordinates after the distortion map, where the
//!   homography is exact;
//! * **world**: meters on the sea plane, see [`crate::geodesy`].
//!
//! The distortion map is `p = s + (s - c)(1 + k1 r²)` with `r = |s - c|`.
//! The leading `s` term is kept as-is; its linear part is absorbed by the
//! homography during calibration.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{GeoPoint, WorldPoint};

/// Magnitude below which a homogeneous third component is treated as zero.
pub const HOMOGENEOUS_EPS: f64 = 1e-12;

const UNDISTORT_TOL: f64 = 1e-6;
const UNDISTORT_MAX_ITER: usize = 50;

/// A point in projected pixel space (distortion removed).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel {
    pub x: f64,
    pub y: f64,
}

impl Pixel {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A point in raw screen pixels at calibration resolution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Result of projecting a world point: pixel position plus the homogeneous
/// scale `z`, which plays the role of distance to the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ProjectedPoint {
    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.x, self.y)
    }
}

/// Invertible 3×3 map from homogeneous world coordinates to projected pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    matrix: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl Homography {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateConfiguration("non-finite homography entry".into()));
        }
        let inverse = matrix
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::DegenerateConfiguration("homography is singular".into()))?;
        Ok(Self { matrix, inverse })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity(), inverse: Matrix3::identity() }
    }

    /// Rescales so the bottom-right entry is exactly 1.
    pub fn normalized(&self) -> Result<Self> {
        let s = self.matrix[(2, 2)];
        if s.abs() < HOMOGENEOUS_EPS {
            return Err(Error::DegenerateConfiguration("homography cannot be normalized: h33 is zero".into()));
        }
        let mut m = self.matrix / s;
        m[(2, 2)] = 1.0;
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inverse
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.matrix[(r, c)]))
    }
}

/// Maps a world point into projected pixel space.
pub fn project(w: WorldPoint, h: &Homography) -> Result<ProjectedPoint> {
    let v = h.matrix * Vector3::new(w.x, w.y, 1.0);
    if v.z.abs() < HOMOGENEOUS_EPS {
        return Err(Error::AtInfinity);
    }
    Ok(ProjectedPoint { x: v.x / v.z, y: v.y / v.z, z: v.z })
}

/// Maps a projected pixel back onto the sea plane. Returns the world point
/// and the signed scale `z` it would project with.
pub fn deproject(p: Pixel, h: &Homography) -> Result<(WorldPoint, f64)> {
    let v = h.inverse * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < HOMOGENEOUS_EPS {
        return Err(Error::OnHorizon);
    }
    Ok((WorldPoint::new(v.x / v.z, v.y / v.z), 1.0 / v.z))
}

/// Single-coefficient radial lens model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionModel {
    pub k1: f64,
    pub center: Pixel,
}

impl DistortionModel {
    pub fn new(k1: f64, center: Pixel) -> Self {
        Self { k1, center }
    }
}

pub fn distort_screen_to_projected(s: ScreenPoint, d: &DistortionModel) -> Pixel {
    let dx = s.x - d.center.x;
    let dy = s.y - d.center.y;
    let gain = 1.0 + d.k1 * (dx * dx + dy * dy);
    Pixel::new(s.x + dx * gain, s.y + dy * gain)
}

/// Numeric inverse of [`distort_screen_to_projected`].
///
/// Along a ray from the center the map is `rho_p = rho (2 + k1 rho²)`, so the
/// problem is one-dimensional. The radius is found by fixed-point iteration on
/// `rho = rho_p / (2 + k1 rho²)`, relaxed with the local slope of the map.
pub fn undistort_projected_to_screen(p: Pixel, d: &DistortionModel) -> Result<ScreenPoint> {
    let dx = p.x - d.center.x;
    let dy = p.y - d.center.y;
    let rho_p = dx.hypot(dy);
    if rho_p == 0.0 {
        return Ok(ScreenPoint::new(d.center.x, d.center.y));
    }
    let k1 = d.k1;
    let mut rho = 0.5 * rho_p;
    for _ in 0..UNDISTORT_MAX_ITER {
        let denom = 2.0 + k1 * rho * rho;
        let target = rho_p / denom;
        // slope of the fixed-point map; relaxation 1 / (1 - slope)
        let slope = -2.0 * k1 * rho * rho_p / (denom * denom);
        let next = rho + (target - rho) / (1.0 - slope);
        let step = (next - rho).abs();
        rho = next;
        if !rho.is_finite() {
            break;
        }
        if step < 1e-3 * UNDISTORT_TOL {
            break;
        }
    }
    let scale = rho / rho_p;
    let s = ScreenPoint::new(d.center.x + dx * scale, d.center.y + dy * scale);
    let back = distort_screen_to_projected(s, d);
    let residual = back.distance(&p);
    // outside the monotone part of the map the inverse is not unique
    let monotone = 2.0 + 3.0 * k1 * rho * rho > 0.0;
    if !(residual <= UNDISTORT_TOL) || !monotone || rho < 0.0 {
        return Err(Error::NoConvergence { residual });
    }
    Ok(s)
}

/// Image line `a x + b y + c = 0` on which deprojection diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HorizonLine {
    /// True when the line lies at infinity (no finite pixel satisfies it).
    pub fn is_degenerate(&self) -> bool {
        self.a.hypot(self.b) <= HOMOGENEOUS_EPS * self.c.abs().max(1.0)
    }

    pub fn y_at(&self, x: f64) -> Option<f64> {
        if self.b.abs() <= HOMOGENEOUS_EPS * self.a.abs().max(self.c.abs()).max(1.0) {
            return None;
        }
        Some(-(self.a * x + self.c) / self.b)
    }

    /// Signed algebraic distance in pixels.
    pub fn signed_distance(&self, p: Pixel) -> f64 {
        (self.a * p.x + self.b * p.y + self.c) / self.a.hypot(self.b)
    }
}

pub fn horizon_line(h: &Homography) -> HorizonLine {
    let inv = h.inverse;
    HorizonLine { a: inv[(2, 0)], b: inv[(2, 1)], c: inv[(2, 2)] }
}

/// Solves the third homogeneous row of the inverse homography,
/// `1/z = a x + b y + c`, for `y`. `z` is signed.
pub fn y_p_from_distance(z_p: f64, x_p: f64, h: &Homography) -> Result<f64> {
    let HorizonLine { a, b, c } = horizon_line(h);
    if b.abs() <= HOMOGENEOUS_EPS * a.abs().max(c.abs()) || z_p == 0.0 {
        return Err(Error::DegenerateRow);
    }
    Ok((1.0 / z_p - a * x_p - c) / b)
}

/// Empirical bounding-box size model, in detector (half-resolution) pixels:
/// `s_x = a_x / z + b`, `s_y = a_y / z + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBoxSizeModel {
    pub a_x: f64,
    pub a_y: f64,
    pub b: f64,
}

impl Default for BBoxSizeModel {
    fn default() -> Self {
        Self { a_x: 1500.0, a_y: 850.0, b: 25.0 }
    }
}

pub fn bbox_from_distance(z_p: f64, m: &BBoxSizeModel) -> Result<(f64, f64)> {
    if !(z_p > 0.0) {
        return Err(Error::NonPositiveDistance(z_p));
    }
    Ok((m.a_x / z_p + m.b, m.a_y / z_p + m.b))
}

pub fn distance_from_bbox(s_x: f64, s_y: f64, m: &BBoxSizeModel) -> Result<(f64, f64)> {
    for s in [s_x, s_y] {
        if !(s > m.b) {
            return Err(Error::SizeBelowMinimum { size: s, min: m.b });
        }
    }
    Ok((m.a_x / (s_x - m.b), m.a_y / (s_y - m.b)))
}

/// Distance implied by a single box dimension, `None` when it is not above
/// the minimum size.
pub fn distance_from_size(s: f64, numerator: f64, min: f64) -> Option<f64> {
    (s > min).then(|| numerator / (s - min))
}

/// Complete learned camera: homography, distortion, geographic origin and
/// image geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    homography: Homography,
    distortion: DistortionModel,
    origin_deg: [f64; 2],
    image_size: (u32, u32),
    forward_sign: f64,
    heading: Option<f64>,
}

impl CameraModel {
    pub fn new(
        homography: Homography,
        distortion: DistortionModel,
        origin: GeoPoint,
        image_size: (u32, u32),
    ) -> Result<Self> {
        Self::with_origin_degrees(homography, distortion, [origin.lat_deg(), origin.lon_deg()], image_size)
    }

    /// Keeps the origin in degrees exactly as given so that the text form
    /// round-trips without conversion loss.
    pub fn with_origin_degrees(
        homography: Homography,
        distortion: DistortionModel,
        origin_deg: [f64; 2],
        image_size: (u32, u32),
    ) -> Result<Self> {
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if !origin_deg.iter().all(|v| v.is_finite()) || origin_deg[0].abs() > 90.0 || origin_deg[1].abs() > 180.0 {
            return Err(Error::Config(format!("invalid origin {origin_deg:?}")));
        }
        let mut cam = Self { homography, distortion, origin_deg, image_size, forward_sign: 1.0, heading: None };
        cam.forward_sign = cam.detect_forward_sign();
        cam.heading = camera_heading(&cam).ok();
        Ok(cam)
    }

    pub fn homography(&self) -> &Homography {
        &self.homography
    }

    pub fn distortion(&self) -> &DistortionModel {
        &self.distortion
    }

    pub fn origin(&self) -> GeoPoint {
        GeoPoint::from_degrees(self.origin_deg[0], self.origin_deg[1])
    }

    pub fn origin_degrees(&self) -> [f64; 2] {
        self.origin_deg
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    /// Cached heading in radians, `None` if the horizon does not cross the
    /// image's vertical center line.
    pub fn heading(&self) -> Option<f64> {
        self.heading
    }

    /// Sign of `z` for points on the visible side of the horizon.
    pub fn forward_sign(&self) -> f64 {
        self.forward_sign
    }

    pub fn is_forward(&self, z: f64) -> bool {
        z * self.forward_sign > 0.0
    }

    fn detect_forward_sign(&self) -> f64 {
        // the bottom row of the frame always looks at the sea
        let bottom = ScreenPoint::new(self.distortion.center.x, self.image_size.1 as f64 - 1.0);
        let p = distort_screen_to_projected(bottom, &self.distortion);
        match deproject(p, &self.homography) {
            Ok((_, z)) if z < 0.0 => -1.0,
            _ => 1.0,
        }
    }

    pub fn screen_to_projected(&self, s: ScreenPoint) -> Pixel {
        distort_screen_to_projected(s, &self.distortion)
    }

    pub fn projected_to_screen(&self, p: Pixel) -> Result<ScreenPoint> {
        undistort_projected_to_screen(p, &self.distortion)
    }

    pub fn screen_to_world(&self, s: ScreenPoint) -> Result<(WorldPoint, f64)> {
        deproject(self.screen_to_projected(s), &self.homography)
    }

    pub fn world_to_screen(&self, w: WorldPoint) -> Result<(ScreenPoint, f64)> {
        let p = project(w, &self.homography)?;
        Ok((self.projected_to_screen(p.pixel())?, p.z))
    }

    /// Serializes to the `key = value` camera document.
    pub fn to_document(&self) -> String {
        let mut out = String::from("# shiptrack camera model\n");
        let m = self.homography.matrix();
        for r in 0..3 {
            for c in 0..3 {
                let _ = writeln!(out, "h{}{} = {}", r + 1, c + 1, fmt_f64(m[(r, c)]));
            }
        }
        let _ = writeln!(out, "k1 = {}", fmt_f64(self.distortion.k1));
        let _ = writeln!(out, "center_x = {}", fmt_f64(self.distortion.center.x));
        let _ = writeln!(out, "center_y = {}", fmt_f64(self.distortion.center.y));
        let _ = writeln!(out, "origin_lat_deg = {}", fmt_f64(self.origin_deg[0]));
        let _ = writeln!(out, "origin_lon_deg = {}", fmt_f64(self.origin_deg[1]));
        let _ = writeln!(out, "image_width = {}", self.image_size.0);
        let _ = writeln!(out, "image_height = {}", self.image_size.1);
        out
    }

    pub fn from_document(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().to_string();
            if !CAMERA_KEYS.contains(&key.as_str()) {
                return Err(Error::parse(line_no, format!("unknown key `{key}`")));
            }
            let value: f64 =
                value.trim().parse().map_err(|_| Error::parse(line_no, format!("`{key}` is not a number")))?;
            if fields.insert(key.clone(), value).is_some() {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
        }
        let get =
            |k: &str| fields.get(k).copied().ok_or_else(|| Error::Config(format!("camera document is missing `{k}`")));
        let mut rows = [[0.0; 3]; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = get(&format!("h{}{}", r + 1, c + 1))?;
            }
        }
        let dims = |k: &str| -> Result<u32> {
            let v = get(k)?;
            if v.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&v) {
                return Err(Error::Config(format!("`{k}` must be a positive integer")));
            }
            Ok(v as u32)
        };
        Self::with_origin_degrees(
            Homography::from_rows(rows)?,
            DistortionModel::new(get("k1")?, Pixel::new(get("center_x")?, get("center_y")?)),
            [get("origin_lat_deg")?, get("origin_lon_deg")?],
            (dims("image_width")?, dims("image_height")?),
        )
    }
}

const CAMERA_KEYS: [&str; 16] = [
    "h11",
    "h12",
    "h13",
    "h21",
    "h22",
    "h23",
    "h31",
    "h32",
    "h33",
    "k1",
    "center_x",
    "center_y",
    "origin_lat_deg",
    "origin_lon_deg",
    "image_width",
    "image_height",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Heading of the optical axis as a bearing (radians, clockwise from north,
/// in `(-pi, pi]`), from the horizon point straight above the distortion
/// center.
pub fn camera_heading(cam: &CameraModel) -> Result<f64> {
    let h = cam.homography();
    let x_c = cam.distortion().center.x;
    let y_hor = horizon_line(h).y_at(x_c).ok_or(Error::NoHorizonIntersection)?;
    let dir = h.inverse() * Vector3::new(x_c, y_hor, 1.0);
    // the horizon point sits at infinity; its direction is the visible side
    let (x, y) = (dir.x * cam.forward_sign(), dir.y * cam.forward_sign());
    if x.hypot(y) == 0.0 {
        return Err(Error::NoHorizonIntersection);
    }
    let alpha = x.atan2(y);
    Ok(if alpha <= -std::f64::consts::PI { std::f64::consts::PI } else { alpha })
}

/// Ideal pinhole camera above the sea plane, for building synthetic models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinhole {
    pub focal: f64,
    pub principal: Pixel,
    /// Meters above the sea.
    pub height: f64,
    /// Bearing of the optical axis, radians clockwise from north.
    pub heading: f64,
    /// Downward tilt of the optical axis, radians.
    pub pitch: f64,
}

impl Pinhole {
    pub fn homography(&self) -> Result<Homography> {
        let (sh, ch) = self.heading.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let forward = Vector3::new(sh * cp, ch * cp, -sp);
        let right = Vector3::new(ch, -sh, 0.0);
        let down = forward.cross(&right);
        let k = Matrix3::new(self.focal, 0.0, self.principal.x, 0.0, self.focal, self.principal.y, 0.0, 0.0, 1.0);
        // columns: images of the world x and y axes, and of the plane origin
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let mut m = Matrix3::zeros();
        m.set_column(0, &r.column(0));
        m.set_column(1, &r.column(1));
        m.set_column(2, &(-self.height * r.column(2)));
        Homography::new(k * m)?.normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    pub(crate) fn published() -> Homography {
        Homography::from_rows([[4.41e2, 3.79e2, -1.00e3], [-2.17e2, -5.65e1, -5.48e2], [-5.12e-1, -1.44e-1, 1.0]])
            .unwrap()
    }

    const K1: f64 = -4.053e-7;

    fn lens() -> DistortionModel {
        DistortionModel::new(K1, Pixel::new(640.0, 360.0))
    }

    #[test]
    fn identity_and_scaling_projection() {
        let p = project(WorldPoint::new(3.0, 4.0), &Homography::identity()).unwrap();
        assert_eq!((p.x, p.y, p.z), (3.0, 4.0, 1.0));
        let h = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let p = project(WorldPoint::new(3.0, 4.0), &h).unwrap();
        assert_eq!((p.x, p.y, p.z), (6.0, 8.0, 1.0));
        let (w, z) = deproject(Pixel::new(3.0, 4.0), &Homography::identity()).unwrap();
        assert_eq!((w.x, w.y, z), (3.0, 4.0, 1.0));
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(project(WorldPoint::new(-1.0, 5.0), &h), Err(Error::AtInfinity)));
    }

    #[test]
    fn horizon_pixels_do_not_deproject() {
        let h = published();
        let line = horizon_line(&h);
        assert!(!line.is_degenerate());
        // exactly on the line up to rounding
        let x = 640.0;
        let y = line.y_at(x).unwrap();
        let v = h.inverse() * Vector3::new(x, y, 1.0);
        assert!(v.z.abs() < 1e-12);
        assert!(matches!(deproject(Pixel::new(x, y), &h), Err(Error::OnHorizon)));
        assert!(horizon_line(&Homography::identity()).is_degenerate());
    }

    #[test]
    fn horizon_invariant_under_positive_scale() {
        let h = published();
        let scaled = Homography::new(h.matrix() * 7.5).unwrap();
        let (l1, l2) = (horizon_line(&h), horizon_line(&scaled));
        for x in [0.0, 320.0, 1279.0] {
            assert_abs_diff_eq!(l1.y_at(x).unwrap(), l2.y_at(x).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn distortion_reference_values() {
        let d = DistortionModel::new(0.0, Pixel::new(640.0, 360.0));
        assert_eq!(distort_screen_to_projected(ScreenPoint::new(640.0, 360.0), &d), Pixel::new(640.0, 360.0));
        assert_eq!(distort_screen_to_projected(ScreenPoint::new(650.0, 360.0), &d).x, 660.0);
        let p = distort_screen_to_projected(ScreenPoint::new(740.0, 360.0), &lens());
        assert_abs_diff_eq!(p.x, 640.0 + 199.5947, epsilon = 1e-9);
        assert_eq!(p.y, 360.0);
    }

    #[test]
    fn undistort_reference_values() {
        let s = undistort_projected_to_screen(Pixel::new(640.0, 360.0), &lens()).unwrap();
        assert_eq!((s.x, s.y), (640.0, 360.0));
        let d = DistortionModel::new(0.0, Pixel::new(640.0, 360.0));
        let s = undistort_projected_to_screen(Pixel::new(900.0, 100.0), &d).unwrap();
        assert_abs_diff_eq!(s.x, (900.0 + 640.0) / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.y, (100.0 + 360.0) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn undistort_rejects_points_beyond_the_fold() {
        // the radial map peaks at rho = sqrt(2 / (3 |k1|)); nothing projects beyond it
        let d = lens();
        let rho_max = (2.0 / (3.0 * K1.abs())).sqrt();
        let peak = rho_max * (2.0 + K1 * rho_max * rho_max);
        let p = Pixel::new(640.0 + peak * 1.01, 360.0);
        assert!(matches!(undistort_projected_to_screen(p, &d), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn bbox_model_reference_values() {
        let m = BBoxSizeModel::default();
        assert_eq!(bbox_from_distance(100.0, &m).unwrap(), (40.0, 33.5));
        let (sx, sy) = bbox_from_distance(1e15, &m).unwrap();
        assert_abs_diff_eq!(sx, 25.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sy, 25.0, epsilon = 1e-9);
        assert_eq!(distance_from_bbox(40.0, 33.5, &m).unwrap(), (100.0, 100.0));
        assert!(matches!(distance_from_bbox(25.0, 40.0, &m), Err(Error::SizeBelowMinimum { .. })));
        assert!(matches!(bbox_from_distance(0.0, &m), Err(Error::NonPositiveDistance(_))));
        for z in (10..=2000).step_by(10) {
            let z = z as f64;
            let (sx, sy) = bbox_from_distance(z, &m).unwrap();
            let (zx, zy) = distance_from_bbox(sx, sy, &m).unwrap();
            assert!((zx - z).abs() < 1e-9 && (zy - z).abs() < 1e-9);
        }
    }

    #[test]
    fn y_from_distance_limits() {
        let h = published();
        let line = horizon_line(&h);
        // 1/z -> 0 reproduces the horizon
        let y = y_p_from_distance(1e300, 500.0, &h).unwrap();
        assert_abs_diff_eq!(y, line.y_at(500.0).unwrap(), epsilon = 1e-9);
        assert!(matches!(y_p_from_distance(1.0, 0.0, &Homography::identity()), Err(Error::DegenerateRow)));
    }

    #[test]
    fn heading_of_north_facing_pinhole_is_zero() {
        let cam = CameraModel::new(
            Pinhole { focal: 1000.0, principal: Pixel::new(640.0, 360.0), height: 20.0, heading: 0.0, pitch: 0.2 }
                .homography()
                .unwrap(),
            DistortionModel::new(0.0, Pixel::new(640.0, 360.0)),
            GeoPoint::new(0.0, 0.0),
            (1280, 720),
        )
        .unwrap();
        assert_abs_diff_eq!(cam.heading().unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(cam.forward_sign(), 1.0);
    }

    #[test]
    fn pinhole_scale_tracks_depth() {
        let pin =
            Pinhole { focal: 1000.0, principal: Pixel::new(640.0, 360.0), height: 20.0, heading: 0.7, pitch: 0.2 };
        let h = pin.homography().unwrap();
        assert_eq!(h.matrix()[(2, 2)], 1.0);
        // a point straight ahead lands on the principal column
        let ahead = WorldPoint::new(0.7f64.sin() * 150.0, 0.7f64.cos() * 150.0);
        let p = project(ahead, &h).unwrap();
        assert_abs_diff_eq!(p.x, 640.0, epsilon = 1e-9);
        assert!(p.z > 0.0);
    }

    #[test]
    fn camera_document_round_trip() {
        let cam = CameraModel::new(published(), lens(), GeoPoint::from_degrees(54.3, 10.1), (1280, 720)).unwrap();
        let text = cam.to_document();
        let parsed = CameraModel::from_document(&text).unwrap();
        assert_eq!(parsed, cam);
        assert_eq!(parsed.to_document(), text);
        assert!(CameraModel::from_document("h11 = 1\nbogus = 2\n").is_err());
    }

    fn heading_of(h: Homography) -> f64 {
        CameraModel::new(h, lens(), GeoPoint::new(0.0, 0.0), (1280, 720)).unwrap().heading().unwrap()
    }

    fn wrap(a: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
    }

    proptest! {
        #[test]
        fn project_deproject_round_trip(x in -300.0f64..300.0, y in -300.0f64..300.0) {
            let h = published();
            let w = WorldPoint::new(x, y);
            if let Ok(p) = project(w, &h) {
                if p.z.abs() > 1e-3 {
                    let (back, z) = deproject(p.pixel(), &h).unwrap();
                    prop_assert!(back.distance(&w) < 1e-6);
                    prop_assert!((z - p.z).abs() <= 1e-9 * p.z.abs().max(1.0));
                }
            }
        }

        #[test]
        fn distort_undistort_round_trip(x in 0.0f64..1280.0, y in 0.0f64..720.0) {
            let d = lens();
            let p = distort_screen_to_projected(ScreenPoint::new(x, y), &d);
            let s = undistort_projected_to_screen(p, &d).unwrap();
            prop_assert!((s.x - x).abs() < 1e-6 && (s.y - y).abs() < 1e-6);
        }

        #[test]
        fn y_from_distance_matches_projection(x in -200.0f64..200.0, y in -200.0f64..200.0) {
            let h = published();
            let p = project(WorldPoint::new(x, y), &h).unwrap();
            prop_assume!(p.z.abs() > 1e-3 && p.z.abs() < 1e6);
            let yp = y_p_from_distance(p.z, p.x, &h).unwrap();
            prop_assert!((yp - p.y).abs() < 1e-9 * p.y.abs().max(1.0) * 1e3);
        }

        #[test]
        fn heading_rotates_with_world(theta in -3.0f64..3.0) {
            // world rotated clockwise by theta: w' = R w, H' = H R^-1
            let (s, c) = theta.sin_cos();
            let r_inv = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
            let h = published();
            let rotated = Homography::new(h.matrix() * r_inv).unwrap();
            let delta = wrap(heading_of(rotated) - heading_of(h));
            prop_assert!((delta - theta).abs() < 1e-9);
        }
    }
}
