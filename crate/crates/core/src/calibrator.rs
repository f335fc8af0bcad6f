//! Camera calibration from hand-labeled screen positions paired with GPS
//! fixes. The homography is linear given `k1`, so it is solved in closed
//! form (normalized DLT) for every `k1` on a grid and the grid point with
//! the smallest reprojection loss wins.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::camera::{
    distort_screen_to_projected, project, CameraModel, DistortionModel, Homography, Pixel, ScreenPoint,
};
use crate::error::{Error, Result};
use crate::geodesy::{gps_to_local, EarthModel, GeoPoint, WorldPoint};

/// Relative gap below which the two smallest singular values are considered
/// equal and the null space ambiguous.
const SINGULAR_GAP: f64 = 1e-9;

/// One labeled screen position with its GPS fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub timestamp: f64,
    pub screen: ScreenPoint,
    pub geo: GeoPoint,
}

/// Uniform search grid for `k1`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K1Grid {
    pub k1_min: f64,
    pub k1_max: f64,
    pub steps: usize,
}

impl Default for K1Grid {
    fn default() -> Self {
        Self { k1_min: -1e-6, k1_max: 0.0, steps: 1000 }
    }
}

impl K1Grid {
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            return self.k1_max;
        }
        self.k1_min + (self.k1_max - self.k1_min) * i as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    /// Grid point closest to `k1`.
    pub fn nearest(&self, k1: f64) -> f64 {
        self.values().into_iter().min_by(|a, b| (a - k1).abs().total_cmp(&(b - k1).abs())).unwrap_or(k1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 || !(self.k1_min < self.k1_max) || !self.k1_min.is_finite() || !self.k1_max.is_finite() {
            return Err(Error::Config(format!("k1 grid needs k1_min < k1_max and at least 2 steps, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub camera: CameraModel,
    /// Sum of squared reprojection errors at the chosen `k1`, pixels².
    pub loss: f64,
    /// `(k1, loss)` for every grid point, in grid order.
    pub loss_curve: Vec<(f64, f64)>,
    pub n_points: usize,
}

impl CalibrationResult {
    pub fn k1(&self) -> f64 {
        self.camera.distortion().k1
    }

    /// Root mean squared reprojection error in pixels.
    pub fn rmse(&self) -> f64 {
        (self.loss / self.n_points as f64).sqrt()
    }
}

/// Similarity transform that moves the centroid to the origin and scales the
/// mean distance from it to `sqrt(2)`.
fn conditioning(points: &[(f64, f64)]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    (t[(0, 0)] * p.0 + t[(0, 2)], t[(1, 1)] * p.1 + t[(1, 2)])
}

/// Least-squares homography mapping world points onto projected pixels,
/// normalized so `h33 = 1`.
pub fn solve_homography(pairs: &[(Pixel, WorldPoint)]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!("need at least 4 correspondences, got {}", pairs.len())));
    }
    let pix: Vec<(f64, f64)> = pairs.iter().map(|(p, _)| (p.x, p.y)).collect();
    let world: Vec<(f64, f64)> = pairs.iter().map(|(_, w)| (w.x, w.y)).collect();
    let t_pix = conditioning(&pix)?;
    let t_world = conditioning(&world)?;

    // pad to a square system so the SVD always exposes all nine singular values
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, w)) in pix.iter().zip(&world).enumerate() {
        let (u, v) = apply(&t_pix, *p);
        let (x, y) = apply(&t_world, *w);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = x;
        a[(r0, 1)] = y;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -u * x;
        a[(r0, 7)] = -u * y;
        a[(r0, 8)] = -u;
        a[(r1, 3)] = x;
        a[(r1, 4)] = y;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -v * x;
        a[(r1, 7)] = -v * y;
        a[(r1, 8)] = -v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    let largest = svd.singular_values[order[order.len() - 1]];
    if second - smallest <= SINGULAR_GAP * largest {
        return Err(Error::DegenerateConfiguration("least-squares null space is not one-dimensional".into()));
    }
    let h = v_t.row(order[0]);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_pix_inv =
        t_pix.try_inverse().ok_or_else(|| Error::DegenerateConfiguration("singular conditioning".into()))?;
    Homography::new(t_pix_inv * h_norm * t_world)?.normalized()
}

/// Sum over correspondences of squared distances, in projected space,
/// between the labeled points (mapped through the distortion with `k1`) and
/// the homography's projection of their world positions.
pub fn reprojection_loss(h: &Homography, distortion: &DistortionModel, pairs: &[(ScreenPoint, WorldPoint)]) -> f64 {
    pairs
        .iter()
        .map(|(s, w)| {
            let label = distort_screen_to_projected(*s, distortion);
            match project(*w, h) {
                Ok(p) => (p.x - label.x).powi(2) + (p.y - label.y).powi(2),
                Err(_) => f64::INFINITY,
            }
        })
        .sum()
}

fn fit_at(k1: f64, center: Pixel, pairs: &[(ScreenPoint, WorldPoint)]) -> Result<(Homography, f64)> {
    let distortion = DistortionModel::new(k1, center);
    let projected: Vec<(Pixel, WorldPoint)> =
        pairs.iter().map(|(s, w)| (distort_screen_to_projected(*s, &distortion), *w)).collect();
    let h = solve_homography(&projected)?;
    let loss = reprojection_loss(&h, &distortion, pairs);
    Ok((h, loss))
}

/// Options that are not part of the data itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSetup {
    pub origin: GeoPoint,
    /// Distortion center in calibration pixels.
    pub center: Pixel,
    pub image_size: (u32, u32),
    pub grid: K1Grid,
    pub earth: EarthModel,
}

pub fn calibrate(pairs: &[Correspondence], setup: &CalibrationSetup) -> Result<CalibrationResult> {
    setup.grid.validate()?;
    let world_pairs: Vec<(ScreenPoint, WorldPoint)> =
        pairs.iter().map(|c| (c.screen, gps_to_local(c.geo, setup.origin, setup.earth))).collect();

    let fits: Vec<(f64, Homography, f64)> = (0..setup.grid.steps)
        .into_par_iter()
        .map(|i| {
            let k1 = setup.grid.value(i);
            fit_at(k1, setup.center, &world_pairs).map(|(h, loss)| (k1, h, loss))
        })
        .collect::<Result<_>>()?;

    let loss_curve: Vec<(f64, f64)> = fits.iter().map(|(k, _, l)| (*k, *l)).collect();
    let (k1, h, loss) = fits[argmin(&loss_curve)];
    let camera = CameraModel::new(h, DistortionModel::new(k1, setup.center), setup.origin, setup.image_size)?;
    Ok(CalibrationResult { camera, loss, loss_curve, n_points: pairs.len() })
}

/// Index of the smallest loss; ties go to the smaller `|k1|`.
fn argmin(curve: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, (k1, loss)) in curve.iter().enumerate() {
        let (best_k1, best_loss) = curve[best];
        if *loss < best_loss || (*loss == best_loss && k1.abs() < best_k1.abs()) {
            best = i;
        }
    }
    best
}

pub const LOSS_CURVE_HEADER: [&str; 2] = ["k1", "loss_px2"];

pub fn write_loss_curve(w: impl std::io::Write, curve: &[(f64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(LOSS_CURVE_HEADER)?;
    for (k1, loss) in curve {
        writer.write_record([k1.to_string(), loss.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
