//! Conversions between GPS coordinates and a local east/north metric frame
//! centered on the camera, plus great-circle distances.
//!
//! All angles are radians. Degrees appear only at file boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latitude/longitude pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat: lat_deg.to_radians(), lon: lon_deg.to_radians() }
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }

    pub fn is_valid(&self) -> bool {
        use std::f64::consts::{FRAC_PI_2, PI};
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.lat)
            && (-PI..=PI).contains(&self.lon)
    }
}

/// Position on the sea plane in meters: `x` east, `y` north of the camera.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Spherical earth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius: f64,
}

impl EarthModel {
    pub const DEFAULT_RADIUS: f64 = 6_371_000.0;

    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("earth radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        Self { radius: Self::DEFAULT_RADIUS }
    }
}

/// Equirectangular projection of `p` into the plane tangent at `origin`.
pub fn gps_to_local(p: GeoPoint, origin: GeoPoint, earth: EarthModel) -> WorldPoint {
    WorldPoint { x: earth.radius * (p.lon - origin.lon) * origin.lat.cos(), y: earth.radius * (p.lat - origin.lat) }
}

/// Exact inverse of [`gps_to_local`].
pub fn local_to_gps(w: WorldPoint, origin: GeoPoint, earth: EarthModel) -> Result<GeoPoint> {
    let cos_lat0 = origin.lat.cos();
    if cos_lat0.abs() < 1e-12 {
        return Err(Error::PolarOrigin);
    }
    Ok(GeoPoint { lat: origin.lat + w.y / earth.radius, lon: origin.lon + w.x / (earth.radius * cos_lat0) })
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> f64 {
    let half_dlat = 0.5 * (b.lat - a.lat);
    let half_dlon = 0.5 * (b.lon - a.lon);
    let h = half_dlat.sin().powi(2) + a.lat.cos() * b.lat.cos() * half_dlon.sin().powi(2);
    2.0 * earth.radius * h.clamp(0.0, 1.0).sqrt().asin()
}
