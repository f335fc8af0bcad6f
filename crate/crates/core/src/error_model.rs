//! Prediction error against distance from the camera.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geodesy::{haversine, EarthModel, GeoPoint};
use crate::ingest::{interpolate_gps, GpsSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub timestamp: f64,
    /// Meters from the camera to the true position.
    pub distance: f64,
    /// Meters from the predicted to the true position.
    pub error: f64,
}

/// Error proportional to distance, without intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub slope: f64,
}

/// Least-squares slope through the origin.
pub fn fit_linear(samples: &[ErrorSample]) -> Result<ErrorModel> {
    if samples.len() < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 samples, got {}", samples.len())));
    }
    let sdd: f64 = samples.iter().map(|s| s.distance * s.distance).sum();
    if sdd == 0.0 {
        return Err(Error::DegenerateData("every distance is zero".into()));
    }
    let sde: f64 = samples.iter().map(|s| s.distance * s.error).sum();
    Ok(ErrorModel { slope: sde / sdd })
}

pub fn predict_error(distance: f64, m: &ErrorModel) -> f64 {
    m.slope * distance
}

pub fn rmse(samples: &[ErrorSample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    (samples.iter().map(|s| s.error * s.error).sum::<f64>() / samples.len() as f64).sqrt()
}

pub fn mean_error(samples: &[ErrorSample]) -> f64 {
    samples.iter().map(|s| s.error).sum::<f64>() / samples.len() as f64
}

/// Compares predictions with ground truth interpolated to the prediction
/// timestamps. Predictions outside the truth span are skipped.
pub fn evaluate(
    pred: &[GpsSample],
    truth: &[GpsSample],
    camera: GeoPoint,
    earth: EarthModel,
) -> Result<(Vec<ErrorSample>, f64)> {
    let samples: Vec<ErrorSample> = pred
        .iter()
        .filter_map(|p| {
            let t = interpolate_gps(truth, p.timestamp).ok()?;
            Some(ErrorSample {
                timestamp: p.timestamp,
                distance: haversine(camera, t, earth),
                error: haversine(p.point, t, earth),
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::NoOverlap);
    }
    let r = rmse(&samples);
    Ok((samples, r))
}

pub const ERROR_SAMPLE_HEADER: [&str; 3] = ["timestamp_s", "distance_m", "error_m"];

pub fn write_error_samples(w: impl Write, samples: &[ErrorSample]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(ERROR_SAMPLE_HEADER)?;
    for s in samples {
        writer.write_record([s.timestamp.to_string(), s.distance.to_string(), s.error.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn parse_error_samples(r: impl std::io::Read) -> Result<Vec<ErrorSample>> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().ne(ERROR_SAMPLE_HEADER) {
        return Err(Error::parse(1, format!("expected header {}", ERROR_SAMPLE_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::parse(line, format!("bad {}", ERROR_SAMPLE_HEADER[k])))
        };
        let s = ErrorSample { timestamp: field(0)?, distance: field(1)?, error: field(2)? };
        if !(s.distance >= 0.0 && s.error >= 0.0) {
            return Err(Error::parse(line, "distance and error must be non-negative"));
        }
        out.push(s);
    }
    Ok(out)
}
