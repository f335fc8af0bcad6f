//! File inputs and the detector/calibration pixel-space bridge.
//!
//! CSV schemas (header row required, columns in this order):
//!
//! | file            | header                                      |
//! |-----------------|---------------------------------------------|
//! | detections      | `frame,timestamp_s,confidence,cx,cy,sx,sy`   |
//! | GPS track       | `timestamp_s,lat_deg,lon_deg`               |
//! | correspondences | `timestamp_s,x_s,y_s,lat_deg,lon_deg`       |
//!
//! Detection coordinates are in detector space (downscaled, cropped frame).
//! An empty `timestamp_s` is filled from `frame / fps` when an fps is known.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::calibrator::Correspondence;
use crate::camera::{bbox_from_distance, project, BBoxSizeModel, CameraModel, Pixel, ScreenPoint};
use crate::error::{Error, Result};
use crate::geodesy::{gps_to_local, EarthModel, GeoPoint};

pub const DETECTION_HEADER: [&str; 7] = ["frame", "timestamp_s", "confidence", "cx", "cy", "sx", "sy"];
pub const GPS_HEADER: [&str; 3] = ["timestamp_s", "lat_deg", "lon_deg"];
pub const CORRESPONDENCE_HEADER: [&str; 5] = ["timestamp_s", "x_s", "y_s", "lat_deg", "lon_deg"];

/// One detector output box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame_index: u64,
    pub timestamp: f64,
    pub confidence: f64,
    pub cx: f64,
    pub cy: f64,
    pub sx: f64,
    pub sy: f64,
}

impl Detection {
    pub fn center(&self) -> Pixel {
        Pixel::new(self.cx, self.cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsSample {
    pub timestamp: f64,
    pub point: GeoPoint,
}

/// How detector pixels relate to calibration pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    /// Calibration (full) resolution.
    pub full_size: (u32, u32),
    /// Full-resolution pixels per detector pixel.
    pub detector_scale: f64,
    /// Detector input window, anchored at the top-left corner.
    pub crop: (f64, f64),
    /// Correction added to detector centers before scaling.
    pub detector_offset: (f64, f64),
}

impl Default for FrameGeometry {
    fn default() -> Self {
        Self {
            full_size: (1280, 720),
            detector_scale: 2.0,
            crop: (640.0, 192.0),
            // the detector reports centers 2 px too high; y grows downward
            detector_offset: (0.0, 2.0),
        }
    }
}

impl FrameGeometry {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.full_size.0 as f64, self.full_size.1 as f64);
        if !(self.detector_scale >= 1.0) {
            return Err(Error::Config(format!("detector scale must be >= 1, got {}", self.detector_scale)));
        }
        if !(self.crop.0 > 0.0 && self.crop.1 > 0.0)
            || self.crop.0 > w / self.detector_scale
            || self.crop.1 > h / self.detector_scale
        {
            return Err(Error::Config(format!(
                "crop {:?} does not fit in {:?} at scale {}",
                self.crop, self.full_size, self.detector_scale
            )));
        }
        if !(self.detector_offset.0.is_finite() && self.detector_offset.1.is_finite()) {
            return Err(Error::Config("detector offset must be finite".into()));
        }
        Ok(())
    }

    pub fn in_crop(&self, p: Pixel) -> bool {
        (0.0..=self.crop.0).contains(&p.x) && (0.0..=self.crop.1).contains(&p.y)
    }
}

/// Moves a detection into calibration pixels: offset, then scale.
pub fn detector_to_calibration_space(d: &Detection, g: &FrameGeometry) -> Detection {
    let s = g.detector_scale;
    Detection {
        cx: (d.cx + g.detector_offset.0) * s,
        cy: (d.cy + g.detector_offset.1) * s,
        sx: d.sx * s,
        sy: d.sy * s,
        ..*d
    }
}

/// Inverse of [`detector_to_calibration_space`].
pub fn calibration_to_detector_space(d: &Detection, g: &FrameGeometry) -> Detection {
    let s = g.detector_scale;
    Detection {
        cx: d.cx / s - g.detector_offset.0,
        cy: d.cy / s - g.detector_offset.1,
        sx: d.sx / s,
        sy: d.sy / s,
        ..*d
    }
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(1, format!("expected header `{}`, got `{}`", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, name: &str, line: u64) -> Result<&'a str> {
    record.get(i).map(str::trim).ok_or_else(|| Error::parse(line, format!("missing column `{name}`")))
}

fn number(record: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<f64> {
    let raw = field(record, i, name, line)?;
    let v: f64 = raw.parse().map_err(|_| Error::parse(line, format!("`{name}` is not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("`{name}` is not finite")));
    }
    Ok(v)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

/// Reads detections sorted by frame, then by descending confidence.
pub fn parse_detections(r: impl Read, fps: Option<f64>) -> Result<Vec<Detection>> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &DETECTION_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DETECTION_HEADER.len() {
            return Err(Error::parse(line, format!("expected 7 columns, got {}", record.len())));
        }
        let frame_raw = field(&record, 0, "frame", line)?;
        let frame_index: u64 = frame_raw
            .parse()
            .map_err(|_| Error::parse(line, format!("`frame` is not a non-negative integer: `{frame_raw}`")))?;
        let timestamp = if field(&record, 1, "timestamp_s", line)?.is_empty() {
            match fps {
                Some(fps) => frame_index as f64 / fps,
                None => return Err(Error::parse(line, "empty `timestamp_s` and no fps configured")),
            }
        } else {
            number(&record, 1, "timestamp_s", line)?
        };
        let confidence = number(&record, 2, "confidence", line)?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::parse(line, format!("confidence {confidence} is outside [0, 1]")));
        }
        let d = Detection {
            frame_index,
            timestamp,
            confidence,
            cx: number(&record, 3, "cx", line)?,
            cy: number(&record, 4, "cy", line)?,
            sx: number(&record, 5, "sx", line)?,
            sy: number(&record, 6, "sy", line)?,
        };
        if !(d.sx > 0.0 && d.sy > 0.0) {
            return Err(Error::parse(line, "box size must be positive"));
        }
        out.push(d);
    }
    out.sort_by(|a, b| a.frame_index.cmp(&b.frame_index).then(b.confidence.total_cmp(&a.confidence)));
    Ok(out)
}

pub fn write_detections(w: impl Write, detections: &[Detection]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(DETECTION_HEADER)?;
    for d in detections {
        writer.write_record([
            d.frame_index.to_string(),
            d.timestamp.to_string(),
            d.confidence.to_string(),
            d.cx.to_string(),
            d.cy.to_string(),
            d.sx.to_string(),
            d.sy.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a GPS track; timestamps must be strictly increasing.
pub fn parse_gps_track(r: impl Read) -> Result<Vec<GpsSample>> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &GPS_HEADER)?;
    let mut out: Vec<GpsSample> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let timestamp = number(&record, 0, "timestamp_s", line)?;
        let lat = number(&record, 1, "lat_deg", line)?;
        let lon = number(&record, 2, "lon_deg", line)?;
        if lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(Error::parse(line, format!("invalid coordinate ({lat}, {lon})")));
        }
        if let Some(prev) = out.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::parse(line, "timestamps must be strictly increasing"));
            }
        }
        out.push(GpsSample { timestamp, point: GeoPoint::from_degrees(lat, lon) });
    }
    Ok(out)
}

pub fn write_gps_track(w: impl Write, track: &[GpsSample]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(GPS_HEADER)?;
    for s in track {
        writer.write_record([s.timestamp.to_string(), s.point.lat_deg().to_string(), s.point.lon_deg().to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn parse_correspondences(r: impl Read) -> Result<Vec<Correspondence>> {
    let mut reader = csv_reader(r);
    check_header(&mut reader, &CORRESPONDENCE_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let lat = number(&record, 3, "lat_deg", line)?;
        let lon = number(&record, 4, "lon_deg", line)?;
        if lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(Error::parse(line, format!("invalid coordinate ({lat}, {lon})")));
        }
        out.push(Correspondence {
            timestamp: number(&record, 0, "timestamp_s", line)?,
            screen: ScreenPoint::new(number(&record, 1, "x_s", line)?, number(&record, 2, "y_s", line)?),
            geo: GeoPoint::from_degrees(lat, lon),
        });
    }
    Ok(out)
}

pub fn write_correspondences(w: impl Write, pairs: &[Correspondence]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(CORRESPONDENCE_HEADER)?;
    for c in pairs {
        writer.write_record([
            c.timestamp.to_string(),
            c.screen.x.to_string(),
            c.screen.y.to_string(),
            c.geo.lat_deg().to_string(),
            c.geo.lon_deg().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Linear interpolation of latitude and longitude between the bracketing
/// samples. Exact on the knots.
pub fn interpolate_gps(track: &[GpsSample], t: f64) -> Result<GeoPoint> {
    let (first, last) = match (track.first(), track.last()) {
        (Some(f), Some(l)) if track.len() >= 2 => (f, l),
        _ => {
            return Err(Error::OutOfRange {
                t,
                start: track.first().map_or(f64::NAN, |s| s.timestamp),
                end: track.last().map_or(f64::NAN, |s| s.timestamp),
            })
        }
    };
    if !(t >= first.timestamp && t <= last.timestamp) {
        return Err(Error::OutOfRange { t, start: first.timestamp, end: last.timestamp });
    }
    let i = track.partition_point(|s| s.timestamp < t);
    let b = &track[i];
    if b.timestamp == t {
        return Ok(b.point);
    }
    let a = &track[i - 1];
    let f = (t - a.timestamp) / (b.timestamp - a.timestamp);
    Ok(GeoPoint::new(a.point.lat + (b.point.lat - a.point.lat) * f, a.point.lon + (b.point.lon - a.point.lon) * f))
}

/// Frames `(index, timestamp)` of a video starting at `start` and sampled at
/// `fps`, restricted to `[from, to]`.
pub fn frames_in_span(start: f64, fps: f64, from: f64, to: f64) -> Vec<(u64, f64)> {
    if !(fps > 0.0) || !(to >= from) {
        return Vec::new();
    }
    let first = ((from - start) * fps).ceil().max(0.0) as u64;
    (first..).map(|k| (k, start + k as f64 / fps)).take_while(|(_, t)| *t <= to).collect()
}

/// A training label in normalized `class cx cy w h` form, relative to the
/// detector crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub frame_index: u64,
    pub timestamp: f64,
    pub class: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Label {
    /// One line of a label file: `class cx cy w h`, six decimals.
    pub fn to_line(&self) -> String {
        format!("{} {:.6} {:.6} {:.6} {:.6}", self.class, self.cx, self.cy, self.w, self.h)
    }

    /// Back to a detector-space detection.
    pub fn to_detection(&self, g: &FrameGeometry, confidence: f64) -> Detection {
        Detection {
            frame_index: self.frame_index,
            timestamp: self.timestamp,
            confidence,
            cx: self.cx * g.crop.0,
            cy: self.cy * g.crop.1,
            sx: self.w * g.crop.0,
            sy: self.h * g.crop.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    OutOfSpan,
    OnHorizon,
    BehindCamera,
    OutsideLens,
    OutsideCrop,
}

#[derive(Debug, Clone, Default)]
pub struct LabelExport {
    pub labels: Vec<Label>,
    pub skipped: Vec<(u64, SkipReason)>,
}

/// Predicts the vessel's box in every frame from its GPS track and the
/// calibrated camera.
pub fn export_labels(
    track: &[GpsSample],
    cam: &CameraModel,
    frames: &[(u64, f64)],
    model: &BBoxSizeModel,
    g: &FrameGeometry,
    earth: EarthModel,
) -> LabelExport {
    let mut out = LabelExport::default();
    for &(frame_index, t) in frames {
        match label_for_frame(track, cam, frame_index, t, model, g, earth) {
            Ok(label) => out.labels.push(label),
            Err(reason) => out.skipped.push((frame_index, reason)),
        }
    }
    out
}

fn label_for_frame(
    track: &[GpsSample],
    cam: &CameraModel,
    frame_index: u64,
    t: f64,
    model: &BBoxSizeModel,
    g: &FrameGeometry,
    earth: EarthModel,
) -> std::result::Result<Label, SkipReason> {
    let geo = interpolate_gps(track, t).map_err(|_| SkipReason::OutOfSpan)?;
    let w = gps_to_local(geo, cam.origin(), earth);
    let p = project(w, cam.homography()).map_err(|_| SkipReason::OnHorizon)?;
    if !cam.is_forward(p.z) {
        return Err(SkipReason::BehindCamera);
    }
    let s = cam.projected_to_screen(p.pixel()).map_err(|_| SkipReason::OutsideLens)?;
    let (sx, sy) = bbox_from_distance(p.z.abs(), model).map_err(|_| SkipReason::BehindCamera)?;
    let screen = Detection {
        frame_index,
        timestamp: t,
        confidence: 1.0,
        cx: s.x,
        cy: s.y,
        sx: sx * g.detector_scale,
        sy: sy * g.detector_scale,
    };
    let d = calibration_to_detector_space(&screen, g);
    let (x0, x1) = ((d.cx - 0.5 * d.sx).max(0.0), (d.cx + 0.5 * d.sx).min(g.crop.0));
    let (y0, y1) = ((d.cy - 0.5 * d.sy).max(0.0), (d.cy + 0.5 * d.sy).min(g.crop.1));
    if x1 <= x0 || y1 <= y0 {
        return Err(SkipReason::OutsideCrop);
    }
    Ok(Label {
        frame_index,
        timestamp: t,
        class: 0,
        cx: 0.5 * (x0 + x1) / g.crop.0,
        cy: 0.5 * (y0 + y1) / g.crop.1,
        w: (x1 - x0) / g.crop.0,
        h: (y1 - y0) / g.crop.1,
    })
}

/// Writes one `<frame:06>.txt` file per label into `dir`.
pub fn write_label_files(dir: &Path, labels: &[Label]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for label in labels {
        let path = dir.join(format!("{:06}.txt", label.frame_index));
        fs::write(&path, format!("{}\n", label.to_line())).map_err(|e| Error::from(e).in_file(path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{DistortionModel, Homography, Pinhole};
    use crate::geodesy::local_to_gps;
    use crate::geodesy::WorldPoint;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_detection_file() {
        let d = parse_detections("frame,timestamp_s,confidence,cx,cy,sx,sy\n".as_bytes(), None).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn confidence_out_of_range_reports_line() {
        let text = "frame,timestamp_s,confidence,cx,cy,sx,sy\n0,0,0.5,1,1,30,30\n1,0.1,1.2,1,1,30,30\n";
        match parse_detections(text.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detections_sorted_by_frame_then_confidence() {
        let text = "frame,timestamp_s,confidence,cx,cy,sx,sy\n\
                    2,0.2,0.4,10,10,30,30\n\
                    1,,0.3,11,10,30,30\n\
                    1,,0.9,12,10,30,30\n";
        let d = parse_detections(text.as_bytes(), Some(10.0)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.iter().map(|d| d.frame_index).collect::<Vec<_>>(), vec![1, 1, 2]);
        assert_eq!(d[0].confidence, 0.9);
        assert_eq!(d[0].timestamp, 0.1);
        assert!(parse_detections(text.as_bytes(), None).is_err());
    }

    #[test]
    fn bad_header_and_sizes_rejected() {
        assert!(parse_detections("frame,t,confidence\n".as_bytes(), None).is_err());
        let text = "frame,timestamp_s,confidence,cx,cy,sx,sy\n0,0,0.5,1,1,0,30\n";
        assert!(matches!(parse_detections(text.as_bytes(), None), Err(Error::Parse { line: 2, .. })));
    }

    fn linear_track() -> Vec<GpsSample> {
        (0..5)
            .map(|i| GpsSample {
                timestamp: 10.0 + 2.0 * i as f64,
                point: GeoPoint::new(0.9 + 1e-5 * i as f64, 0.2 - 3e-5 * i as f64),
            })
            .collect()
    }

    #[test]
    fn interpolation_is_exact_on_knots_and_linear_between() {
        let track = linear_track();
        for s in &track {
            assert_eq!(interpolate_gps(&track, s.timestamp).unwrap(), s.point);
        }
        let mid = interpolate_gps(&track, 11.0).unwrap();
        assert_abs_diff_eq!(mid.lat, 0.5 * (track[0].point.lat + track[1].point.lat), epsilon = 1e-15);
        assert_abs_diff_eq!(mid.lon, 0.5 * (track[0].point.lon + track[1].point.lon), epsilon = 1e-15);
        for k in 0..=800 {
            let t = 10.0 + k as f64 * 0.01;
            let p = interpolate_gps(&track, t).unwrap();
            let f = (t - 10.0) / 2.0;
            assert!((p.lat - (0.9 + 1e-5 * f)).abs() < 1e-12);
            assert!((p.lon - (0.2 - 3e-5 * f)).abs() < 1e-12);
        }
        assert!(matches!(interpolate_gps(&track, 9.0), Err(Error::OutOfRange { .. })));
        assert!(interpolate_gps(&track[..1], 10.0).is_err());
    }

    #[test]
    fn gps_track_requires_increasing_time() {
        let text = "timestamp_s,lat_deg,lon_deg\n0,54,10\n0,54,10\n";
        assert!(matches!(parse_gps_track(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn detector_space_transform() {
        let d = Detection { frame_index: 0, timestamp: 0.0, confidence: 0.5, cx: 100.0, cy: 50.0, sx: 40.0, sy: 33.5 };
        let identity = FrameGeometry { detector_scale: 1.0, detector_offset: (0.0, 0.0), ..Default::default() };
        assert_eq!(detector_to_calibration_space(&d, &identity), d);
        let g = FrameGeometry { detector_offset: (0.0, -2.0), ..Default::default() };
        let c = detector_to_calibration_space(&d, &g);
        assert_eq!((c.cx, c.cy, c.sx, c.sy), (200.0, 96.0, 80.0, 67.0));
    }

    #[test]
    fn geometry_validation() {
        assert!(FrameGeometry::default().validate().is_ok());
        let bad = FrameGeometry { crop: (700.0, 192.0), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn detector_space_inverse(cx in -100.0f64..800.0, cy in -100.0f64..400.0,
                                  sx in 1.0f64..200.0, sy in 1.0f64..200.0,
                                  scale in 1.0f64..4.0, ox in -5.0f64..5.0, oy in -5.0f64..5.0) {
            let g = FrameGeometry { detector_scale: scale, detector_offset: (ox, oy), ..Default::default() };
            let d = Detection { frame_index: 3, timestamp: 0.3, confidence: 0.7, cx, cy, sx, sy };
            let back = calibration_to_detector_space(&detector_to_calibration_space(&d, &g), &g);
            prop_assert!((back.cx - cx).abs() < 1e-9 && (back.cy - cy).abs() < 1e-9);
            prop_assert!((back.sx - sx).abs() < 1e-12 && (back.sy - sy).abs() < 1e-12);
        }

        #[test]
        fn interpolation_monotone_between_knots(t in 10.0f64..18.0) {
            let track = linear_track();
            let i = track.partition_point(|s| s.timestamp <= t).min(track.len() - 1).max(1);
            let (a, b) = (&track[i - 1], &track[i]);
            let p = interpolate_gps(&track, t).unwrap();
            let (lo, hi) = (a.point.lat.min(b.point.lat), a.point.lat.max(b.point.lat));
            prop_assert!(p.lat >= lo && p.lat <= hi);
            let (lo, hi) = (a.point.lon.min(b.point.lon), a.point.lon.max(b.point.lon));
            prop_assert!(p.lon >= lo && p.lon <= hi);
        }
    }

    fn sea_camera() -> CameraModel {
        let pin =
            Pinhole { focal: 1000.0, principal: Pixel::new(640.0, 360.0), height: 20.0, heading: 0.0, pitch: 0.235 };
        CameraModel::new(
            pin.homography().unwrap(),
            DistortionModel::new(0.0, Pixel::new(640.0, 360.0)),
            GeoPoint::from_degrees(54.0, 10.0),
            (1280, 720),
        )
        .unwrap()
    }

    #[test]
    fn exported_box_size_follows_distance() {
        let cam = sea_camera();
        let earth = EarthModel::default();
        // find the world point straight ahead whose scale is exactly 100
        let h: &Homography = cam.homography();
        let y = {
            let (mut lo, mut hi) = (10.0, 5000.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if project(WorldPoint::new(0.0, mid), h).unwrap().z < 100.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let geo = local_to_gps(WorldPoint::new(0.0, y), cam.origin(), earth).unwrap();
        let track = vec![GpsSample { timestamp: 0.0, point: geo }, GpsSample { timestamp: 1.0, point: geo }];
        let g = FrameGeometry::default();
        let out = export_labels(&track, &cam, &[(0, 0.5)], &BBoxSizeModel::default(), &g, earth);
        assert_eq!(out.labels.len(), 1);
        let l = out.labels[0];
        assert_abs_diff_eq!(l.w, 40.0 / 640.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l.h, 33.5 / 192.0, epsilon = 1e-9);
        assert!(l.to_line().starts_with("0 0.500000 "));
    }

    #[test]
    fn vessel_behind_camera_is_skipped() {
        let cam = sea_camera();
        let earth = EarthModel::default();
        let geo = local_to_gps(WorldPoint::new(0.0, -200.0), cam.origin(), earth).unwrap();
        let track = vec![GpsSample { timestamp: 0.0, point: geo }, GpsSample { timestamp: 1.0, point: geo }];
        let out = export_labels(
            &track,
            &cam,
            &[(0, 0.5), (1, 3.0)],
            &BBoxSizeModel::default(),
            &FrameGeometry::default(),
            earth,
        );
        assert!(out.labels.is_empty());
        assert_eq!(out.skipped, vec![(0, SkipReason::BehindCamera), (1, SkipReason::OutOfSpan)]);
    }

    #[test]
    fn frames_cover_span() {
        let f = frames_in_span(0.0, 10.0, 0.25, 0.6);
        assert_eq!(f.iter().map(|(k, _)| *k).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
    }

    #[test]
    fn label_files_written_per_frame() {
        let dir = tempfile::tempdir().unwrap();
        let label = Label { frame_index: 7, timestamp: 0.7, class: 0, cx: 0.5, cy: 0.25, w: 0.0625, h: 0.1744791666 };
        write_label_files(dir.path(), &[label]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("000007.txt")).unwrap();
        assert_eq!(text, "0 0.500000 0.250000 0.062500 0.174479\n");
    }
}
