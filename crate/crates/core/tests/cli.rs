use std::path::Path;
use std::process::{Command, Output};

fn shiptrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiptrack")).args(args).output().expect("binary runs")
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn p(dir: &Path, f: &str) -> String {
    dir.join(f).display().to_string()
}

#[test]
fn no_arguments_prints_usage() {
    assert_eq!(shiptrack(&[]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = shiptrack(&["fit-error", "--samples", &p(dir.path(), "nope.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = shiptrack(&["--set", "tracker.gate_radius=-3", "synth", "--out-dir", &p(dir.path(), "")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn calibrate_recovers_published_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(shiptrack(&["--set", "synth.camera=published", "synth", "--out-dir", &p(d, "")]).status.success());
    let out = shiptrack(&[
        "--set",
        "calibrator.origin_lat_deg=59.9",
        "--set",
        "calibrator.origin_lon_deg=10.7",
        "calibrate",
        "--correspondences",
        &p(d, "correspondences.csv"),
        "--out",
        &p(d, "fitted.txt"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((stdout_value(&out, "k1") + 4.053e-7).abs() < 1e-9);
    assert!(stdout_value(&out, "rmse_px") < 0.5);
    let curve = std::fs::read_to_string(d.join("loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1001);
}

#[test]
fn noise_free_chain_is_accurate_and_fits_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(shiptrack(&["synth", "--out-dir", &p(d, "")]).status.success());
    let track = shiptrack(&[
        "track",
        "--camera",
        &p(d, "camera.txt"),
        "--detections",
        &p(d, "detections.csv"),
        "--out-dir",
        &p(d, ""),
    ]);
    assert!(track.status.success(), "{}", String::from_utf8_lossy(&track.stderr));
    let eval = shiptrack(&[
        "evaluate",
        "--prediction",
        &p(d, "track_gps.csv"),
        "--truth",
        &p(d, "truth.csv"),
        "--camera",
        &p(d, "camera.txt"),
        "--out",
        &p(d, "errors.csv"),
    ]);
    assert!(eval.status.success());
    assert!(stdout_value(&eval, "rmse_m") < 1.0);
    let fit = shiptrack(&["fit-error", "--samples", &p(d, "errors.csv"), "--at", "100"]);
    assert!(fit.status.success());
    assert!(stdout_value(&fit, "slope") >= 0.0);
    assert!(stdout_value(&fit, "error_at_100m").is_finite());
}

#[test]
fn plot_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(shiptrack(&["synth", "--out-dir", &p(d, "")]).status.success());
    let out = shiptrack(&[
        "plot",
        "--input",
        &p(d, "detections.csv"),
        "--x",
        "timestamp_s",
        "--y",
        "cx",
        "--y",
        "cy",
        "--out",
        &p(d, "plot.svg"),
        "--kind",
        "scatter",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(d.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<circle"));
}
