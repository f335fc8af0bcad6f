use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shiptrack::calibrator::{calibrate, write_loss_curve};
use shiptrack::camera::{camera_heading, CameraModel};
use shiptrack::config::Config;
use shiptrack::error_model::{
    evaluate, fit_linear, mean_error, parse_error_samples, predict_error, write_error_samples,
};
use shiptrack::fusion::write_world_track;
use shiptrack::ingest::{
    export_labels, frames_in_span, parse_correspondences, parse_detections, parse_gps_track, write_correspondences,
    write_detections, write_gps_track, write_label_files,
};
use shiptrack::pipeline::run_track;
use shiptrack::plot::{read_series, render_svg, PlotKind};
use shiptrack::synth::generate;
use shiptrack::tracker::write_trajectories;
use shiptrack::{Error, Result};

/// Vessel localization from a calibrated monocular camera.
#[derive(Parser)]
#[command(version, arg_required_else_help = true)]
struct Cli {
    /// Configuration file of `module.key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the homography and distortion from screen/GPS correspondences.
    Calibrate {
        #[arg(long)]
        correspondences: PathBuf,
        /// Camera file to write.
        #[arg(long)]
        out: PathBuf,
        /// Loss per k1 grid point; defaults to loss_curve.csv beside the camera file.
        #[arg(long)]
        loss_curve: Option<PathBuf>,
    },
    /// Write detector training labels from a GPS track.
    LabelExport {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        gps: PathBuf,
        /// GPS time of frame 0, seconds.
        #[arg(long, default_value_t = 0.0)]
        video_start: f64,
        /// Export window; defaults to the GPS span.
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Track the target vessel and convert it to GPS.
    Track {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare a predicted GPS track with ground truth.
    Evaluate {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Camera file supplying the camera position.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit error = slope * distance to error samples.
    FitError {
        #[arg(long)]
        samples: PathBuf,
        /// Also print the predicted error at these distances.
        #[arg(long = "at")]
        distances: Vec<f64>,
    },
    /// Generate a synthetic scenario.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render CSV columns as an SVG chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, required = true)]
        y: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Line)]
        kind: Kind,
        #[arg(long, default_value = "")]
        title: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Line,
    Scatter,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::from(e).in_file(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::from(e).in_file(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush().map_err(Error::from)).map_err(|e| e.in_file(path))
}

fn read_camera(path: &Path) -> Result<CameraModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    CameraModel::from_document(&text).map_err(|e| e.in_file(path))
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        cfg.assign(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Calibrate { correspondences, out, loss_curve } => {
            let pairs = parse_correspondences(open(&correspondences)?).map_err(|e| e.in_file(&correspondences))?;
            let result = calibrate(&pairs, &cfg.calibration_setup()?)?;
            write_file(&out, |w| Ok(w.write_all(result.camera.to_document().as_bytes())?))?;
            let curve_path = loss_curve.unwrap_or_else(|| out.with_file_name("loss_curve.csv"));
            write_file(&curve_path, |w| write_loss_curve(w, &result.loss_curve))?;
            println!("k1={}", result.k1());
            println!("loss_px2={}", result.loss);
            println!("rmse_px={}", result.rmse());
            match camera_heading(&result.camera) {
                Ok(h) => println!("heading_deg={}", h.to_degrees()),
                Err(e) => println!("heading_deg=undefined ({e})"),
            }
        }
        Command::LabelExport { camera, gps, video_start, from, to, out_dir } => {
            let cam = read_camera(&camera)?;
            let track = parse_gps_track(open(&gps)?).map_err(|e| e.in_file(&gps))?;
            let fps = cfg.fps.ok_or_else(|| Error::Config("label export needs ingest.fps".into()))?;
            let (first, last) = match (track.first(), track.last()) {
                (Some(a), Some(b)) => (a.timestamp, b.timestamp),
                _ => return Err(Error::EmptyTrack.in_file(&gps)),
            };
            let frames = frames_in_span(video_start, fps, from.unwrap_or(first), to.unwrap_or(last));
            let mut export = export_labels(&track, &cam, &frames, &cfg.bbox, &cfg.geometry, cfg.earth);
            for l in &mut export.labels {
                l.class = cfg.label_class;
            }
            write_label_files(&out_dir, &export.labels)?;
            println!("labels={}", export.labels.len());
            println!("skipped={}", export.skipped.len());
        }
        Command::Track { camera, detections, out_dir } => {
            let cam = read_camera(&camera)?;
            let dets = parse_detections(open(&detections)?, cfg.fps).map_err(|e| e.in_file(&detections))?;
            let out = run_track(&dets, &cam, &cfg)?;
            write_file(&out_dir.join("trajectories.csv"), |w| write_trajectories(w, &out.trajectories))?;
            write_file(&out_dir.join("world_track.csv"), |w| write_world_track(w, &out.world))?;
            write_file(&out_dir.join("track_gps.csv"), |w| write_gps_track(w, &out.gps))?;
            println!("trajectories={}", out.trajectories.len());
            println!("target={}", out.target.id);
            println!("masked={}", out.fused.iter().filter(|p| p.masked).count());
            println!("gps_points={}", out.gps.len());
        }
        Command::Evaluate { prediction, truth, camera, out } => {
            let cam = read_camera(&camera)?;
            let pred = parse_gps_track(open(&prediction)?).map_err(|e| e.in_file(&prediction))?;
            let truth_track = parse_gps_track(open(&truth)?).map_err(|e| e.in_file(&truth))?;
            let (samples, rmse) = evaluate(&pred, &truth_track, cam.origin(), cfg.earth)?;
            write_file(&out, |w| write_error_samples(w, &samples))?;
            println!("samples={}", samples.len());
            println!("mean_error_m={}", mean_error(&samples));
            println!("rmse_m={rmse}");
        }
        Command::FitError { samples, distances } => {
            let s = parse_error_samples(open(&samples)?).map_err(|e| e.in_file(&samples))?;
            let model = fit_linear(&s)?;
            println!("slope={}", model.slope);
            for d in distances {
                println!("error_at_{d}m={}", predict_error(d, &model));
            }
        }
        Command::Synth { out_dir } => {
            let scenario = cfg.scenario();
            let out = generate(&scenario)?;
            write_file(&out_dir.join("camera.txt"), |w| Ok(w.write_all(scenario.camera.to_document().as_bytes())?))?;
            write_file(&out_dir.join("detections.csv"), |w| write_detections(w, &out.detections))?;
            write_file(&out_dir.join("correspondences.csv"), |w| write_correspondences(w, &out.correspondences))?;
            for (i, track) in out.truth.iter().enumerate() {
                let name = if i == 0 { "truth.csv".to_string() } else { format!("truth_ship{i}.csv") };
                write_file(&out_dir.join(name), |w| write_gps_track(w, track))?;
            }
            println!("frames={}", scenario.frame_count());
            println!("detections={}", out.detections.len());
        }
        Command::Plot { input, x, y, out, kind, title } => {
            let series = read_series(open(&input)?, &x, &y).map_err(|e| e.in_file(&input))?;
            let kind = match kind {
                Kind::Line => PlotKind::Line,
                Kind::Scatter => PlotKind::Scatter,
            };
            let title = if title.is_empty() { input.display().to_string() } else { title };
            write_file(&out, |w| Ok(w.write_all(render_svg(&series, kind, &title, &x).as_bytes())?))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
