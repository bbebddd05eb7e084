use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use streetgeo::config::{CameraHeight, Grid, RunConfig};
use streetgeo::eval::{format_table, grid_search, per_class_reports, Axis, Split};
use streetgeo::exec::Execution;
use streetgeo::height::PitchMode;
use streetgeo::io::{self, ExportFormat};
use streetgeo::mrf::U0Aggregation;
use streetgeo::pipeline::PreparedSurvey;
use streetgeo::sim::{NoiseModel, SceneSpec};
use streetgeo::{run_pipeline, Error, Result};

#[derive(Parser)]
#[command(name = "streetgeo", version, about = "Geolocate and size street objects from image detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse detections into geolocated object instances.
    Fuse {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Output file, `-` for standard output.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, default_value = "jsonl", value_parser = parse::<ExportFormat>)]
        format: ExportFormat,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic survey with ground truth.
    Simulate(SimulateArgs),
    /// Score predicted instances against ground truth.
    Eval {
        /// Exported instances (JSONL or GeoJSON), `-` for standard input.
        #[arg(long, default_value = "-")]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Grid-search weights and linkage cutoff for the best f-score.
    Tune {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',')]
        alpha_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        beta_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        linkage_cutoff_grid: Option<Vec<f64>>,
        /// Select on the half below the median truth coordinate along this
        /// axis and report the other half; otherwise use all data.
        #[arg(long, value_parser = parse_axis)]
        split: Option<Axis>,
        /// Write the selected configuration as TOML.
        #[arg(long)]
        out_config: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Estimate the camera height from objects of a ground-level class.
    Calibrate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, default_value = "drain")]
        class: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse::<U0Aggregation>)]
    u0_aggregation: Option<U0Aggregation>,
    #[arg(long)]
    max_ray_distance: Option<f64>,
    #[arg(long)]
    linkage_cutoff: Option<f64>,
    #[arg(long)]
    tp_radius: Option<f64>,
    #[arg(long, value_parser = parse::<PitchMode>)]
    pitch_mode: Option<PitchMode>,
    /// Meters, `frames`, or `calibrate-from-class:<class>`.
    #[arg(long, value_parser = parse::<CameraHeight>)]
    camera_height: Option<CameraHeight>,
    #[arg(long)]
    split_clusters: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run without the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML scene description; replaces the generated street layout.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of objects, alternating drains and signs.
    #[arg(long, default_value_t = 10)]
    objects: usize,
    /// Start from a noise-free model instead of the default noise.
    #[arg(long)]
    noise_free: bool,
    #[arg(long)]
    bearing_sigma: Option<f64>,
    #[arg(long)]
    depth_sigma: Option<f64>,
    #[arg(long)]
    gps_sigma: Option<f64>,
    #[arg(long)]
    pixel_sigma: Option<f64>,
    #[arg(long)]
    false_positive_rate: Option<f64>,
    #[arg(long)]
    miss_rate: Option<f64>,
    #[arg(long)]
    camera_height: Option<f64>,
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> std::result::Result<T, String> {
    s.parse()
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    match s {
        "lat" | "latitude" => Ok(Axis::Latitude),
        "lon" | "longitude" => Ok(Axis::Longitude),
        other => Err(format!("unknown axis `{other}` (expected lat or lon)")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_toml(&read_text(path)?)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        apply!(alpha, beta, lambda, u0_aggregation, max_ray_distance, linkage_cutoff, tp_radius, pitch_mode, camera_height, split_clusters);
        if self.seed.is_some() {
            c.seed = self.seed;
        }
        if self.sequential {
            c.execution = Execution::Sequential;
        }
        c.validate()?;
        Ok(c)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => toml::from_str::<SceneSpec>(&read_text(path)?)
            .map_err(|e| Error::Config(vec![e.message().to_string()]))?,
        None => SceneSpec::street(
            args.seed,
            args.objects,
            if args.noise_free { NoiseModel::none() } else { NoiseModel::default() },
        ),
    };
    let n = &mut spec.noise;
    for (slot, v) in [
        (&mut n.bearing_sigma, args.bearing_sigma),
        (&mut n.depth_sigma, args.depth_sigma),
        (&mut n.gps_sigma, args.gps_sigma),
        (&mut n.pixel_sigma, args.pixel_sigma),
        (&mut n.false_positive_rate, args.false_positive_rate),
        (&mut n.miss_rate, args.miss_rate),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(h) = args.camera_height {
        spec.camera_height = h;
    }
    let scene = spec.generate()?;
    fs::create_dir_all(&args.out_dir)?;
    io::write_frames(&scene.frames, io::create_output(&args.out_dir.join("frames.jsonl"))?)?;
    io::write_detections(&scene.detections, io::create_output(&args.out_dir.join("detections.jsonl"))?)?;
    io::write_truth(&scene.truth, io::create_output(&args.out_dir.join("truth.jsonl"))?)?;
    eprintln!(
        "wrote {} frames, {} detections, {} objects to {}",
        scene.frames.len(),
        scene.detections.len(),
        scene.truth.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fuse {
            frames,
            detections,
            out,
            format,
            config,
        } => {
            let config = config.resolve()?;
            let survey = io::load_survey(&frames, &detections)?;
            let output = run_pipeline(&survey, &config)?;
            if let Some(c) = output.calibration {
                eprintln!("calibrated camera height {:.3} m from {} objects", c.mean_based, c.objects);
            }
            info!("{} instances", output.instances.len());
            io::export_instances(&output.instances, format, io::create_output(&out)?)?;
        }
        Command::Simulate(args) => simulate(&args)?,
        Command::Eval {
            predictions,
            truth,
            config,
        } => {
            let config = config.resolve()?;
            let predictions = io::read_instances(io::open_input(&predictions)?, &predictions.display().to_string())?;
            let truth = io::read_truth(io::open_input(&truth)?, &truth.display().to_string())?;
            let rows = per_class_reports(&predictions, &truth, config.tp_radius);
            print!("{}", format_table(&rows));
        }
        Command::Tune {
            frames,
            detections,
            truth,
            alpha_grid,
            beta_grid,
            lambda_grid,
            linkage_cutoff_grid,
            split,
            out_config,
            config,
        } => {
            let config = config.resolve()?;
            let survey = io::load_survey(&frames, &detections)?;
            let truth = io::read_truth(io::open_input(&truth)?, &truth.display().to_string())?;
            let defaults = Grid::default();
            let grid = Grid {
                alpha: alpha_grid.unwrap_or(defaults.alpha),
                beta: beta_grid.unwrap_or(defaults.beta),
                lambda: lambda_grid.unwrap_or(defaults.lambda),
                linkage_cutoff: linkage_cutoff_grid.unwrap_or(defaults.linkage_cutoff),
            };
            let split = split.map(|axis| Split::at_median(axis, &truth));
            let result = grid_search(&survey, &truth, &grid, &config, split)?;
            let c = &result.config;
            println!("evaluated {} combinations, skipped {}", result.evaluated, result.skipped);
            match split {
                Some(s) => println!("protocol: validation/test split at {:?} {}", s.axis, s.threshold),
                None => println!("protocol: full dataset"),
            }
            println!("alpha {} beta {} lambda {} linkage_cutoff {}", c.alpha, c.beta, c.lambda, c.linkage_cutoff);
            print!("selection\n{}", format_table(&[("all".into(), result.selection.clone())]));
            if let Some(test) = &result.test {
                print!("test\n{}", format_table(&[("all".into(), test.clone())]));
            }
            if let Some(path) = out_config {
                io::create_output(&path)?.write_all(c.to_toml().as_bytes())?;
            }
        }
        Command::Calibrate {
            frames,
            detections,
            class,
            config,
        } => {
            let config = RunConfig {
                camera_height: CameraHeight::CalibrateFromClass(class),
                ..config.resolve()?
            };
            let survey = io::load_survey(&frames, &detections)?;
            let output = PreparedSurvey::new(&survey, &config).run(&config)?;
            let c = output.calibration.expect("calibration requested");
            println!("objects {}", c.objects);
            println!("camera height (mean) {:.3} m", c.mean_based);
            println!("camera height (median) {:.3} m", c.median_based);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
