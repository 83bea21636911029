//! The `nloct` command-line tool: `tune`, `simulate`, `analyze` and `image`
//! subcommands over the core pipeline, driven by a TOML run configuration.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use nloct_core::imaging::Pipeline;
use nloct_core::{Geometry, NoiseModel};

pub use config::{Overrides, RunConfig, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "nloct", version, about = "Infrared OCT with undetected photons: simulation and analysis")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase-matched wavelengths and coherence length of each source.
    Tune,
    /// Synthesize coarse and fine traces of a sample.
    Simulate(SimulateArgs),
    /// Detect surfaces and estimate material constants.
    Analyze(AnalyzeArgs),
    /// Raster reflectance image of a mask.
    Image(ImageArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Sample description (TOML).
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseModel>,
    /// Visibility against the reference mirror.
    #[arg(long)]
    pub reference_visibility: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV; synthesized from the configured sample when absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Reference-mirror trace CSV.
    #[arg(long)]
    pub calibration_trace: Option<PathBuf>,
    /// single_window, or compound_waveplate:<plate1_um>:<plate2_um>.
    #[arg(long, value_parser = parse_geometry)]
    pub geometry: Option<Geometry>,
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long, value_parser = parse_noise)]
    pub noise: Option<NoiseModel>,
    #[arg(long)]
    pub reference_visibility: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Mask grid file.
    #[arg(long, conflicts_with = "bar_width")]
    pub mask: Option<PathBuf>,
    /// Generate a three-bar target with this bar width, um.
    #[arg(long)]
    pub bar_width: Option<f64>,
    /// Beam FWHM, um.
    #[arg(long)]
    pub beam: Option<f64>,
    /// Pixels per side.
    #[arg(long)]
    pub pixels: Option<usize>,
    #[arg(long, value_parser = parse_pipeline)]
    pub pipeline: Option<Pipeline>,
    /// Covering window (sample TOML).
    #[arg(long)]
    pub cover: Option<PathBuf>,
    #[arg(long)]
    pub reference_visibility: Option<f64>,
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    s.parse().map_err(|e: nloct_core::Error| e.to_string())
}

fn parse_pipeline(s: &str) -> Result<Pipeline, String> {
    s.parse().map_err(|e: nloct_core::Error| e.to_string())
}

fn parse_geometry(s: &str) -> Result<Geometry, String> {
    use nloct_core::Measured;
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        ["single_window"] => Ok(Geometry::SingleWindow { ambient_index: 1.0 }),
        ["compound_waveplate", d1, d2] => {
            let um = |v: &str| v.parse::<f64>().map_err(|e| format!("plate thickness `{v}`: {e}"));
            Ok(Geometry::CompoundWaveplate {
                plate1_um: Measured::exact(um(d1)?),
                plate2_um: Measured::exact(um(d2)?),
                ambient_index: 1.0,
            })
        }
        _ => Err(format!(
            "unknown geometry `{s}` (single_window or compound_waveplate:<um>:<um>)"
        )),
    }
}

impl Cli {
    /// Effective configuration: defaults, then the file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut o = Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            ..Overrides::default()
        };
        match &self.command {
            Command::Tune => {}
            Command::Simulate(a) => {
                o.sample = a.sample.clone();
                o.noise = a.noise;
                o.reference_visibility = a.reference_visibility;
            }
            Command::Analyze(a) => {
                o.trace = a.trace.clone();
                o.calibration_trace = a.calibration_trace.clone();
                o.geometry = a.geometry.clone();
                o.sample = a.sample.clone();
                o.noise = a.noise;
                o.reference_visibility = a.reference_visibility;
            }
            Command::Image(a) => {
                o.mask = a.mask.clone();
                o.bar_width_um = a.bar_width;
                o.beam_fwhm_um = a.beam;
                o.pixels = a.pixels;
                o.pipeline = a.pipeline;
                o.cover = a.cover.clone();
                o.reference_visibility = a.reference_visibility;
            }
        }
        config.apply(o);
        Ok(config)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.resolve()?;
    match cli.command {
        Command::Tune => commands::tune(&config).map(drop),
        Command::Simulate(_) => commands::simulate(&config).map(drop),
        Command::Analyze(_) => commands::analyze_cmd(&config).map(drop),
        Command::Image(_) => commands::image(&config).map(drop),
    }
}

/// Process exit status for an error: 2 invalid input, 3 no phase-matching
/// solution or geometry mismatch, 4 file system errors.
pub fn exit_code(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(e) = cause.downcast_ref::<nloct_core::Error>() {
            return match e {
                nloct_core::Error::NoSolution { .. } | nloct_core::Error::GeometryMismatch(_) => 3,
                nloct_core::Error::Io { .. } => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}
