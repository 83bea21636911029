//! Run configuration: one TOML file per run, overridden by command-line
//! flags. Precedence is flags > file > built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nloct_core::imaging::Pipeline;
use nloct_core::{DetectConfig, Geometry, NoiseModel, ScanConfig, SpdcConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Seed used when neither the config file nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 1543;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Not part of the config hash.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// `tune` reports every source; the other commands use the first.
    pub sources: Vec<SpdcConfig>,
    /// Half-span of the spectral grid in first-zero widths.
    pub spectrum_half_span_zeros: f64,
    pub scan: ScanConfig,
    pub sample: SampleSection,
    pub calibration: CalibrationSection,
    pub analyze: AnalyzeSection,
    pub image: ImageSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    /// Sample TOML file; the reference mirror when absent.
    pub path: Option<PathBuf>,
    pub max_echo_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    /// Instrument visibility against the reference mirror. Used to
    /// synthesize traces and, without a calibration trace, to analyze them.
    pub reference_visibility: f64,
    pub reference_sigma: f64,
    pub reference_reflectivity: f64,
    /// Measured reference-mirror trace.
    pub trace: Option<PathBuf>,
    /// Half-width of the synthesized calibration scan around z = 0, mm.
    pub window_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    /// Trace to analyze; synthesized from the sample when absent.
    pub trace: Option<PathBuf>,
    pub geometry: Geometry,
    pub detect: DetectConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    /// Mask grid file; a bar target of `bar_width_um` when absent.
    pub mask: Option<PathBuf>,
    pub bar_width_um: f64,
    pub beam_fwhm_um: f64,
    pub nx: usize,
    pub ny: usize,
    pub pipeline: Pipeline,
    /// Covering window sample file.
    pub cover: Option<PathBuf>,
    /// Half-width of the per-pixel scan of the full pipeline, mm.
    pub scan_half_width_mm: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
            sources: vec![SpdcConfig::new(532.0, 7.4, 399.0, 1.0)],
            spectrum_half_span_zeros: 32.0,
            scan: ScanConfig::default(),
            sample: SampleSection::default(),
            calibration: CalibrationSection::default(),
            analyze: AnalyzeSection::default(),
            image: ImageSection::default(),
        }
    }
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            path: None,
            max_echo_order: 1,
        }
    }
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            reference_visibility: 1.0,
            reference_sigma: 0.0,
            reference_reflectivity: 1.0,
            trace: None,
            window_mm: 0.2,
        }
    }
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            trace: None,
            geometry: Geometry::SingleWindow { ambient_index: 1.0 },
            detect: DetectConfig::default(),
        }
    }
}

impl Default for ImageSection {
    fn default() -> Self {
        Self {
            mask: None,
            bar_width_um: 88.0,
            beam_fwhm_um: 50.0,
            nx: 32,
            ny: 32,
            pipeline: Pipeline::Fast,
            cover: None,
            scan_half_width_mm: 0.25,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub sample: Option<PathBuf>,
    pub noise: Option<NoiseModel>,
    pub reference_visibility: Option<f64>,
    pub trace: Option<PathBuf>,
    pub calibration_trace: Option<PathBuf>,
    pub geometry: Option<Geometry>,
    pub mask: Option<PathBuf>,
    pub bar_width_um: Option<f64>,
    pub beam_fwhm_um: Option<f64>,
    pub pixels: Option<usize>,
    pub pipeline: Option<Pipeline>,
    pub cover: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path`. Input paths inside the file are relative to the file's
    /// directory; the output directory is relative to the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        rebase(&mut config.sample.path);
        rebase(&mut config.calibration.trace);
        rebase(&mut config.analyze.trace);
        rebase(&mut config.image.mask);
        rebase(&mut config.image.cover);
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(self.seed, o.seed);
        set!(self.output_dir, o.output_dir);
        set!(self.scan.noise, o.noise);
        set!(self.calibration.reference_visibility, o.reference_visibility);
        set!(self.analyze.geometry, o.geometry);
        set!(self.image.bar_width_um, o.bar_width_um);
        set!(self.image.beam_fwhm_um, o.beam_fwhm_um);
        set!(self.image.pipeline, o.pipeline);
        if let Some(n) = o.pixels {
            self.image.nx = n;
            self.image.ny = n;
        }
        if o.sample.is_some() {
            self.sample.path = o.sample;
        }
        if o.trace.is_some() {
            self.analyze.trace = o.trace;
        }
        if o.calibration_trace.is_some() {
            self.calibration.trace = o.calibration_trace;
        }
        if o.mask.is_some() {
            self.image.mask = o.mask;
        }
        if o.cover.is_some() {
            self.image.cover = o.cover;
        }
    }

    /// SHA-256 of the effective configuration (output directory excluded).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn source(&self) -> Result<&SpdcConfig> {
        self.sources.first().ok_or_else(|| {
            nloct_core::Error::InvalidInput("config lists no source".to_string()).into()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let config: RunConfig = toml::from_str("").unwrap();
        assert_eq!(config, RunConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let mut config: RunConfig = toml::from_str("seed = 5\n[image]\nnx = 8\n").unwrap();
        assert_eq!(config.image.ny, 32);
        config.apply(Overrides {
            seed: Some(9),
            pixels: Some(4),
            ..Overrides::default()
        });
        assert_eq!((config.seed, config.image.nx, config.image.ny), (9, 4, 4));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
    }
}
