use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mask::{effective_reflectance, BeamProfile, ReflectanceMask};
use super::{ImageMeta, ReflectanceImage};
use crate::error::{Error, Result};
use crate::forward::{synthesize_pass, ScanConfig, ScanPass};
use crate::inverse::{fit_fringes_with, FitOptions, Measured};
use crate::pipeline::Source;
use crate::sample::{Echo, EchoList, SampleStack};
use crate::SPEED_OF_LIGHT;

/// How each pixel's visibility is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Visibility algebra only: V = eta * T_cover * |r_eff|.
    #[default]
    Fast,
    /// Synthesize a trace for every pixel and fit its fringes.
    Full,
}

impl Pipeline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pipeline::Fast => "fast",
            Pipeline::Full => "full",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Pipeline::Fast),
            "full" => Ok(Pipeline::Full),
            other => Err(Error::invalid(format!(
                "unknown pipeline `{other}` (expected fast or full)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub nx: usize,
    pub ny: usize,
    pub step_um: f64,
    /// Beam centre of pixel (0, 0) in mask coordinates, um.
    pub x0_um: f64,
    pub y0_um: f64,
    pub pipeline: Pipeline,
    /// Pixel `i` (row-major) uses seed `base_seed ^ i`.
    pub base_seed: u64,
    pub reference_visibility: f64,
    /// Per-pixel scan of the full pipeline. The imaged surface sits at
    /// `scan.origin_mm`.
    pub scan: ScanConfig,
}

impl RasterConfig {
    /// An `nx` x `ny` raster spread evenly over the whole mask.
    pub fn covering(mask: &ReflectanceMask, nx: usize, ny: usize) -> Self {
        let (ex, ey) = mask.extent_um();
        let step = (ex / nx.max(1) as f64).max(ey / ny.max(1) as f64);
        Self {
            nx,
            ny,
            step_um: step,
            x0_um: 0.5 * (ex - (nx.max(1) - 1) as f64 * step),
            y0_um: 0.5 * (ey - (ny.max(1) - 1) as f64 * step),
            pipeline: Pipeline::Fast,
            base_seed: 0,
            reference_visibility: 1.0,
            scan: ScanConfig {
                z_start_mm: -0.25,
                z_end_mm: 0.25,
                ..ScanConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("raster needs at least one pixel"));
        }
        if !(self.step_um > 0.0 && self.step_um.is_finite()) {
            return Err(Error::invalid("raster step must be positive"));
        }
        if !(self.reference_visibility > 0.0 && self.reference_visibility <= 1.0) {
            return Err(Error::OutOfRange {
                quantity: "reference visibility",
                value: self.reference_visibility,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(())
    }

    pub fn pixel_center_um(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x0_um + ix as f64 * self.step_um,
            self.y0_um + iy as f64 * self.step_um,
        )
    }
}

/// Round-trip power transmission of the cover, averaged over the probe's
/// polarization components. Its own reflections are outside the gate and
/// are not imaged.
pub fn cover_transmission(cover: &SampleStack, idler_nm: f64) -> Result<f64> {
    cover.validate()?;
    let cover = cover.at_wavelength(idler_nm)?;
    Ok(cover
        .probe_polarization
        .components()
        .into_iter()
        .map(|(field, weight)| weight * cover.round_trip_transmission(field))
        .sum())
}

struct FullChain<'a> {
    source: &'a Source,
    scan: &'a ScanConfig,
    fit: FitOptions,
}

impl FullChain<'_> {
    fn new<'a>(source: &'a Source, scan: &'a ScanConfig) -> Result<FullChain<'a>> {
        let hwhm_s = source
            .mu
            .width_at(0.5)
            .ok_or_else(|| Error::invalid("correlation function never falls to half"))?;
        let hwhm_mm = 0.5 * SPEED_OF_LIGHT * hwhm_s * 1e3;
        Ok(FullChain {
            source,
            scan,
            fit: FitOptions {
                half_width_mm: Some(1.6 * hwhm_mm),
                ..FitOptions::default()
            },
        })
    }

    /// Fitted visibility of a single surface of calibrated visibility `v`.
    fn measure(&self, v: f64, seed: u64) -> Result<Measured> {
        let echoes = EchoList {
            echoes: vec![Echo {
                depth_mm: 0.0,
                visibility: v,
                raw_visibility: v,
                phase: 0.0,
                order: 0,
                surface_path: vec![1],
            }],
            ..EchoList::empty()
        };
        let scan = ScanConfig {
            rng_seed: seed,
            ..self.scan.clone()
        };
        let pair = &self.source.solution.pair;
        let trace = synthesize_pass(&echoes, &self.source.mu, pair, &scan, ScanPass::Fine)?;
        let fit = fit_fringes_with(&trace, scan.origin_mm, pair.idler_nm, &self.fit)?;
        Ok(Measured::new(fit.visibility, fit.sigma))
    }
}

/// Reflectance image of `mask` seen through an optional `cover`.
///
/// Every pixel takes the beam-averaged reflectance at its centre, turns it
/// into a visibility through the calibration and the cover transmission,
/// and inverts it back; the full pipeline measures the visibility on a
/// synthesized trace. Pixels run in parallel; failures are stored as NaN.
pub fn raster_scan(
    mask: &ReflectanceMask,
    beam: &BeamProfile,
    cover: Option<&SampleStack>,
    config: &RasterConfig,
    source: &Source,
) -> Result<ReflectanceImage> {
    config.validate()?;
    beam.validate()?;
    let transmission = match cover {
        Some(c) => cover_transmission(c, source.idler_nm())?,
        None => 1.0,
    };
    if !(transmission > 0.0) {
        return Err(Error::invalid("cover transmits no light"));
    }
    let eta = config.reference_visibility;

    let chain = match config.pipeline {
        Pipeline::Fast => None,
        Pipeline::Full => Some(FullChain::new(source, &config.scan)?),
    };
    // The full pipeline calibrates on its own reference-mirror trace.
    let calibration = match &chain {
        Some(chain) => chain.measure(eta, !config.base_seed)?,
        None => Measured::exact(eta),
    };

    let n = config.nx * config.ny;
    let pixels: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|index| {
            let (ix, iy) = (index % config.nx, index / config.nx);
            let center = config.pixel_center_um(ix, iy);
            let r = match effective_reflectance(mask, beam, center) {
                Ok(big_r) => big_r.sqrt(),
                Err(e) => {
                    log::warn!("pixel ({ix}, {iy}): {e}");
                    return (f64::NAN, f64::NAN, f64::NAN);
                }
            };
            let v_true = (eta * transmission * r).min(1.0);
            let v = match &chain {
                None => Measured::exact(v_true),
                Some(chain) => match chain.measure(v_true, config.base_seed ^ index as u64) {
                    Ok(m) => m,
                    Err(e) => {
                        log::warn!("pixel ({ix}, {iy}): {e}");
                        return (f64::NAN, f64::NAN, f64::NAN);
                    }
                },
            };
            let scale = calibration.value * transmission;
            let r_hat = v.value / scale;
            let sigma_r = r_hat.abs() * v.relative().hypot(calibration.relative());
            let sigma_r = if v.value == 0.0 { v.sigma / scale } else { sigma_r };
            let sigma = (2.0 * r_hat.abs() * sigma_r).max(sigma_r * sigma_r);
            (r_hat * r_hat, sigma, v.value)
        })
        .collect();

    let missing = pixels.iter().filter(|p| p.0.is_nan()).count();
    if missing > 0 {
        log::warn!("{missing} of {n} pixels have no estimate");
    }
    let pair = &source.solution.pair;
    Ok(ReflectanceImage {
        nx: config.nx,
        ny: config.ny,
        step_um: config.step_um,
        x0_um: config.x0_um,
        y0_um: config.y0_um,
        reflectance: pixels.iter().map(|p| p.0).collect(),
        sigma: pixels.iter().map(|p| p.1).collect(),
        visibility: pixels.iter().map(|p| p.2).collect(),
        meta: ImageMeta {
            label: mask.label.clone(),
            signal_nm: pair.signal_nm,
            idler_nm: pair.idler_nm,
            beam_fwhm_um: beam.fwhm_um,
            pipeline: config.pipeline,
            base_seed: config.base_seed,
            reference_visibility: eta,
            calibration_visibility: calibration.value,
            cover_label: cover.map(|c| c.label.clone()),
            cover_transmission: transmission,
        },
    })
}
