use serde::{Deserialize, Serialize};

use super::material::MaterialDatabase;
use super::qpm::{phase_mismatch, SpdcConfig, WavelengthPair};
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Smallest accepted half-span, in first-zero widths. Below this the
/// sampled window would not contain the first zeros of the sinc^2 lobe.
pub const MIN_HALF_SPAN_ZEROS: f64 = 1.5;
pub const MIN_GRID_POINTS: usize = 1024;

/// Sampling of the detuning axis for [`spdc_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub points: usize,
    /// Half-span of the detuning axis in units of the first-zero width of
    /// the sinc^2 lobe (linear-mismatch estimate).
    pub half_span_zeros: f64,
    /// Largest |dt| the derived correlation function must cover, seconds.
    /// The point count is raised to the next power of two when needed.
    pub delay_coverage_s: f64,
    /// Shrink the half-span, if needed, so every detuned wavelength stays
    /// inside the dispersion model's accepted range instead of failing.
    #[serde(default)]
    pub clip_to_model: bool,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            points: 4096,
            half_span_zeros: 8.0,
            delay_coverage_s: 0.0,
            clip_to_model: false,
        }
    }
}

impl SpectrumGrid {
    /// Grid reaching `half_span_zeros` first-zero widths or the edge of the
    /// dispersion model, whichever is closer. A wide span keeps the cusp of
    /// the correlation envelope sharp.
    pub fn widest(half_span_zeros: f64) -> Self {
        Self {
            half_span_zeros,
            clip_to_model: true,
            ..Self::default()
        }
    }
}

/// Sampled SPDC intensity spectrum S(Omega) on a uniform detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    detuning_start: f64,
    detuning_step: f64,
    intensity: Vec<f64>,
    normalization: f64,
}

impl Spectrum {
    /// Builds a spectrum from samples at `start + i * step` (rad/s).
    ///
    /// The samples must be finite and non-negative, and the grid must reach
    /// at least five FWHM on each side of the spectral peak.
    pub fn new(detuning_start: f64, detuning_step: f64, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() < 8 {
            return Err(Error::invalid("spectrum needs at least 8 samples"));
        }
        if !(detuning_step > 0.0 && detuning_step.is_finite() && detuning_start.is_finite()) {
            return Err(Error::invalid("spectrum grid must be strictly increasing"));
        }
        if intensity.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("spectral intensity must be finite and >= 0"));
        }
        let normalization = intensity.iter().sum::<f64>() * detuning_step;
        if normalization <= 0.0 {
            return Err(Error::invalid("spectrum is identically zero"));
        }
        let s = Self {
            detuning_start,
            detuning_step,
            intensity,
            normalization,
        };
        let fwhm = s
            .fwhm()
            .ok_or_else(|| Error::invalid("spectrum never falls to half maximum inside its grid"))?;
        let peak = s.detuning(s.peak_index());
        let (lo, hi) = (s.detuning(0), s.detuning(s.len() - 1));
        if peak - lo < 5.0 * fwhm || hi - peak < 5.0 * fwhm {
            return Err(Error::GridTooNarrow {
                span_zeros: (hi - lo) / (2.0 * fwhm),
                required: 5.0,
            });
        }
        Ok(s)
    }

    /// Samples `f` on `points` detunings `(j - points/2) * step`.
    pub fn from_fn(half_span: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let step = 2.0 * half_span / points as f64;
        let start = -((points / 2) as f64) * step;
        let values = (0..points).map(|j| f(start + j as f64 * step)).collect();
        Self::new(start, step, values)
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn detuning(&self, i: usize) -> f64 {
        self.detuning_start + i as f64 * self.detuning_step
    }

    pub fn detuning_step(&self) -> f64 {
        self.detuning_step
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.detuning(i))
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    /// Integral of S over the grid (rectangle rule), rad/s.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    fn peak_index(&self) -> usize {
        self.intensity
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0
    }

    /// Full width at half maximum of the central lobe, rad/s.
    pub fn fwhm(&self) -> Option<f64> {
        let p = self.peak_index();
        let half = 0.5 * self.intensity[p];
        let y = &self.intensity;
        let right = (p + 1..y.len()).find(|&i| y[i] < half)?;
        let left = (0..p).rev().find(|&i| y[i] < half)?;
        let cross = |a: usize, b: usize| {
            let t = (half - y[a]) / (y[b] - y[a]);
            self.detuning(a) + t * (self.detuning(b) - self.detuning(a))
        };
        Some(cross(right - 1, right) - cross(left + 1, left))
    }

    /// FWHM expressed as a wavelength bandwidth around `center_nm`.
    pub fn fwhm_wavelength_nm(&self, center_nm: f64) -> Option<f64> {
        let lambda = center_nm * 1e-9;
        self.fwhm()
            .map(|dw| lambda * lambda * dw / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT) * 1e9)
    }
}

/// Detuning (rad/s) at which the linearised mismatch reaches 2*pi/L, i.e.
/// the first zero of sinc^2(dk L / 2).
pub fn first_zero_detuning(
    config: &SpdcConfig,
    pair: &WavelengthPair,
    db: &MaterialDatabase,
) -> Result<f64> {
    let m = db.get(&config.material_id)?;
    let ng_s = m.group_index(pair.signal_nm, config.temperature_k, m.interaction.signal)?;
    let ng_i = m.group_index(pair.idler_nm, config.temperature_k, m.interaction.idler)?;
    let dn = (ng_s - ng_i).abs();
    if dn < 1e-9 {
        return Err(Error::invalid(
            "signal and idler group indices coincide; spectrum width is not bounded at first order",
        ));
    }
    let length_m = config.crystal_length_mm * 1e-3;
    Ok(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (length_m * dn))
}

/// SPDC spectrum sinc^2(dk(Omega) L / 2) with the full dispersion model.
///
/// The signal is detuned by +Omega and the idler by -Omega at fixed pump
/// frequency; every detuned wavelength must stay inside the material's
/// dispersion window.
pub fn spdc_spectrum(
    config: &SpdcConfig,
    pair: &WavelengthPair,
    grid: SpectrumGrid,
    db: &MaterialDatabase,
) -> Result<Spectrum> {
    config.validate(db)?;
    if grid.points < MIN_GRID_POINTS {
        return Err(Error::invalid(format!(
            "spectrum grid needs at least {MIN_GRID_POINTS} points, got {}",
            grid.points
        )));
    }
    if !(grid.half_span_zeros >= MIN_HALF_SPAN_ZEROS) {
        return Err(Error::GridTooNarrow {
            span_zeros: grid.half_span_zeros,
            required: MIN_HALF_SPAN_ZEROS,
        });
    }
    let material = db.get(&config.material_id)?;
    let zero = first_zero_detuning(config, pair, db)?;
    let two_pi_c = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT;
    let omega_s = two_pi_c / (pair.signal_nm * 1e-9);
    let omega_i = two_pi_c / (pair.idler_nm * 1e-9);

    let mut half_span = grid.half_span_zeros * zero;
    if grid.clip_to_model {
        let (lo_nm, hi_nm) = material.wavelength_limits_nm();
        let (w_lo, w_hi) = (two_pi_c / (hi_nm * 1e-9), two_pi_c / (lo_nm * 1e-9));
        // signal at omega_s + W, idler at omega_i - W, both inside [w_lo, w_hi]
        let limit = (omega_i - w_lo)
            .min(w_hi - omega_s)
            .min(omega_s - w_lo)
            .min(w_hi - omega_i);
        half_span = half_span.min(limit * (1.0 - 1e-6));
        if half_span < MIN_HALF_SPAN_ZEROS * zero {
            return Err(Error::GridTooNarrow {
                span_zeros: half_span / zero,
                required: MIN_HALF_SPAN_ZEROS,
            });
        }
    }

    let mut points = grid.points;
    if grid.delay_coverage_s > 0.0 {
        // delay range of the transform is +-pi / d_omega
        let needed = (2.0 * half_span * grid.delay_coverage_s / std::f64::consts::PI).ceil() as usize;
        if needed > points {
            points = needed.next_power_of_two();
        }
    }

    let half_length = 0.5 * config.crystal_length_mm * 1e-3;

    let step = 2.0 * half_span / points as f64;
    let start = -((points / 2) as f64) * step;
    let mut values = Vec::with_capacity(points);
    for j in 0..points {
        let omega = start + j as f64 * step;
        if omega_i - omega <= 0.0 {
            return Err(Error::invalid("detuning exceeds the idler frequency"));
        }
        let signal_nm = two_pi_c / (omega_s + omega) * 1e9;
        let idler_nm = two_pi_c / (omega_i - omega) * 1e9;
        let dk = phase_mismatch(material, config, signal_nm, idler_nm)?;
        values.push(sinc_squared(dk * half_length));
    }
    Spectrum::new(start, step, values)
}

pub fn sinc_squared(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}
