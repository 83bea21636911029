use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fit::{fit_fringes_with, FitOptions};
use super::Measured;
use crate::error::Result;
use crate::forward::Interferogram;

/// Samples per sliding window of the coarse (envelope-only) detector.
const COARSE_WINDOW: usize = 9;
/// Accepted carrier offset from the nominal fringe frequency.
const CARRIER_TOLERANCE: f64 = 0.2;
/// Half-width of the band kept around the carrier, as a fraction of the
/// nominal fringe frequency. Coherence envelopes span many fringes, so
/// their spectra are narrow; a tight band keeps out most of the shot noise.
const BAND_HALF_WIDTH: f64 = 0.1;
/// Spectral magnitude (relative to DC) below which a trace counts as flat.
const FLAT_LEVEL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakClass {
    Surface,
    Echo,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMode {
    /// Fringes resolved: analytic-signal envelope and local fringe fits.
    Fine,
    /// Envelope only: sliding max-min contrast.
    Coarse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position_mm: f64,
    pub position_sigma_mm: f64,
    pub visibility: f64,
    pub visibility_sigma: f64,
    /// Fringe phase at the peak (fine mode only).
    pub phase: Option<f64>,
    /// Half width at half maximum of the demodulated envelope, mm.
    pub hwhm_mm: f64,
    pub classification: PeakClass,
    /// 1-based surface number for surfaces.
    pub surface: Option<usize>,
    /// (a, u, b) surface numbers of an echo located at z_a + z_b - z_u.
    pub echo_of: Option<(usize, usize, usize)>,
}

/// Reference-mirror calibration: |r_j| = V_j |r_ref| / V_ref.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub reference_visibility: Measured,
    pub reference_reflectivity: f64,
}

impl Calibration {
    pub fn new(reference_visibility: Measured, reference_reflectivity: f64) -> Self {
        Self {
            reference_visibility,
            reference_reflectivity,
        }
    }

    /// V_ref / |r_ref|.
    pub fn instrument_factor(&self) -> f64 {
        self.reference_visibility.value / self.reference_reflectivity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub min_visibility: f64,
    /// A peak counts as separate only if the envelope between it and every
    /// higher peak dips below this fraction of its height.
    pub prominence: f64,
    /// Fit window half-width as a fraction of the envelope HWHM. The window
    /// is also kept short of the midpoint to any neighbouring peak.
    pub fit_window_fraction: f64,
    /// Echo position tolerance in sample steps.
    pub echo_tolerance_steps: f64,
    /// Detection threshold in units of the rms envelope noise. The noise is
    /// measured from the spectrum above twice the fringe frequency, where a
    /// noiseless trace has no content.
    pub noise_factor: f64,
    /// Echo visibility and position tolerance in combined standard deviations.
    pub echo_sigma: f64,
    /// Smallest visibility tolerance of the echo rule; covers the bias of the
    /// local fit on noiseless data, where sigma vanishes.
    pub echo_visibility_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip)]
    pub fit: FitOptions,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_visibility: 0.02,
            prominence: 0.5,
            fit_window_fraction: 1.6,
            echo_tolerance_steps: 2.0,
            noise_factor: 5.0,
            echo_sigma: 3.0,
            echo_visibility_floor: 2e-3,
            calibration: None,
            fit: FitOptions::default(),
        }
    }
}

/// Detected envelope peaks of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub mode: DetectionMode,
    /// Set when a fine trace showed no carrier at the expected fringe
    /// frequency and the coarse detector was used instead.
    pub coarse_fallback: bool,
    pub warnings: Vec<String>,
    pub idler_nm: f64,
    pub step_mm: f64,
    /// Sorted by position.
    pub peaks: Vec<Peak>,
}

impl LayerReport {
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &Peak> {
        self.peaks
            .iter()
            .filter(|p| p.classification == PeakClass::Surface)
    }

    pub fn echoes(&self) -> impl Iterator<Item = &Peak> {
        self.peaks
            .iter()
            .filter(|p| p.classification == PeakClass::Echo)
    }
}

/// Envelope peaks above `min_visibility` with default settings.
pub fn detect_envelopes(trace: &Interferogram, min_visibility: f64) -> Result<LayerReport> {
    detect_envelopes_with(
        trace,
        &DetectConfig {
            min_visibility,
            ..DetectConfig::default()
        },
    )
}

/// Locates envelope maxima and measures their visibilities.
///
/// Traces sampled at lambda_i / 8 or finer are demodulated through the
/// analytic signal: the spectrum is restricted to a band around the fringe
/// carrier (negative frequencies dropped, positive ones doubled), and the
/// magnitude of the inverse transform divided by the low-passed baseline
/// is the envelope. Each peak is then measured by a local fringe fit.
/// Coarser traces, or fine traces without a carrier at the expected
/// frequency, use the sliding max-min contrast instead.
pub fn detect_envelopes_with(trace: &Interferogram, config: &DetectConfig) -> Result<LayerReport> {
    let idler_nm = trace.meta.idler_nm;
    let step = trace.step_mm();
    let mut report = LayerReport {
        mode: DetectionMode::Fine,
        coarse_fallback: false,
        warnings: Vec::new(),
        idler_nm,
        step_mm: step,
        peaks: Vec::new(),
    };

    let fine = step <= idler_nm * 1e-6 / 8.0;
    let mut noise_rms = 0.0;
    let envelope = if fine {
        match analytic_envelope(trace) {
            Demodulated::Envelope { envelope, noise } => {
                noise_rms = noise;
                Some(envelope)
            }
            Demodulated::Flat => return Ok(report),
            Demodulated::NoCarrier(found) => {
                report.coarse_fallback = true;
                report.warnings.push(format!(
                    "no fringe carrier near {:.4} cycles/mm (strongest component at {found:.4}); \
                     used coarse envelope detection",
                    1.0 / trace.fringe_period_mm()
                ));
                None
            }
        }
    } else {
        None
    };

    let (envelope, mode) = match envelope {
        Some(e) => (e, DetectionMode::Fine),
        None => (sliding_contrast(trace.intensity()), DetectionMode::Coarse),
    };
    report.mode = mode;

    let threshold = config.min_visibility.max(config.noise_factor * noise_rms);
    if threshold > config.min_visibility {
        report.warnings.push(format!(
            "detection threshold raised to {threshold:.4} by the envelope noise floor"
        ));
    }
    let positions = trace.positions();
    let vertices: Vec<(usize, f64, f64)> = pick_peaks(&envelope, threshold, config.prominence)
        .into_iter()
        .map(|i| {
            let (z, v) = parabolic_vertex(&envelope, i, positions, step);
            (i, z, v)
        })
        .collect();
    for (k, &(i, vertex, height)) in vertices.iter().enumerate() {
        // The half-maximum points lie on the steep flanks, where the
        // envelope is well defined; the top of a cusp is rounded by the
        // band limit. The vertex is kept when a flank never reaches half.
        let (position, hwhm) = match half_max_points(&envelope, i, positions) {
            Some((left, right)) => (0.5 * (left + right), 0.5 * (right - left)),
            None => (vertex, half_width(&envelope, i, step)),
        };
        let clearance = vertices
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &(_, z, _))| 0.45 * (z - vertex).abs())
            .fold(f64::INFINITY, f64::min);
        let mut peak = Peak {
            position_mm: position,
            position_sigma_mm: step / 12f64.sqrt(),
            visibility: height,
            visibility_sigma: 0.0,
            phase: None,
            hwhm_mm: hwhm,
            classification: PeakClass::Surface,
            surface: None,
            echo_of: None,
        };
        if mode == DetectionMode::Fine {
            let period = trace.fringe_period_mm();
            let options = FitOptions {
                half_width_mm: Some(
                    (config.fit_window_fraction * hwhm)
                        .min(clearance)
                        .max(1.5 * period),
                ),
                ..config.fit
            };
            match fit_fringes_with(trace, position, idler_nm, &options) {
                Ok(fit) => {
                    peak.visibility = fit.visibility;
                    peak.visibility_sigma = fit.sigma;
                    peak.phase = Some(fit.phase);
                    // Envelope slope near the peak is about V / (2 HWHM).
                    let slope = fit.visibility / (2.0 * hwhm);
                    if slope > 0.0 {
                        let from_noise = fit.sigma / slope;
                        peak.position_sigma_mm = peak.position_sigma_mm.hypot(from_noise);
                    }
                }
                Err(e) => report
                    .warnings
                    .push(format!("fringe fit at {position:.6} mm failed: {e}")),
            }
        } else if trace.meta.noise != crate::forward::NoiseModel::None {
            peak.visibility_sigma = (2.0 / trace.meta.mean_counts).sqrt();
        }
        peak.visibility = peak.visibility.clamp(0.0, 1.0);
        report.peaks.push(peak);
    }
    report
        .peaks
        .sort_by(|a, b| a.position_mm.total_cmp(&b.position_mm));
    classify(&mut report.peaks, step, config);
    Ok(report)
}

enum Demodulated {
    /// Envelope in visibility units and the rms of its noise.
    Envelope { envelope: Vec<f64>, noise: f64 },
    Flat,
    NoCarrier(f64),
}

fn analytic_envelope(trace: &Interferogram) -> Demodulated {
    let y = trace.intensity();
    let n = y.len();
    let step = trace.step_mm();
    let carrier = 1.0 / trace.fringe_period_mm();
    let df = 1.0 / (n as f64 * step);

    let mut planner = FftPlanner::new();
    let mut spectrum: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spectrum);

    let dc = spectrum[0].norm();
    let low_cut = ((0.25 * carrier / df).ceil() as usize).max(1);
    let (strongest, strength) = (low_cut..=n / 2)
        .map(|m| (m, spectrum[m].norm()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if strength <= FLAT_LEVEL * dc {
        return Demodulated::Flat;
    }
    let found = strongest as f64 * df;
    if (found - carrier).abs() > CARRIER_TOLERANCE * carrier {
        return Demodulated::NoCarrier(found);
    }

    let half_band = BAND_HALF_WIDTH * carrier / df;
    let band = (strongest as f64 - half_band, strongest as f64 + half_band);
    let low_pass = (carrier * (1.0 - CARRIER_TOLERANCE - BAND_HALF_WIDTH) / df).max(1.0);
    // White-noise power per bin from the empty region above twice the carrier;
    // the band keeps `kept` bins at double amplitude.
    let quiet = ((2.0 * carrier / df).ceil() as usize)..=n / 2;
    let noise_power = if quiet.is_empty() {
        0.0
    } else {
        let len = quiet.clone().count() as f64;
        quiet.map(|m| spectrum[m].norm_sqr()).sum::<f64>() / len
    };
    // Raised-cosine band edges: a hard cut rings around the envelope cusps
    // and moves the half-maximum points.
    let weight = |f: f64| {
        let d = ((f - strongest as f64).abs() / half_band - 0.5) / 0.5;
        if d <= 0.0 {
            1.0
        } else if d < 1.0 {
            0.5 * (1.0 + (std::f64::consts::PI * d).cos())
        } else {
            0.0
        }
    };
    let kept: f64 = (1..=n / 2)
        .map(|m| weight(m as f64).powi(2))
        .sum::<f64>()
        .max(1.0);
    let mean = dc / n as f64;
    let noise = (4.0 * kept * noise_power).sqrt() / n as f64 / mean;

    let mut analytic = vec![Complex::new(0.0, 0.0); n];
    let mut baseline = vec![Complex::new(0.0, 0.0); n];
    for m in 0..n {
        // signed frequency index
        let f = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        if f > 0.0 && f >= band.0 && f <= band.1 {
            analytic[m] = spectrum[m] * (2.0 * weight(f));
        }
        if f.abs() < low_pass {
            baseline[m] = spectrum[m];
        }
    }
    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut analytic);
    inverse.process(&mut baseline);
    let envelope = analytic
        .iter()
        .zip(&baseline)
        .map(|(a, b)| if b.re > 0.0 { a.norm() / b.re } else { 0.0 })
        .collect();
    Demodulated::Envelope { envelope, noise }
}

fn sliding_contrast(y: &[f64]) -> Vec<f64> {
    let h = COARSE_WINDOW / 2;
    (0..y.len())
        .map(|i| {
            let w = &y[i.saturating_sub(h)..(i + h + 1).min(y.len())];
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if hi + lo > 0.0 {
                (hi - lo) / (hi + lo)
            } else {
                0.0
            }
        })
        .collect()
}

/// Indices of local maxima above `threshold` that are separated from every
/// higher accepted maximum by a dip below `prominence` times their height.
fn pick_peaks(e: &[f64], threshold: f64, prominence: f64) -> Vec<usize> {
    let n = e.len();
    let mut candidates: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| e[i] >= threshold && e[i] >= e[i - 1] && e[i] > e[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| e[b].total_cmp(&e[a]).then(a.cmp(&b)));

    let mut accepted = vec![false; n];
    let mut out = Vec::new();
    for i in candidates {
        let dip = prominence * e[i];
        let isolated = |range: &mut dyn Iterator<Item = usize>| {
            for j in range {
                if e[j] < dip {
                    return true;
                }
                if accepted[j] {
                    return false;
                }
            }
            true
        };
        if isolated(&mut (0..i).rev()) && isolated(&mut (i + 1..n)) {
            accepted[i] = true;
            out.push(i);
        }
    }
    out
}

fn parabolic_vertex(e: &[f64], i: usize, positions: &[f64], step: f64) -> (f64, f64) {
    let (a, b, c) = (e[i - 1], e[i], e[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return (positions[i], b);
    }
    let offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (positions[i] + offset * step, b - 0.25 * (a - c) * offset)
}

/// Interpolated positions where the envelope first falls to half of
/// `e[i]` on either side of the maximum `i`.
fn half_max_points(e: &[f64], i: usize, positions: &[f64]) -> Option<(f64, f64)> {
    let half = 0.5 * e[i];
    let cross = |j: usize, k: usize| {
        let t = (e[j] - half) / (e[j] - e[k]);
        positions[j] + t * (positions[k] - positions[j])
    };
    let l = (0..i).rev().find(|&j| e[j] < half)?;
    let r = (i + 1..e.len()).find(|&j| e[j] < half)?;
    Some((cross(l + 1, l), cross(r - 1, r)))
}

fn half_width(e: &[f64], i: usize, step: f64) -> f64 {
    let half = 0.5 * e[i];
    let left = (0..i).rev().find(|&j| e[j] < half).map(|j| i - j);
    let right = (i + 1..e.len()).find(|&j| e[j] < half).map(|j| j - i);
    let steps = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (l + r) as f64,
        (Some(w), None) | (None, Some(w)) => w as f64,
        (None, None) => (e.len() / 2) as f64,
    };
    steps * step
}

/// Labels peaks in order of position. A peak is an echo of the path
/// (a, u, b) if it sits at z_a + z_b - z_u within the position tolerance
/// (the larger of the step tolerance and the combined position sigma) and,
/// for a = b with a calibration available, its visibility matches the
/// product rule V_a |r_u| |r_a| prod (1 - r_m^2) within the visibility
/// tolerance. A position match that fails the visibility rule is unknown;
/// everything else is the next surface.
fn classify(peaks: &mut [Peak], step: f64, config: &DetectConfig) {
    let step_tolerance = config.echo_tolerance_steps * step;
    let mut surfaces: Vec<(f64, f64, f64)> = Vec::new(); // (z, V, sigma)
    let mut position_sigma: Vec<f64> = Vec::new();
    for peak in peaks.iter_mut() {
        let z = peak.position_mm;
        let mut matched: Option<(usize, usize, usize)> = None;
        let mut rule_ok = false;
        'search: for a in 0..surfaces.len() {
            for b in a..surfaces.len() {
                for u in 0..a {
                    let predicted = surfaces[a].0 + surfaces[b].0 - surfaces[u].0;
                    let sigma = [position_sigma[a], position_sigma[b], position_sigma[u]]
                        .iter()
                        .fold(peak.position_sigma_mm, |acc, s| acc.hypot(*s));
                    let tolerance = step_tolerance.max(config.echo_sigma * sigma);
                    if (predicted - z).abs() > tolerance {
                        continue;
                    }
                    matched = Some((a + 1, u + 1, b + 1));
                    rule_ok = match (&config.calibration, a == b) {
                        (Some(cal), true) => {
                            visibility_rule(&surfaces, a, u, cal, peak, config)
                        }
                        _ => true,
                    };
                    if rule_ok {
                        break 'search;
                    }
                }
            }
        }
        match (matched, rule_ok) {
            (Some(path), true) => {
                peak.classification = PeakClass::Echo;
                peak.echo_of = Some(path);
            }
            (Some(path), false) => {
                peak.classification = PeakClass::Unknown;
                peak.echo_of = Some(path);
            }
            (None, _) => {
                surfaces.push((z, peak.visibility, peak.visibility_sigma));
                position_sigma.push(peak.position_sigma_mm);
                peak.classification = PeakClass::Surface;
                peak.surface = Some(surfaces.len());
            }
        }
    }
}

fn visibility_rule(
    surfaces: &[(f64, f64, f64)],
    a: usize,
    u: usize,
    cal: &Calibration,
    peak: &Peak,
    config: &DetectConfig,
) -> bool {
    let eta = cal.instrument_factor();
    // Peel the interfaces in order: |r_j| = V_j / (eta prod_{m<j} (1 - r_m^2)).
    let mut r = Vec::with_capacity(a + 1);
    let mut transmission = 1.0;
    for &(_, v, _) in &surfaces[..=a] {
        let rj = v / (eta * transmission);
        r.push(rj);
        transmission *= 1.0 - rj * rj;
    }
    let between: f64 = (u + 1..a).map(|m| 1.0 - r[m] * r[m]).product();
    let predicted = surfaces[a].1 * r[u] * r[a] * between;
    // First-order spread from the parent visibility dominates.
    let sigma_pred = predicted * (surfaces[a].2 / surfaces[a].1.max(f64::MIN_POSITIVE));
    let sigma = peak.visibility_sigma.hypot(sigma_pred);
    let tolerance = (config.echo_sigma * sigma).max(config.echo_visibility_floor);
    (peak.visibility - predicted).abs() <= tolerance
}
