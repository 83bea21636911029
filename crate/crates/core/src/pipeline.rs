//! Glue between the modules: source setup, trace synthesis for a sample
//! stack, and calibrated analysis. The command-line tool and the tests
//! drive the whole chain through these functions.

use crate::error::Result;
use crate::forward::{synthesize_pass, Interferogram, ScanConfig, ScanPass};
use crate::inverse::{
    detect_envelopes_with, estimate_material, Calibration, DetectConfig, Geometry, LayerReport,
    MaterialEstimate, Measured,
};
use crate::phasematch::{
    correlation_function, solve_qpm, spdc_spectrum, CorrelationFunction, MaterialDatabase,
    QpmSolution, SpdcConfig, Spectrum, SpectrumGrid,
};
use crate::sample::{visibility_chain, EchoList, SampleStack};

/// Photon-pair source: tuned wavelengths, spectrum and correlation function.
#[derive(Debug, Clone)]
pub struct Source {
    pub config: SpdcConfig,
    pub solution: QpmSolution,
    pub grid: SpectrumGrid,
    pub spectrum: Spectrum,
    pub mu: CorrelationFunction,
}

impl Source {
    /// Tunes the source and samples its correlation function out to
    /// `delay_coverage_s`.
    pub fn new(
        config: &SpdcConfig,
        grid: SpectrumGrid,
        delay_coverage_s: f64,
        db: &MaterialDatabase,
    ) -> Result<Self> {
        let solution = solve_qpm(config, db)?;
        let grid = SpectrumGrid {
            delay_coverage_s: grid.delay_coverage_s.max(delay_coverage_s),
            ..grid
        };
        let spectrum = spdc_spectrum(config, &solution.pair, grid, db)?;
        let mu = correlation_function(&spectrum);
        Ok(Self {
            config: config.clone(),
            solution,
            grid,
            spectrum,
            mu,
        })
    }

    /// The same source with the correlation function reaching at least
    /// `delay_s`; rebuilt only when the current one falls short.
    pub fn covering(self, delay_s: f64, db: &MaterialDatabase) -> Result<Self> {
        if delay_s <= self.mu.max_delay() {
            return Ok(self);
        }
        Self::new(&self.config, self.grid, delay_s, db)
    }

    pub fn idler_nm(&self) -> f64 {
        self.solution.pair.idler_nm
    }

    /// Coherence length lambda_i^2 / FWHM of the idler, um.
    pub fn coherence_length_um(&self) -> Option<f64> {
        let fwhm = self.spectrum.fwhm_wavelength_nm(self.idler_nm())?;
        Some(self.idler_nm() * self.idler_nm() / fwhm * 1e-3)
    }
}

/// Echo list of `stack` evaluated at the source's idler wavelength.
pub fn echoes_for(stack: &SampleStack, source: &Source, max_echo_order: usize) -> Result<EchoList> {
    stack.validate()?;
    let resolved = stack.at_wavelength(source.idler_nm())?;
    Ok(visibility_chain(&resolved, max_echo_order))
}

/// Synthesizes one scan pass of `stack`, extending the source's delay
/// coverage when the scan needs it.
pub fn simulate_extending(
    stack: &SampleStack,
    source: Source,
    scan: &ScanConfig,
    pass: ScanPass,
    max_echo_order: usize,
    db: &MaterialDatabase,
) -> Result<(Interferogram, Source)> {
    let echoes = echoes_for(stack, &source, max_echo_order)?;
    let source = source.covering(scan.required_delay_s(&echoes), db)?;
    let trace = synthesize_pass(&echoes, &source.mu, &source.solution.pair, scan, pass)?;
    Ok((trace, source))
}

/// Synthesizes one scan pass of `stack`.
pub fn simulate(
    stack: &SampleStack,
    source: &Source,
    scan: &ScanConfig,
    pass: ScanPass,
    max_echo_order: usize,
) -> Result<Interferogram> {
    let echoes = echoes_for(stack, source, max_echo_order)?;
    synthesize_pass(&echoes, &source.mu, &source.solution.pair, scan, pass)
}

/// Reference visibility measured on a calibration trace: the strongest
/// detected peak.
pub fn calibrate(trace: &Interferogram, config: &DetectConfig) -> Result<Measured> {
    let report = detect_envelopes_with(trace, config)?;
    report
        .peaks
        .iter()
        .max_by(|a, b| a.visibility.total_cmp(&b.visibility))
        .map(|p| Measured::new(p.visibility, p.visibility_sigma))
        .ok_or_else(|| {
            crate::Error::GeometryMismatch(
                "calibration trace shows no reference-mirror peak".to_string(),
            )
        })
}

/// Detection followed by material estimation.
pub fn analyze(
    trace: &Interferogram,
    calibration: &Calibration,
    geometry: &Geometry,
    config: &DetectConfig,
) -> Result<(LayerReport, MaterialEstimate)> {
    let config = DetectConfig {
        calibration: Some(*calibration),
        ..config.clone()
    };
    let report = detect_envelopes_with(trace, &config)?;
    let estimate = estimate_material(&report, calibration, geometry)?;
    Ok((report, estimate))
}
