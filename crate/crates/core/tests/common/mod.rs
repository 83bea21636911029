#![allow(dead_code)]

use std::path::PathBuf;

use nloct_core::forward::{synthesize_pass, Interferogram, NoiseModel, ScanConfig, ScanPass, TraceMeta};
use nloct_core::inverse::fit_fringes;
use nloct_core::phasematch::{CorrelationFunction, MaterialDatabase, SpdcConfig, SpectrumGrid, WavelengthPair};
use nloct_core::pipeline::Source;
use nloct_core::sample::{fresnel_amplitude, invert_fresnel, visibility_chain, EchoList, Layer, SampleStack};

/// One source configuration together with the published measurements made
/// with it.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub pump_nm: f64,
    pub period_um: f64,
    pub temperature_k: f64,
    pub reference_visibility: f64,
    pub expected_signal_nm: f64,
    pub expected_idler_nm: f64,
    pub expected_idler_fwhm_nm: f64,
    pub expected_coherence_um: f64,
    /// Tolerance on the solved wavelengths, nm.
    pub wavelength_tol_nm: f64,
    /// Silicon index used as ground truth.
    pub silicon_index: f64,
    /// Quoted measurement uncertainties of R and n.
    pub r_uncertainty: f64,
    pub n_uncertainty: f64,
}

pub const ROWS: [Row; 4] = [
    Row {
        pump_nm: 532.0,
        period_um: 7.4,
        temperature_k: 399.0,
        reference_visibility: 0.81,
        expected_signal_nm: 812.2,
        expected_idler_nm: 1543.0,
        expected_idler_fwhm_nm: 29.0,
        expected_coherence_um: 80.0,
        wavelength_tol_nm: 15.0,
        silicon_index: 3.478,
        r_uncertainty: 0.003,
        n_uncertainty: 0.014,
    },
    Row {
        pump_nm: 532.0,
        period_um: 8.36,
        temperature_k: 465.0,
        reference_visibility: 0.33,
        expected_signal_nm: 707.9,
        expected_idler_nm: 2140.0,
        expected_idler_fwhm_nm: 24.5,
        expected_coherence_um: 185.0,
        wavelength_tol_nm: 15.0,
        silicon_index: 3.448,
        r_uncertainty: 0.010,
        n_uncertainty: 0.025,
    },
    Row {
        pump_nm: 488.0,
        period_um: 7.4,
        temperature_k: 399.0,
        reference_visibility: 0.20,
        expected_signal_nm: 606.1,
        expected_idler_nm: 2504.0,
        expected_idler_fwhm_nm: 35.0,
        expected_coherence_um: 184.0,
        wavelength_tol_nm: 25.0,
        silicon_index: 3.440,
        r_uncertainty: 0.015,
        n_uncertainty: 0.16,
    },
    Row {
        pump_nm: 488.0,
        period_um: 8.03,
        temperature_k: 465.0,
        reference_visibility: 0.20,
        expected_signal_nm: 582.4,
        expected_idler_nm: 3011.0,
        expected_idler_fwhm_nm: 43.0,
        expected_coherence_um: 211.0,
        wavelength_tol_nm: 25.0,
        silicon_index: 3.433,
        r_uncertainty: 0.015,
        n_uncertainty: 0.16,
    },
];

/// Silicon window thickness, um.
pub const SILICON_UM: f64 = 1080.0;
/// Mirror position of the window's front surface, mm.
pub const SILICON_ORIGIN_MM: f64 = -10.1;
pub const MEAN_COUNTS: f64 = 1e4;
/// Poisson draws averaged per recorded sample in the noisy runs.
pub const SAMPLES_PER_POINT: u32 = 8;

impl Row {
    pub fn config(&self) -> SpdcConfig {
        SpdcConfig::new(self.pump_nm, self.period_um, self.temperature_k, 1.0)
    }

    /// Source whose correlation function covers the silicon scan.
    pub fn source(&self) -> Source {
        Source::new(&self.config(), SpectrumGrid::widest(32.0), 1.2e-10, db()).unwrap()
    }

    pub fn silicon(&self) -> SampleStack {
        SampleStack::new(vec![Layer::isotropic("si", SILICON_UM, self.silicon_index)])
            .with_reference_visibility(self.reference_visibility)
    }

    pub fn mirror(&self) -> SampleStack {
        SampleStack::reference_mirror().with_reference_visibility(self.reference_visibility)
    }

    pub fn silicon_reflectance(&self) -> f64 {
        let r = fresnel_amplitude(1.0, self.silicon_index);
        r * r
    }
}

pub fn db() -> &'static MaterialDatabase {
    MaterialDatabase::bundled()
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// Scan from just before the front surface to past the first echo.
pub fn silicon_scan(noise: NoiseModel, seed: u64) -> ScanConfig {
    ScanConfig {
        z_start_mm: -10.4,
        z_end_mm: -2.3,
        origin_mm: SILICON_ORIGIN_MM,
        noise,
        rng_seed: seed,
        mean_counts: MEAN_COUNTS,
        samples_per_point: SAMPLES_PER_POINT,
        ..ScanConfig::default()
    }
}

/// Short scan around the reference mirror.
pub fn calibration_scan(noise: NoiseModel, seed: u64) -> ScanConfig {
    ScanConfig {
        z_start_mm: -0.2,
        z_end_mm: 0.2,
        origin_mm: 0.0,
        ..silicon_scan(noise, seed)
    }
}

// Invariant checks shared by the property suites and the acceptance run.

/// |n - invert(fresnel(n))| / n.
pub fn fresnel_round_trip_error(index: f64, ambient: f64) -> f64 {
    let r = fresnel_amplitude(ambient, index);
    let back = invert_fresnel(r * r, ambient).unwrap();
    (back - index).abs() / index
}

/// Lowering the transmission of one layer never raises an echo that a
/// single path produces: every surface echo, and every echo of a single
/// window. Paths of equal optical length add coherently, so a merged echo
/// may grow when loss weakens a cancelling partner; those are not compared.
pub fn attenuation_is_monotone(stack: &SampleStack, layer: usize, factor: f64) -> bool {
    let order = if stack.layers.len() == 1 { 3 } else { 0 };
    let before = visibility_chain(stack, order);
    let mut lossy = stack.clone();
    lossy.layers[layer].amplitude_transmission *= factor;
    let after = visibility_chain(&lossy, order);
    let bounded = after.echoes.iter().all(|e| {
        before
            .echoes
            .iter()
            .find(|b| b.surface_path == e.surface_path)
            .is_some_and(|b| e.visibility <= b.visibility * (1.0 + 1e-12))
    });
    bounded && after.echoes.len() <= before.echoes.len()
}

/// Every echo of a lossless window is weaker than the one it repeats.
pub fn orders_decay(stack: &SampleStack) -> bool {
    let list = visibility_chain(stack, 3);
    list.echoes.windows(2).all(|w| w[1].visibility <= w[0].visibility * (1.0 + 1e-12))
}

/// Ideal fringe trace I0 [1 + V |mu| cos(k (z - c) + phi)] with a
/// triangular envelope, sampled at lambda / 20.
pub fn cosine_trace(visibility: f64, phase: f64, i0: f64) -> Interferogram {
    let idler_nm = 1550.0;
    let period_mm = idler_nm * 1e-6 / 2.0;
    let step = idler_nm * 1e-6 / 20.0;
    let k = 2.0 * std::f64::consts::PI / period_mm;
    let half_env = 0.09;
    let z: Vec<f64> = (0..=2580).map(|i| -0.1 + i as f64 * step).collect();
    let intensity = z
        .iter()
        .map(|&z| {
            let env = (1.0 - z.abs() / half_env).max(0.0);
            i0 * (1.0 + visibility * env * (k * z + phase).cos())
        })
        .collect();
    Interferogram::new(z, intensity, meta(idler_nm)).unwrap()
}

pub fn meta(idler_nm: f64) -> TraceMeta {
    let pair = WavelengthPair::from_signal(532.0, 1.0 / (1.0 / 532.0 - 1.0 / idler_nm)).unwrap();
    TraceMeta {
        tool_version: nloct_core::VERSION.to_string(),
        config_hash: None,
        signal_nm: pair.signal_nm,
        idler_nm,
        fringe_convention: Default::default(),
        seed: 0,
        noise: NoiseModel::None,
        mean_counts: 1.0,
        pass: ScanPass::Fine,
        origin_mm: 0.0,
        echoes: Vec::new(),
    }
}

/// Relative change of the fitted visibility when the trace is rescaled.
pub fn rescaled_fit_change(visibility: f64, phase: f64, factor: f64) -> f64 {
    let trace = cosine_trace(visibility, phase, 1000.0);
    let a = fit_fringes(&trace, 0.0, 1550.0).unwrap().visibility;
    let b = fit_fringes(&trace.scaled(factor).unwrap(), 0.0, 1550.0)
        .unwrap()
        .visibility;
    (a - b).abs() / a
}

/// Flat trace of `points` samples at `mean` counts with Poisson noise.
pub fn flat_noisy_trace(mean: f64, samples_per_point: u32, seed: u64, points: usize) -> Interferogram {
    let pair = WavelengthPair::new(810.0, 1550.0).unwrap();
    let mu = CorrelationFunction::from_samples(1e-15, vec![0.0, 1.0, 0.0]).unwrap();
    let step_um = 5.0;
    let scan = ScanConfig {
        z_start_mm: 0.0,
        z_end_mm: (points - 1) as f64 * step_um * 1e-3,
        coarse_step_um: step_um,
        mean_counts: mean,
        noise: NoiseModel::Poisson,
        samples_per_point,
        rng_seed: seed,
        ..ScanConfig::default()
    };
    synthesize_pass(&EchoList::empty(), &mu, &pair, &scan, ScanPass::Coarse).unwrap()
}

/// Relative errors of the sample mean and variance against a Poisson mean
/// of `mean` averaged over `samples_per_point` draws.
pub fn poisson_moment_errors(mean: f64, samples_per_point: u32, seed: u64) -> (f64, f64) {
    let trace = flat_noisy_trace(mean, samples_per_point, seed, 20_000);
    let x = trace.intensity();
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    let expected_var = mean / samples_per_point as f64;
    ((m - mean).abs() / mean, (var - expected_var).abs() / expected_var)
}

/// Trace CSV bytes of a noisy silicon-style synthesis.
pub fn trace_bytes(source: &Source, seed: u64) -> Vec<u8> {
    let stack = ROWS[0].silicon();
    let scan = ScanConfig {
        z_start_mm: -10.2,
        z_end_mm: -10.0,
        ..silicon_scan(NoiseModel::Poisson, seed)
    };
    let trace = nloct_core::pipeline::simulate(&stack, source, &scan, ScanPass::Fine, 1).unwrap();
    let mut bytes = Vec::new();
    nloct_core::io::write_trace(&trace, &mut bytes).unwrap();
    bytes
}

// Imaging measurements shared by the imaging tests and the acceptance run.

use nloct_core::imaging::{BarTarget, ReflectanceImage};

/// Pixels of the image row through the middle of the bars whose centres
/// fall inside [lo, hi) in x.
fn row_values(image: &ReflectanceImage, target: &BarTarget, lo: f64, hi: f64) -> Vec<f64> {
    let (_, iy) = image.nearest(image.x0_um, target.center_y()).unwrap();
    (0..image.nx)
        .filter(|&ix| {
            let x = image.position_um(ix, iy).0;
            x >= lo && x < hi
        })
        .map(|ix| image.get(ix, iy).unwrap().value)
        .collect()
}

/// (R_stripe - R_bar) / (R_stripe + R_bar): the darkest pixel of each bar
/// against the brightest pixel of each chromium stripe between bars,
/// averaged over bars and stripes.
pub fn bar_contrast(image: &ReflectanceImage, target: &BarTarget) -> f64 {
    let w = target.bar_width_um;
    let gap = target.period_um() - w;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let bars = mean(
        target
            .bar_centers_x()
            .iter()
            .map(|c| row_values(image, target, c - w / 2.0, c + w / 2.0).into_iter().fold(f64::INFINITY, f64::min))
            .collect(),
    );
    let stripes = mean(
        target
            .gap_centers_x()
            .iter()
            .map(|c| row_values(image, target, c - gap / 2.0, c + gap / 2.0).into_iter().fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    );
    (stripes - bars) / (stripes + bars)
}

/// Mean reflectance of pixels at least `clearance_um` away from the bar
/// group.
pub fn plateau(image: &ReflectanceImage, target: &BarTarget, clearance_um: f64) -> (f64, usize) {
    let centers = target.bar_centers_x();
    let x_lo = centers[0] - target.bar_width_um / 2.0 - clearance_um;
    let x_hi = centers[centers.len() - 1] + target.bar_width_um / 2.0 + clearance_um;
    let y_lo = target.margin_um - clearance_um;
    let y_hi = target.margin_um + target.bar_length() + clearance_um;
    let mut values = Vec::new();
    for iy in 0..image.ny {
        for ix in 0..image.nx {
            let (x, y) = image.position_um(ix, iy);
            if x < x_lo || x > x_hi || y < y_lo || y > y_hi {
                values.push(image.get(ix, iy).unwrap().value);
            }
        }
    }
    (values.iter().sum::<f64>() / values.len() as f64, values.len())
}
