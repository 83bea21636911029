//! Interferogram synthesis: detected signal intensity against the position of
//! the reference mirror for a list of sample echoes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasematch::{CorrelationFunction, WavelengthPair};
use crate::sample::EchoList;
use crate::SPEED_OF_LIGHT;

/// Relation between mirror displacement and fringe phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FringeConvention {
    /// Period lambda_i / 2: the mirror double-passes the light.
    #[default]
    Physical,
    /// Period lambda_i, one fringe per idler wavelength of displacement.
    SinglePass,
}

impl FringeConvention {
    /// Fringe wavenumber in rad per metre of mirror displacement.
    pub fn wavenumber(&self, idler_nm: f64) -> f64 {
        let k = 2.0 * std::f64::consts::PI / (idler_nm * 1e-9);
        match self {
            FringeConvention::Physical => 2.0 * k,
            FringeConvention::SinglePass => k,
        }
    }

    /// Fringe period in mm of mirror displacement.
    pub fn period_mm(&self, idler_nm: f64) -> f64 {
        2.0 * std::f64::consts::PI / self.wavenumber(idler_nm) * 1e3
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FringeConvention::Physical => "physical",
            FringeConvention::SinglePass => "single_pass",
        }
    }
}

impl std::str::FromStr for FringeConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Self::Physical),
            "single_pass" => Ok(Self::SinglePass),
            other => Err(Error::invalid(format!("unknown fringe convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    None,
    Poisson,
}

impl NoiseModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "poisson" => Ok(Self::Poisson),
            other => Err(Error::invalid(format!("unknown noise model `{other}`"))),
        }
    }
}

/// Coarse (envelope survey) or fine (fringe-resolving) mirror scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanPass {
    Coarse,
    Fine,
}

impl ScanPass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanPass::Coarse => "coarse",
            ScanPass::Fine => "fine",
        }
    }
}

impl std::str::FromStr for ScanPass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Self::Coarse),
            "fine" => Ok(Self::Fine),
            other => Err(Error::invalid(format!("unknown scan pass `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub z_start_mm: f64,
    pub z_end_mm: f64,
    pub coarse_step_um: f64,
    /// Fine step; `None` selects lambda_i / 20.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_step_um: Option<f64>,
    #[serde(default = "one_sample")]
    pub samples_per_point: u32,
    pub mean_counts: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub fringe_convention: FringeConvention,
    /// Mirror position of zero sample depth (the front surface), mm.
    #[serde(default)]
    pub origin_mm: f64,
}

fn one_sample() -> u32 {
    1
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            z_start_mm: -0.5,
            z_end_mm: 0.5,
            coarse_step_um: 5.0,
            fine_step_um: None,
            samples_per_point: 1,
            mean_counts: 1e4,
            noise: NoiseModel::None,
            rng_seed: 0,
            fringe_convention: FringeConvention::Physical,
            origin_mm: 0.0,
        }
    }
}

impl ScanConfig {
    /// Largest fine step that still samples the fringes adequately, um.
    pub fn max_fine_step_um(idler_nm: f64) -> f64 {
        idler_nm * 1e-3 / 20.0
    }

    pub fn fine_step_for(&self, idler_nm: f64) -> f64 {
        self.fine_step_um
            .unwrap_or_else(|| Self::max_fine_step_um(idler_nm))
    }

    pub fn validate(&self, idler_nm: f64) -> Result<()> {
        if !(self.z_start_mm < self.z_end_mm) {
            return Err(Error::invalid("scan requires z_start < z_end"));
        }
        if !(self.mean_counts > 0.0 && self.mean_counts.is_finite()) {
            return Err(Error::invalid("mean_counts must be positive"));
        }
        if self.samples_per_point == 0 {
            return Err(Error::invalid("samples_per_point must be at least 1"));
        }
        let fine = self.fine_step_for(idler_nm);
        let limit = Self::max_fine_step_um(idler_nm);
        if !(fine > 0.0) || fine > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "fine step {fine} um must lie in (0, lambda_i/20 = {limit} um]"
            )));
        }
        if !(fine < self.coarse_step_um) {
            return Err(Error::invalid("fine step must be smaller than the coarse step"));
        }
        Ok(())
    }

    pub fn step_mm(&self, pass: ScanPass, idler_nm: f64) -> f64 {
        match pass {
            ScanPass::Coarse => self.coarse_step_um * 1e-3,
            ScanPass::Fine => self.fine_step_for(idler_nm) * 1e-3,
        }
    }

    pub fn positions(&self, pass: ScanPass, idler_nm: f64) -> Vec<f64> {
        let step = self.step_mm(pass, idler_nm);
        let n = ((self.z_end_mm - self.z_start_mm) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.z_start_mm + i as f64 * step).collect()
    }

    /// Largest |dt| between any scan position and any echo, seconds.
    pub fn required_delay_s(&self, echoes: &EchoList) -> f64 {
        echoes
            .echoes
            .iter()
            .map(|e| {
                let z = self.origin_mm + e.depth_mm;
                (self.z_start_mm - z).abs().max((self.z_end_mm - z).abs())
            })
            .fold(0.0, f64::max)
            * 2e-3
            / SPEED_OF_LIGHT
    }
}

/// Provenance carried with a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub fringe_convention: FringeConvention,
    pub seed: u64,
    pub noise: NoiseModel,
    pub mean_counts: f64,
    pub pass: ScanPass,
    pub origin_mm: f64,
    /// (depth_mm, visibility, order) of every synthesized echo.
    pub echoes: Vec<(f64, f64, usize)>,
}

/// Sampled detected intensity against mirror position.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram {
    positions_mm: Vec<f64>,
    intensity: Vec<f64>,
    pub meta: TraceMeta,
}

impl Interferogram {
    pub fn new(positions_mm: Vec<f64>, intensity: Vec<f64>, meta: TraceMeta) -> Result<Self> {
        if positions_mm.len() != intensity.len() {
            return Err(Error::invalid("positions and intensity lengths differ"));
        }
        if positions_mm.len() < 2 {
            return Err(Error::invalid("trace needs at least two samples"));
        }
        if positions_mm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trace positions must be strictly increasing"));
        }
        if intensity.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("trace intensity must be finite and >= 0"));
        }
        Ok(Self {
            positions_mm,
            intensity,
            meta,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions_mm
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.positions_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_mm.is_empty()
    }

    /// Mean sample spacing, mm.
    pub fn step_mm(&self) -> f64 {
        (self.positions_mm[self.len() - 1] - self.positions_mm[0]) / (self.len() - 1) as f64
    }

    pub fn fringe_period_mm(&self) -> f64 {
        self.meta.fringe_convention.period_mm(self.meta.idler_nm)
    }

    /// Same trace with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let intensity = self.intensity.iter().map(|v| v * factor).collect();
        Self::new(self.positions_mm.clone(), intensity, self.meta.clone())
    }

    /// Index range of samples with |z - center| <= half_width.
    pub fn window(&self, center_mm: f64, half_width_mm: f64) -> std::ops::Range<usize> {
        let lo = self
            .positions_mm
            .partition_point(|&z| z < center_mm - half_width_mm);
        let hi = self
            .positions_mm
            .partition_point(|&z| z <= center_mm + half_width_mm);
        lo..hi
    }
}

/// Fine-pass interferogram (see [`synthesize_pass`]).
pub fn synthesize(
    echoes: &EchoList,
    mu: &CorrelationFunction,
    pair: &WavelengthPair,
    scan: &ScanConfig,
) -> Result<Interferogram> {
    synthesize_pass(echoes, mu, pair, scan, ScanPass::Fine)
}

/// I(z) = I0 [1 + sum_e V_e |mu(2 (z - z_e) / c)| cos(k (z - z_e) + phi_e)]
/// with I0 = `mean_counts` and z_e = origin + echo depth.
///
/// With Poisson noise each of the `samples_per_point` draws is Poisson
/// distributed around the noiseless value and the recorded sample is their
/// mean. Draws come from a ChaCha stream keyed by the seed and the pass.
pub fn synthesize_pass(
    echoes: &EchoList,
    mu: &CorrelationFunction,
    pair: &WavelengthPair,
    scan: &ScanConfig,
    pass: ScanPass,
) -> Result<Interferogram> {
    scan.validate(pair.idler_nm)?;
    let required = scan.required_delay_s(echoes);
    if required > mu.max_delay() {
        return Err(Error::CoverageInsufficient {
            required,
            available: mu.max_delay(),
        });
    }

    let k = scan.fringe_convention.wavenumber(pair.idler_nm) * 1e-3; // rad/mm
    let positions = scan.positions(pass, pair.idler_nm);
    let i0 = scan.mean_counts;
    let delay_per_mm = 2e-3 / SPEED_OF_LIGHT;
    let centers: Vec<(f64, f64, f64)> = echoes
        .echoes
        .iter()
        .map(|e| (scan.origin_mm + e.depth_mm, e.visibility, e.phase))
        .collect();

    let mut intensity: Vec<f64> = positions
        .iter()
        .map(|&z| {
            let modulation: f64 = centers
                .iter()
                .map(|&(ze, v, phi)| {
                    let dz = z - ze;
                    // Coverage was checked above, so `at` always succeeds.
                    let env = mu.at(dz * delay_per_mm).unwrap_or(0.0);
                    v * env * (k * dz + phi).cos()
                })
                .sum();
            (i0 * (1.0 + modulation)).max(0.0)
        })
        .collect();

    if scan.noise == NoiseModel::Poisson {
        let mut rng = ChaCha8Rng::seed_from_u64(scan.rng_seed);
        rng.set_stream(pass as u64);
        let n = scan.samples_per_point;
        for value in intensity.iter_mut() {
            if *value <= 0.0 {
                continue;
            }
            let dist = Poisson::new(*value)
                .map_err(|e| Error::invalid(format!("poisson mean {value}: {e}")))?;
            let total: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum();
            *value = total / n as f64;
        }
    }

    let meta = TraceMeta {
        tool_version: crate::VERSION.to_string(),
        config_hash: None,
        signal_nm: pair.signal_nm,
        idler_nm: pair.idler_nm,
        fringe_convention: scan.fringe_convention,
        seed: scan.rng_seed,
        noise: scan.noise,
        mean_counts: scan.mean_counts,
        pass,
        origin_mm: scan.origin_mm,
        echoes: echoes
            .echoes
            .iter()
            .map(|e| (e.depth_mm, e.visibility, e.order))
            .collect(),
    };
    Interferogram::new(positions, intensity, meta)
}

/// Number of fringe periods in the window used by [`fringe_visibility`].
pub const VISIBILITY_WINDOW_PERIODS: f64 = 3.0;

/// (max - min) / (max + min) over three fringe periods centred on
/// `window_center_mm`.
pub fn fringe_visibility(trace: &Interferogram, window_center_mm: f64) -> Result<f64> {
    let half = 0.5 * VISIBILITY_WINDOW_PERIODS * trace.fringe_period_mm();
    let p = trace.positions();
    let (first, last) = (p[0], p[p.len() - 1]);
    if window_center_mm - half < first || window_center_mm + half > last {
        return Err(Error::OutOfRange {
            quantity: "visibility window centre (mm)",
            value: window_center_mm,
            min: first + half,
            max: last - half,
        });
    }
    let range = trace.window(window_center_mm, half);
    let slice = &trace.intensity()[range];
    let (lo, hi) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi + lo <= 0.0 {
        return Ok(0.0);
    }
    Ok((hi - lo) / (hi + lo))
}
