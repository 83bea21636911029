use serde::{Deserialize, Serialize};

use super::material::{Material, MaterialDatabase};
use crate::error::{Error, Result};

/// Signal search window (nm) for the collinear solver.
pub const SIGNAL_WINDOW_NM: (f64, f64) = (540.0, 1000.0);
const SCAN_STEP_NM: f64 = 1.0;
const BISECTION_TOLERANCE_NM: f64 = 1e-4;

/// Crystal and pump configuration of the photon-pair source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdcConfig {
    pub pump_wavelength_nm: f64,
    pub poling_period_um: f64,
    pub temperature_k: f64,
    pub crystal_length_mm: f64,
    #[serde(default = "default_material")]
    pub material_id: String,
}

fn default_material() -> String {
    "mgo_cln".to_string()
}

impl SpdcConfig {
    pub fn new(
        pump_wavelength_nm: f64,
        poling_period_um: f64,
        temperature_k: f64,
        crystal_length_mm: f64,
    ) -> Self {
        Self {
            pump_wavelength_nm,
            poling_period_um,
            temperature_k,
            crystal_length_mm,
            material_id: default_material(),
        }
    }

    pub fn validate(&self, db: &MaterialDatabase) -> Result<()> {
        for (name, v) in [
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("poling_period_um", self.poling_period_um),
            ("crystal_length_mm", self.crystal_length_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        db.get(&self.material_id)?
            .check_temperature(self.temperature_k)
    }

    /// Grating wavevector 2*pi/Lambda in rad/m.
    pub fn grating_wavevector(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.poling_period_um * 1e-6)
    }
}

/// Signal (detected, visible) and idler (probe, infrared) vacuum wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthPair {
    pub signal_nm: f64,
    pub idler_nm: f64,
}

impl WavelengthPair {
    /// Pair completed by energy conservation from the pump and signal.
    pub fn from_signal(pump_nm: f64, signal_nm: f64) -> Result<Self> {
        if !(signal_nm > pump_nm) {
            return Err(Error::invalid(format!(
                "signal {signal_nm} nm must be longer than pump {pump_nm} nm"
            )));
        }
        let idler_nm = 1.0 / (1.0 / pump_nm - 1.0 / signal_nm);
        Self::new(signal_nm, idler_nm)
    }

    pub fn new(signal_nm: f64, idler_nm: f64) -> Result<Self> {
        if !(signal_nm > 0.0 && idler_nm > 0.0) {
            return Err(Error::invalid("wavelengths must be positive"));
        }
        if signal_nm >= idler_nm {
            return Err(Error::invalid(format!(
                "signal ({signal_nm} nm) must be shorter than idler ({idler_nm} nm)"
            )));
        }
        Ok(Self {
            signal_nm,
            idler_nm,
        })
    }

    pub fn pump_nm(&self) -> f64 {
        1.0 / (1.0 / self.signal_nm + 1.0 / self.idler_nm)
    }

    /// Relative violation of 1/pump = 1/signal + 1/idler.
    pub fn energy_residual(&self, pump_nm: f64) -> f64 {
        let lhs = 1.0 / pump_nm;
        ((1.0 / self.signal_nm + 1.0 / self.idler_nm) - lhs).abs() / lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpmSolution {
    pub pair: WavelengthPair,
    /// Residual wavevector mismatch at the returned pair, rad/m.
    pub delta_k: f64,
    /// Number of sign changes found in the search window. Values above one
    /// mean the returned (shortest-signal) root is not unique.
    pub roots_found: usize,
}

/// First-order collinear mismatch k_p - k_s - k_i - 2*pi/Lambda in rad/m.
pub fn phase_mismatch(
    material: &Material,
    config: &SpdcConfig,
    signal_nm: f64,
    idler_nm: f64,
) -> Result<f64> {
    let t = config.temperature_k;
    let pol = material.interaction;
    let np = material.refractive_index(config.pump_wavelength_nm, t, pol.pump)?;
    let ns = material.refractive_index(signal_nm, t, pol.signal)?;
    let ni = material.refractive_index(idler_nm, t, pol.idler)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let k = two_pi * (np / config.pump_wavelength_nm - ns / signal_nm - ni / idler_nm) * 1e9;
    Ok(k - config.grating_wavevector())
}

fn mismatch_at_signal(material: &Material, config: &SpdcConfig, signal_nm: f64) -> Option<f64> {
    let pair = WavelengthPair::from_signal(config.pump_wavelength_nm, signal_nm).ok()?;
    phase_mismatch(material, config, pair.signal_nm, pair.idler_nm).ok()
}

/// Solve the quasi-phase-matching condition for the signal/idler pair.
///
/// The signal window is scanned on a 1 nm grid; points where any of the three
/// wavelengths falls outside the dispersion model's range are skipped, so a
/// bracket is only formed between two evaluable neighbours. Each bracket is
/// refined by bisection. When several roots exist, the one with the shortest
/// signal wavelength is returned and a warning is logged.
pub fn solve_qpm(config: &SpdcConfig, db: &MaterialDatabase) -> Result<QpmSolution> {
    config.validate(db)?;
    let material = db.get(&config.material_id)?;
    let (lo, hi) = SIGNAL_WINDOW_NM;
    let steps = ((hi - lo) / SCAN_STEP_NM).round() as usize;

    let samples: Vec<(f64, Option<f64>)> = (0..=steps)
        .map(|i| {
            let s = lo + i as f64 * SCAN_STEP_NM;
            (s, mismatch_at_signal(material, config, s))
        })
        .collect();

    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((s0, Some(d0)), (s1, Some(d1))) = (w[0], w[1]) else {
            continue;
        };
        if d0 == 0.0 {
            roots.push(s0);
        } else if d0.signum() != d1.signum() && d1 != 0.0 {
            roots.push(bisect(material, config, s0, s1, d0));
        }
    }
    if let Some(&(s_last, Some(d_last))) = samples.last() {
        if d_last == 0.0 {
            roots.push(s_last);
        }
    }

    let Some(&signal_nm) = roots.first() else {
        let first = samples.iter().find_map(|(_, d)| *d).unwrap_or(f64::NAN);
        let last = samples.iter().rev().find_map(|(_, d)| *d).unwrap_or(f64::NAN);
        return Err(Error::NoSolution {
            window_nm: SIGNAL_WINDOW_NM,
            dk_low: first,
            dk_high: last,
        });
    };
    if roots.len() > 1 {
        log::warn!(
            "{} phase-matching roots in the signal window ({:?} nm); returning the shortest signal",
            roots.len(),
            roots
        );
    }

    let pair = WavelengthPair::from_signal(config.pump_wavelength_nm, signal_nm)?;
    let delta_k = phase_mismatch(material, config, pair.signal_nm, pair.idler_nm)?;
    Ok(QpmSolution {
        pair,
        delta_k,
        roots_found: roots.len(),
    })
}

fn bisect(material: &Material, config: &SpdcConfig, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > BISECTION_TOLERANCE_NM {
        let m = 0.5 * (a + b);
        // Both ends were evaluable and the model is smooth in between.
        let fm = mismatch_at_signal(material, config, m).unwrap_or(fa);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Coherence length lambda^2 / delta-lambda, same length unit as the inputs.
pub fn coherence_length(center_wavelength: f64, fwhm_bandwidth: f64) -> Result<f64> {
    if !(center_wavelength > 0.0 && fwhm_bandwidth > 0.0) {
        return Err(Error::invalid(
            "coherence length needs positive wavelength and bandwidth",
        ));
    }
    Ok(center_wavelength * center_wavelength / fwhm_bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> &'static MaterialDatabase {
        MaterialDatabase::bundled()
    }

    #[test]
    fn table_row_one_solution() {
        let sol = solve_qpm(&SpdcConfig::new(532.0, 7.4, 399.0, 1.0), db()).unwrap();
        assert!((sol.pair.signal_nm - 812.2).abs() < 15.0, "{:?}", sol.pair);
        assert!(sol.pair.energy_residual(532.0) < 1e-9);
        let gv = SpdcConfig::new(532.0, 7.4, 399.0, 1.0).grating_wavevector();
        assert!(sol.delta_k.abs() < 1e-3 * gv);
        assert_eq!(sol.roots_found, 1);
    }

    #[test]
    fn table_pairs_conserve_energy_to_four_figures() {
        let p = WavelengthPair::new(812.2, 1543.0).unwrap();
        assert!(p.energy_residual(532.0) < 3e-4);
    }

    #[test]
    fn absurd_period_has_no_solution() {
        let err = solve_qpm(&SpdcConfig::new(532.0, 0.1, 399.0, 1.0), db()).unwrap_err();
        match err {
            Error::NoSolution { dk_low, dk_high, .. } => {
                assert!(dk_low.is_finite() && dk_high.is_finite());
                assert_eq!(dk_low.signum(), dk_high.signum());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(solve_qpm(&SpdcConfig::new(-1.0, 7.4, 399.0, 1.0), db()).is_err());
        assert!(matches!(
            solve_qpm(&SpdcConfig::new(532.0, 7.4, 900.0, 1.0), db()),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn pair_ordering_enforced() {
        assert!(WavelengthPair::new(1600.0, 800.0).is_err());
    }

    #[test]
    fn coherence_length_values() {
        let l = coherence_length(1543.0, 29.0).unwrap();
        assert!((l / 1000.0 - 82.1).abs() < 0.05);
        let l = coherence_length(3011.0, 43.0).unwrap();
        assert!((l / 1000.0 - 210.8).abs() < 0.05);
        assert_eq!(coherence_length(700.0, 700.0).unwrap(), 700.0);
        assert!(coherence_length(0.0, 1.0).is_err());
    }
}
