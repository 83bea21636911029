//! Recovery of surface positions, visibilities and material constants from
//! a recorded interferogram.

mod envelope;
mod estimate;
mod fit;

use serde::{Deserialize, Serialize};

pub use envelope::{
    detect_envelopes, detect_envelopes_with, Calibration, DetectConfig, DetectionMode,
    LayerReport, Peak, PeakClass,
};
pub use estimate::{estimate_material, Birefringence, Geometry, MaterialEstimate};
pub use fit::{fit_fringes, fit_fringes_with, FitOptions, FringeFit};

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self {
            value,
            sigma: sigma.abs(),
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    /// sigma / |value| (0 for a zero value).
    pub fn relative(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.sigma / self.value.abs()
        }
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*} ± {:.*}", p, self.value, p, self.sigma),
            None => write!(f, "{} ± {}", self.value, self.sigma),
        }
    }
}
