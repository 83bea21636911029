//! Lateral reflectance imaging: a probe spot is stepped across a
//! reflectance mask and every position is reduced to one reflectance value.

mod mask;
mod raster;

use serde::{Deserialize, Serialize};

use crate::inverse::Measured;

pub use mask::{
    bar_target, effective_reflectance, BarTarget, BeamProfile, ReflectanceMask,
    CHROME_REFLECTANCE, GLASS_REFLECTANCE,
};
pub use raster::{cover_transmission, raster_scan, Pipeline, RasterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub label: String,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub beam_fwhm_um: f64,
    pub pipeline: Pipeline,
    pub base_seed: u64,
    pub reference_visibility: f64,
    /// Reference visibility as measured by the pipeline itself.
    pub calibration_visibility: f64,
    pub cover_label: Option<String>,
    pub cover_transmission: f64,
}

/// Estimated reflectance per raster position, row-major. Missing estimates
/// are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectanceImage {
    pub nx: usize,
    pub ny: usize,
    pub step_um: f64,
    pub x0_um: f64,
    pub y0_um: f64,
    pub reflectance: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Measured (full) or predicted (fast) visibility.
    pub visibility: Vec<f64>,
    pub meta: ImageMeta,
}

impl ReflectanceImage {
    pub fn get(&self, ix: usize, iy: usize) -> Option<Measured> {
        let i = iy * self.nx + ix;
        let r = self.reflectance[i];
        (!r.is_nan()).then(|| Measured::new(r, self.sigma[i]))
    }

    pub fn position_um(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x0_um + ix as f64 * self.step_um,
            self.y0_um + iy as f64 * self.step_um,
        )
    }

    /// Pixel nearest to a point in mask coordinates, if inside the raster.
    pub fn nearest(&self, x_um: f64, y_um: f64) -> Option<(usize, usize)> {
        let ix = ((x_um - self.x0_um) / self.step_um).round();
        let iy = ((y_um - self.y0_um) / self.step_um).round();
        let inside = |v: f64, n: usize| v >= 0.0 && v < n as f64;
        (inside(ix, self.nx) && inside(iy, self.ny)).then_some((ix as usize, iy as usize))
    }

    pub fn missing(&self) -> usize {
        self.reflectance.iter().filter(|r| r.is_nan()).count()
    }
}
