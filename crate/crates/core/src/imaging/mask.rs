use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power reflectance of a chromium film at 1550 nm.
pub const CHROME_REFLECTANCE: f64 = 0.63;
/// Power reflectance of bare glass (n = 1.5) at normal incidence.
pub const GLASS_REFLECTANCE: f64 = 0.04;

/// Rectangular grid of power reflectances. Pixel `(ix, iy)` covers
/// `[ix, ix + 1) * pitch` by `[iy, iy + 1) * pitch` in mask coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectanceMask {
    pub label: String,
    pub pitch_um: f64,
    width: usize,
    height: usize,
    /// Row-major, `values[iy * width + ix]`.
    values: Vec<f64>,
}

impl ReflectanceMask {
    pub fn new(
        label: impl Into<String>,
        width: usize,
        height: usize,
        pitch_um: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask must have at least one pixel"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "mask of {width} x {height} pixels needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if !(pitch_um > 0.0 && pitch_um.is_finite()) {
            return Err(Error::invalid("mask pitch must be positive"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange {
                quantity: "mask reflectance",
                value: *v,
                min: 0.0,
                max: 1.0,
            });
        }
        Ok(Self {
            label: label.into(),
            pitch_um,
            width,
            height,
            values,
        })
    }

    pub fn uniform(
        label: impl Into<String>,
        width: usize,
        height: usize,
        pitch_um: f64,
        reflectance: f64,
    ) -> Result<Self> {
        Self::new(label, width, height, pitch_um, vec![reflectance; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    /// Physical size (x, y), um.
    pub fn extent_um(&self) -> (f64, f64) {
        (
            self.width as f64 * self.pitch_um,
            self.height as f64 * self.pitch_um,
        )
    }
}

/// Gaussian probe spot, FWHM of the intensity profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    pub fwhm_um: f64,
}

impl BeamProfile {
    pub fn gaussian(fwhm_um: f64) -> Result<Self> {
        let beam = Self { fwhm_um };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fwhm_um > 0.0 && self.fwhm_um.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("beam FWHM must be positive"))
        }
    }

    pub fn sigma_um(&self) -> f64 {
        self.fwhm_um / (8.0 * std::f64::consts::LN_2).sqrt()
    }

    /// Half-size of the region the beam is evaluated over.
    pub fn footprint_um(&self) -> f64 {
        3.0 * self.fwhm_um
    }
}

/// Beam weight of every pixel column (or row) overlapping the footprint:
/// the exact integral of the normalised 1-D Gaussian across the pixel.
fn axis_weights(center: f64, n: usize, pitch: f64, beam: &BeamProfile) -> (usize, Vec<f64>) {
    let reach = beam.footprint_um();
    let lo = ((center - reach) / pitch).floor().max(0.0) as usize;
    let hi = (((center + reach) / pitch).ceil().max(0.0) as usize).min(n);
    if lo >= hi {
        return (0, Vec::new());
    }
    let scale = beam.sigma_um() * std::f64::consts::SQRT_2;
    let cdf = |x: f64| 0.5 * libm::erf((x - center) / scale);
    let weights = (lo..hi)
        .map(|i| cdf((i + 1) as f64 * pitch) - cdf(i as f64 * pitch))
        .collect();
    (lo, weights)
}

/// Reflectance seen by a coherent probe centred at `center_um` (x, y).
///
/// The single-mode probe averages the amplitude reflection coefficient over
/// its intensity profile: |r_eff| = sum w sqrt(R) with the Gaussian weights
/// renormalised over the part of the footprint inside the mask. Returns
/// r_eff^2.
pub fn effective_reflectance(
    mask: &ReflectanceMask,
    beam: &BeamProfile,
    center_um: (f64, f64),
) -> Result<f64> {
    beam.validate()?;
    let (x0, wx) = axis_weights(center_um.0, mask.width, mask.pitch_um, beam);
    let (y0, wy) = axis_weights(center_um.1, mask.height, mask.pitch_um, beam);
    let total: f64 = wx.iter().sum::<f64>() * wy.iter().sum::<f64>();
    if wx.is_empty() || wy.is_empty() || !(total > 0.0) {
        let (ex, ey) = mask.extent_um();
        let reach = beam.footprint_um();
        let outside = if wx.is_empty() || !(wx.iter().sum::<f64>() > 0.0) {
            ("beam centre x (um)", center_um.0, ex)
        } else {
            ("beam centre y (um)", center_um.1, ey)
        };
        return Err(Error::OutOfRange {
            quantity: outside.0,
            value: outside.1,
            min: -reach,
            max: outside.2 + reach,
        });
    }
    let mut amplitude = 0.0;
    for (j, wyj) in wy.iter().enumerate() {
        let row = &mask.values[(y0 + j) * mask.width..(y0 + j + 1) * mask.width];
        let line: f64 = wx
            .iter()
            .enumerate()
            .map(|(i, wxi)| wxi * row[x0 + i].sqrt())
            .sum();
        amplitude += wyj * line;
    }
    let r = amplitude / total;
    Ok(r * r)
}

/// Three-bar resolution target in the style of the 1951 USAF chart.
///
/// Bars run along y and repeat along x. The presets describe a negative
/// target: bare-glass bars on a chromium background, so the stripes between
/// bars are chromium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarTarget {
    pub bar_width_um: f64,
    /// Bar width over bar period.
    #[serde(default = "half")]
    pub duty_cycle: f64,
    #[serde(default = "three")]
    pub bars: usize,
    /// Defaults to five bar widths.
    #[serde(default)]
    pub bar_length_um: Option<f64>,
    /// Uniform background around the bar group.
    #[serde(default = "default_margin")]
    pub margin_um: f64,
    #[serde(default = "default_pitch")]
    pub pitch_um: f64,
    #[serde(default = "glass")]
    pub bar_reflectance: f64,
    #[serde(default = "chrome")]
    pub background_reflectance: f64,
}

fn half() -> f64 {
    0.5
}
fn three() -> usize {
    3
}
fn default_margin() -> f64 {
    200.0
}
fn default_pitch() -> f64 {
    2.0
}
fn glass() -> f64 {
    GLASS_REFLECTANCE
}
fn chrome() -> f64 {
    CHROME_REFLECTANCE
}

impl BarTarget {
    pub fn new(bar_width_um: f64) -> Self {
        Self {
            bar_width_um,
            duty_cycle: half(),
            bars: three(),
            bar_length_um: None,
            margin_um: default_margin(),
            pitch_um: default_pitch(),
            bar_reflectance: glass(),
            background_reflectance: chrome(),
        }
    }

    /// 60 um bars, the finer of the two features imaged.
    pub fn usaf_60() -> Self {
        Self::new(60.0)
    }

    /// 88 um bars.
    pub fn usaf_88() -> Self {
        Self::new(88.0)
    }

    pub fn period_um(&self) -> f64 {
        self.bar_width_um / self.duty_cycle
    }

    pub fn bar_length(&self) -> f64 {
        self.bar_length_um.unwrap_or(5.0 * self.bar_width_um)
    }

    fn group_width(&self) -> f64 {
        (self.bars - 1) as f64 * self.period_um() + self.bar_width_um
    }

    /// x positions of the bar centres, um.
    pub fn bar_centers_x(&self) -> Vec<f64> {
        let first = self.margin_um + 0.5 * self.bar_width_um;
        (0..self.bars)
            .map(|i| first + i as f64 * self.period_um())
            .collect()
    }

    /// x positions of the centres of the stripes between adjacent bars, um.
    pub fn gap_centers_x(&self) -> Vec<f64> {
        self.bar_centers_x()
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// y of the middle of the bars, um.
    pub fn center_y(&self) -> f64 {
        self.margin_um + 0.5 * self.bar_length()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.bar_width_um,
            self.pitch_um,
            self.bar_length(),
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if !positive || !(self.margin_um >= 0.0) {
            return Err(Error::invalid(
                "bar width, length and pitch must be positive, margin non-negative",
            ));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::invalid("duty cycle must lie in (0, 1]"));
        }
        if self.bars == 0 {
            return Err(Error::invalid("a bar target needs at least one bar"));
        }
        Ok(())
    }
}

/// Rasterises a bar target; a pixel takes the bar reflectance when its
/// centre lies inside a bar.
pub fn bar_target(target: &BarTarget) -> Result<ReflectanceMask> {
    target.validate()?;
    let p = target.pitch_um;
    let width = ((target.group_width() + 2.0 * target.margin_um) / p).round() as usize;
    let height = ((target.bar_length() + 2.0 * target.margin_um) / p).round() as usize;
    let half_bar = 0.5 * target.bar_width_um;
    let centers = target.bar_centers_x();
    let (y_lo, y_hi) = (target.margin_um, target.margin_um + target.bar_length());
    let mut values = Vec::with_capacity(width * height);
    for iy in 0..height {
        let y = (iy as f64 + 0.5) * p;
        for ix in 0..width {
            let x = (ix as f64 + 0.5) * p;
            let in_bar = y >= y_lo && y < y_hi && centers.iter().any(|c| (x - c).abs() < half_bar);
            values.push(if in_bar {
                target.bar_reflectance
            } else {
                target.background_reflectance
            });
        }
    }
    ReflectanceMask::new(
        format!("bars_{}um", target.bar_width_um),
        width,
        height,
        p,
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mask_gives_its_value() {
        let mask = ReflectanceMask::uniform("u", 40, 30, 5.0, 0.63).unwrap();
        let beam = BeamProfile::gaussian(50.0).unwrap();
        for c in [(100.0, 75.0), (0.0, 0.0), (210.0, 160.0)] {
            let r = effective_reflectance(&mask, &beam, c).unwrap();
            assert!((r - 0.63).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn footprint_outside_mask_is_error() {
        let mask = ReflectanceMask::uniform("u", 10, 10, 1.0, 0.5).unwrap();
        let beam = BeamProfile::gaussian(2.0).unwrap();
        assert!(matches!(
            effective_reflectance(&mask, &beam, (20.0, 5.0)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(effective_reflectance(&mask, &beam, (15.0, 5.0)).is_ok());
    }

    #[test]
    fn mask_rejects_bad_values() {
        assert!(ReflectanceMask::new("m", 2, 1, 1.0, vec![0.1, 1.2]).is_err());
        assert!(ReflectanceMask::new("m", 2, 2, 1.0, vec![0.1; 3]).is_err());
        assert!(BeamProfile::gaussian(0.0).is_err());
    }

    #[test]
    fn bar_target_layout() {
        let t = BarTarget::usaf_88();
        let mask = bar_target(&t).unwrap();
        assert_eq!(mask.width(), ((5.0 * 88.0 + 400.0) / 2.0) as usize);
        let px = |x: f64, y: f64| mask.get((x / 2.0) as usize, (y / 2.0) as usize);
        let y = t.center_y();
        for c in t.bar_centers_x() {
            assert_eq!(px(c, y), GLASS_REFLECTANCE);
        }
        for c in t.gap_centers_x() {
            assert_eq!(px(c, y), CHROME_REFLECTANCE);
        }
        assert_eq!(px(10.0, 10.0), CHROME_REFLECTANCE);
        let glass = mask.values().iter().filter(|v| **v == GLASS_REFLECTANCE).count();
        assert_eq!(glass, 3 * 44 * 220);
    }
}
