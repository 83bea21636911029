use serde::{Deserialize, Serialize};

use super::fresnel::fresnel_amplitude;
use crate::error::{Error, Result};
use crate::phasematch::Polarization;

/// One homogeneous, possibly birefringent slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub label: String,
    pub thickness_um: f64,
    #[serde(rename = "n_o")]
    pub index_o: f64,
    #[serde(rename = "n_e")]
    pub index_e: f64,
    /// Single-pass amplitude transmission from absorption and scattering.
    #[serde(rename = "tau", default = "one")]
    pub amplitude_transmission: f64,
    /// Fast-axis orientation against the stack reference axis; 0 or 90.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub axis_deg: f64,
    /// Both faces anti-reflection coated (zero interface reflection).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ar_coated: bool,
    /// Optional `[wavelength_nm, n_o, n_e]` rows, linearly interpolated at
    /// the probe wavelength by [`SampleStack::at_wavelength`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<Vec<[f64; 3]>>,
}

fn one() -> f64 {
    1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Layer {
    pub fn isotropic(label: &str, thickness_um: f64, index: f64) -> Self {
        Self {
            label: label.to_string(),
            thickness_um,
            index_o: index,
            index_e: index,
            amplitude_transmission: 1.0,
            axis_deg: 0.0,
            ar_coated: false,
            dispersion: None,
        }
    }

    pub fn with_transmission(mut self, tau: f64) -> Self {
        self.amplitude_transmission = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("layer `{}`: {what}", self.label)));
        if !(self.thickness_um > 0.0 && self.thickness_um.is_finite()) {
            return bad("thickness must be > 0");
        }
        if !(self.index_o >= 1.0 && self.index_e >= 1.0) {
            return bad("refractive indices must be >= 1");
        }
        if !(self.amplitude_transmission > 0.0 && self.amplitude_transmission <= 1.0) {
            return bad("amplitude transmission must lie in (0, 1]");
        }
        if self.axis_deg.rem_euclid(90.0) != 0.0 {
            return bad("axis_deg must be a multiple of 90 (aligned or crossed plates)");
        }
        if let Some(rows) = &self.dispersion {
            if rows.is_empty() || rows.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return bad("dispersion rows must be sorted by wavelength");
            }
            if rows.iter().any(|r| r[1] < 1.0 || r[2] < 1.0) {
                return bad("dispersion indices must be >= 1");
            }
        }
        Ok(())
    }

    /// Index along the crystal axis `pol`.
    pub fn index(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Ordinary => self.index_o,
            Polarization::Extraordinary => self.index_e,
        }
    }

    /// Which crystal axis a field polarised at `field_deg` sees.
    fn axis_for(&self, field_deg: f64) -> Polarization {
        if (field_deg - self.axis_deg).rem_euclid(180.0) == 0.0 {
            Polarization::Ordinary
        } else {
            Polarization::Extraordinary
        }
    }
}

/// One-way optical thickness n * d, micrometres.
pub fn optical_thickness(layer: &Layer, polarization: Polarization) -> f64 {
    layer.index(polarization) * layer.thickness_um
}

/// Polarization of the probe (idler) beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProbePolarization {
    #[default]
    AlongFast,
    AlongSlow,
    CustomAngle(f64),
}

impl ProbePolarization {
    pub fn angle_deg(&self) -> f64 {
        match *self {
            ProbePolarization::AlongFast => 0.0,
            ProbePolarization::AlongSlow => 90.0,
            ProbePolarization::CustomAngle(a) => a,
        }
    }

    /// Eigen-components (field angle, power weight) along the stack axes.
    pub(crate) fn components(&self) -> Vec<(f64, f64)> {
        let t = self.angle_deg().to_radians();
        let (c, s) = (t.cos() * t.cos(), t.sin() * t.sin());
        [(0.0, c), (90.0, s)]
            .into_iter()
            .filter(|(_, w)| *w > 1e-15)
            .collect()
    }
}

/// Layered sample in a uniform ambient medium. An empty layer list is the
/// calibration configuration: the reference mirror alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStack {
    #[serde(default)]
    pub label: String,
    #[serde(default = "one")]
    pub ambient_index: f64,
    #[serde(default)]
    pub probe_polarization: ProbePolarization,
    /// |r_ref| of the reference mirror.
    #[serde(default = "one")]
    pub reference_reflectivity: f64,
    /// Visibility measured against the reference mirror. When set, echo
    /// visibilities are scaled by V_ref / |r_ref|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_visibility: Option<f64>,
    #[serde(default)]
    pub layers: Vec<Layer>,
}

impl SampleStack {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self {
            label: String::new(),
            ambient_index: 1.0,
            probe_polarization: ProbePolarization::AlongFast,
            reference_reflectivity: 1.0,
            reference_visibility: None,
            layers,
        }
    }

    pub fn reference_mirror() -> Self {
        Self::new(Vec::new())
    }

    pub fn with_reference_visibility(mut self, v: f64) -> Self {
        self.reference_visibility = Some(v);
        self
    }

    pub fn is_reference(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ambient_index >= 1.0) {
            return Err(Error::invalid("ambient index must be >= 1"));
        }
        if !(self.reference_reflectivity > 0.0 && self.reference_reflectivity <= 1.0) {
            return Err(Error::invalid("reference reflectivity must lie in (0, 1]"));
        }
        if let Some(v) = self.reference_visibility {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid("reference visibility must lie in (0, 1]"));
            }
        }
        self.layers.iter().try_for_each(Layer::validate)
    }

    /// Instrument factor V_ref / |r_ref| (1 without a calibration).
    pub fn instrument_factor(&self) -> f64 {
        self.reference_visibility
            .map_or(1.0, |v| v / self.reference_reflectivity)
    }

    /// Copy with every dispersive layer's indices evaluated at `wavelength_nm`.
    pub fn at_wavelength(&self, wavelength_nm: f64) -> Result<Self> {
        let mut out = self.clone();
        for layer in &mut out.layers {
            if let Some(rows) = &layer.dispersion {
                let (n_o, n_e) = interpolate_rows(rows, wavelength_nm).ok_or_else(|| {
                    Error::invalid(format!(
                        "layer `{}` has no dispersion data covering {wavelength_nm} nm",
                        layer.label
                    ))
                })?;
                layer.index_o = n_o;
                layer.index_e = n_e;
            }
        }
        Ok(out)
    }

    /// Indices of ambient, layers, ambient seen by a field at `field_deg`.
    pub(crate) fn media(&self, field_deg: f64) -> Vec<f64> {
        std::iter::once(self.ambient_index)
            .chain(self.layers.iter().map(|l| l.index(l.axis_for(field_deg))))
            .chain(std::iter::once(self.ambient_index))
            .collect()
    }

    /// Signed amplitude reflection of every interface (top to bottom) for a
    /// field at `field_deg`, seen from above.
    pub fn interface_amplitudes(&self, field_deg: f64) -> Vec<f64> {
        let media = self.media(field_deg);
        (1..media.len())
            .map(|m| {
                let coated = |i: usize| i >= 1 && i <= self.layers.len() && self.layers[i - 1].ar_coated;
                if coated(m - 1) || coated(m) {
                    0.0
                } else {
                    fresnel_amplitude(media[m - 1], media[m])
                }
            })
            .collect()
    }

    /// Amplitude transmission of the whole stack for a double pass:
    /// prod |tau|^2 * prod (1 - r^2) over every layer and interface.
    pub fn round_trip_transmission(&self, field_deg: f64) -> f64 {
        let interfaces: f64 = self
            .interface_amplitudes(field_deg)
            .iter()
            .map(|r| 1.0 - r * r)
            .product();
        let layers: f64 = self
            .layers
            .iter()
            .map(|l| l.amplitude_transmission * l.amplitude_transmission)
            .product();
        interfaces * layers
    }
}

fn interpolate_rows(rows: &[[f64; 3]], wavelength_nm: f64) -> Option<(f64, f64)> {
    if rows.len() == 1 {
        return (rows[0][0] == wavelength_nm).then_some((rows[0][1], rows[0][2]));
    }
    let k = rows.windows(2).position(|w| (w[0][0]..=w[1][0]).contains(&wavelength_nm))?;
    let (a, b) = (rows[k], rows[k + 1]);
    let t = (wavelength_nm - a[0]) / (b[0] - a[0]);
    Some((a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])))
}
