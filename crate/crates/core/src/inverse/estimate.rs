use serde::{Deserialize, Serialize};

use super::envelope::{Calibration, LayerReport, Peak};
use super::Measured;
use crate::error::{Error, Result};
use crate::sample::{invert_fresnel, invert_fresnel_slope};

/// How layer spacings are turned into material constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// One plane-parallel plate: index from the front-surface reflectance,
    /// thickness from the optical spacing of the two faces.
    SingleWindow {
        #[serde(default = "one")]
        ambient_index: f64,
    },
    /// Two plates of known thickness separated by an air gap, the second
    /// one rotated by 90 degrees: n_o from the first plate, n_e from the
    /// second.
    CompoundWaveplate {
        plate1_um: Measured,
        plate2_um: Measured,
        #[serde(default = "one")]
        ambient_index: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::SingleWindow { .. } => "single_window",
            Geometry::CompoundWaveplate { .. } => "compound_waveplate",
        }
    }

    fn ambient_index(&self) -> f64 {
        match *self {
            Geometry::SingleWindow { ambient_index }
            | Geometry::CompoundWaveplate { ambient_index, .. } => ambient_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Birefringence {
    pub n_o: Measured,
    pub n_e: Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEstimate {
    pub geometry: String,
    /// Power reflectance of the front surface.
    pub reflectance: Measured,
    /// Single window: Fresnel index of the front surface. Waveplate: n_o
    /// from the first plate's optical thickness.
    pub refractive_index: Measured,
    pub thickness_um: Measured,
    /// Surface-to-surface spacings, mm.
    pub spacings_mm: Vec<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birefringence: Option<Birefringence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub air_gap_um: Option<Measured>,
    /// Measured minus predicted visibilities (name, value).
    pub residuals: Vec<(String, f64)>,
}

/// Material constants from detected surfaces and a reference calibration.
///
/// |r_1| = V_1 |r_ref| / V_ref, R = r_1^2, n from the Fresnel inversion.
/// Uncertainties are propagated to first order from the visibility and
/// position sigmas of the peaks and the calibration.
pub fn estimate_material(
    report: &LayerReport,
    calibration: &Calibration,
    geometry: &Geometry,
) -> Result<MaterialEstimate> {
    let vref = calibration.reference_visibility;
    if !(vref.value > 0.0) {
        return Err(Error::invalid("reference visibility must be positive"));
    }
    let surfaces: Vec<&Peak> = report.surfaces().collect();
    let needed: &[&str] = match geometry {
        Geometry::SingleWindow { .. } => &["front surface (#1)", "back surface (#2)"],
        Geometry::CompoundWaveplate { .. } => &[
            "plate 1 front (#1)",
            "plate 1 back (#2)",
            "plate 2 front (#3)",
            "plate 2 back (#4)",
        ],
    };
    if let Some(missing) = needed.get(surfaces.len()) {
        return Err(Error::GeometryMismatch(format!(
            "{} geometry needs {} surface peaks, found {}; missing peak: {missing}",
            geometry.name(),
            needed.len(),
            surfaces.len()
        )));
    }

    let ambient = geometry.ambient_index();
    let v1 = Measured::new(surfaces[0].visibility, surfaces[0].visibility_sigma);
    let r1 = v1.value * calibration.reference_reflectivity / vref.value;
    let rel = v1.relative().hypot(vref.relative());
    let reflectance = Measured::new(r1 * r1, 2.0 * r1 * r1 * rel);
    let n_fresnel = invert_fresnel(reflectance.value, ambient)?;
    let n_fresnel = Measured::new(
        n_fresnel,
        invert_fresnel_slope(reflectance.value, ambient) * reflectance.sigma,
    );

    let spacings: Vec<Measured> = surfaces
        .windows(2)
        .map(|w| {
            Measured::new(
                w[1].position_mm - w[0].position_mm,
                w[1].position_sigma_mm.hypot(w[0].position_sigma_mm),
            )
        })
        .collect();
    let eta = calibration.instrument_factor();

    match geometry {
        Geometry::SingleWindow { .. } => {
            let spacing = spacings[0];
            let n = n_fresnel;
            let thickness_um = Measured::new(
                spacing.value / n.value * 1e3,
                1e3 * (spacing.sigma / n.value).hypot(spacing.value * n.sigma / (n.value * n.value)),
            );
            // Back surface seen through the front one, then the first echo.
            let r = r1;
            let v2_pred = eta * r * (1.0 - r * r);
            let mut residuals = vec![(
                "back_surface_visibility".to_string(),
                surfaces[1].visibility - v2_pred,
            )];
            if let Some(echo) = report
                .echoes()
                .find(|p| p.echo_of.is_some_and(|(a, u, b)| (a, u, b) == (2, 1, 2)))
            {
                let predicted = surfaces[1].visibility * r * r;
                residuals.push(("echo_visibility".to_string(), echo.visibility - predicted));
                residuals.push((
                    "echo_spacing_mm".to_string(),
                    (echo.position_mm - surfaces[1].position_mm) - spacing.value,
                ));
            }
            Ok(MaterialEstimate {
                geometry: geometry.name().to_string(),
                reflectance,
                refractive_index: n,
                thickness_um,
                spacings_mm: spacings,
                birefringence: None,
                air_gap_um: None,
                residuals,
            })
        }
        Geometry::CompoundWaveplate {
            plate1_um,
            plate2_um,
            ..
        } => {
            let index = |s: Measured, d: &Measured| {
                let d_mm = d.value * 1e-3;
                let value = s.value / d_mm;
                Measured::new(value, value * s.relative().hypot(d.relative()))
            };
            let n_o = index(spacings[0], plate1_um);
            let n_e = index(spacings[2], plate2_um);
            let gap = spacings[1];
            let residuals = vec![(
                "fresnel_minus_spacing_index".to_string(),
                n_fresnel.value - n_o.value,
            )];
            Ok(MaterialEstimate {
                geometry: geometry.name().to_string(),
                reflectance,
                refractive_index: n_o,
                thickness_um: *plate1_um,
                spacings_mm: spacings,
                birefringence: Some(Birefringence { n_o, n_e }),
                air_gap_um: Some(Measured::new(gap.value * 1e3, gap.sigma * 1e3)),
                residuals,
            })
        }
    }
}
