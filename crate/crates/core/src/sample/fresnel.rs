use crate::error::{Error, Result};

/// Normal-incidence amplitude reflection coefficient from medium `n1` into
/// medium `n2`. Negative when going into the denser medium.
pub fn fresnel_amplitude(n1: f64, n2: f64) -> f64 {
    (n1 - n2) / (n1 + n2)
}

/// Refractive index of the denser medium that gives power reflectance
/// `reflectance` against `ambient_index`.
pub fn invert_fresnel(reflectance: f64, ambient_index: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&reflectance) {
        return Err(Error::OutOfRange {
            quantity: "reflectance",
            value: reflectance,
            min: 0.0,
            max: 1.0,
        });
    }
    if reflectance == 1.0 {
        return Err(Error::SingularReflectance(reflectance));
    }
    let r = reflectance.sqrt();
    Ok(ambient_index * (1.0 + r) / (1.0 - r))
}

/// d n / d R of [`invert_fresnel`], used for error propagation.
pub(crate) fn invert_fresnel_slope(reflectance: f64, ambient_index: f64) -> f64 {
    let r = reflectance.sqrt().max(1e-12);
    ambient_index / (r * (1.0 - r) * (1.0 - r))
}
