//! Temperature-dependent Sellmeier dispersion models.

use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_DATABASE: &str = include_str!("../../data/materials.toml");

static BUNDLED: LazyLock<MaterialDatabase> = LazyLock::new(|| {
    MaterialDatabase::from_toml_str(BUNDLED_DATABASE).expect("bundled material database is valid")
});

/// Polarization of a field relative to the crystal optic axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "o")]
    Ordinary,
    #[serde(rename = "e")]
    Extraordinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    pub a: [f64; 6],
    pub b: [f64; 4],
}

impl SellmeierCoefficients {
    /// n^2 at wavelength `lambda_um` and temperature parameter `f`.
    fn index_squared(&self, lambda_um: f64, f: f64) -> f64 {
        let [a1, a2, a3, a4, a5, a6] = self.a;
        let [b1, b2, b3, b4] = self.b;
        let l2 = lambda_um * lambda_um;
        let uv_pole = a3 + b3 * f;
        a1 + b1 * f + (a2 + b2 * f) / (l2 - uv_pole * uv_pole) + (a4 + b4 * f) / (l2 - a5 * a5)
            - a6 * l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub wavelength_um: [f64; 2],
    pub temperature_k: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardBand {
    pub wavelength_fraction: f64,
    pub temperature_k: f64,
}

/// Polarizations of the three interacting fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub pump: Polarization,
    pub signal: Polarization,
    pub idler: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub id: String,
    pub name: String,
    pub citation: String,
    pub version: u32,
    pub t_ref_c: f64,
    pub t_offset_c: f64,
    pub interaction: Interaction,
    pub validity: Validity,
    pub guard: GuardBand,
    pub extraordinary: SellmeierCoefficients,
    pub ordinary: SellmeierCoefficients,
}

impl Material {
    /// Wavelength interval (nm) accepted by [`Material::refractive_index`],
    /// i.e. the validity window widened by the guard band.
    pub fn wavelength_limits_nm(&self) -> (f64, f64) {
        let [lo, hi] = self.validity.wavelength_um;
        let g = self.guard.wavelength_fraction;
        (lo * (1.0 - g) * 1e3, hi * (1.0 + g) * 1e3)
    }

    pub fn temperature_limits_k(&self) -> (f64, f64) {
        let [lo, hi] = self.validity.temperature_k;
        (lo - self.guard.temperature_k, hi + self.guard.temperature_k)
    }

    pub fn check_temperature(&self, temperature_k: f64) -> Result<()> {
        let (min, max) = self.temperature_limits_k();
        if !(min..=max).contains(&temperature_k) {
            return Err(Error::OutOfRange {
                quantity: "temperature (K)",
                value: temperature_k,
                min,
                max,
            });
        }
        Ok(())
    }

    pub fn refractive_index(
        &self,
        wavelength_nm: f64,
        temperature_k: f64,
        polarization: Polarization,
    ) -> Result<f64> {
        let (min, max) = self.wavelength_limits_nm();
        if !(min..=max).contains(&wavelength_nm) {
            return Err(Error::OutOfRange {
                quantity: "wavelength (nm)",
                value: wavelength_nm,
                min,
                max,
            });
        }
        self.check_temperature(temperature_k)?;
        Ok(self.index_unchecked(wavelength_nm, temperature_k, polarization))
    }

    pub(crate) fn index_unchecked(
        &self,
        wavelength_nm: f64,
        temperature_k: f64,
        polarization: Polarization,
    ) -> f64 {
        let t = temperature_k - 273.15;
        let f = (t - self.t_ref_c) * (t + self.t_offset_c);
        let coeffs = match polarization {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        };
        coeffs.index_squared(wavelength_nm * 1e-3, f).sqrt()
    }

    /// Group index n - lambda dn/dlambda by central differences.
    pub fn group_index(
        &self,
        wavelength_nm: f64,
        temperature_k: f64,
        polarization: Polarization,
    ) -> Result<f64> {
        let h = 1e-3 * wavelength_nm;
        let n = self.refractive_index(wavelength_nm, temperature_k, polarization)?;
        let up = self.refractive_index(wavelength_nm + h, temperature_k, polarization)?;
        let down = self.refractive_index(wavelength_nm - h, temperature_k, polarization)?;
        Ok(n - wavelength_nm * (up - down) / (2.0 * h))
    }

    fn validate(&self) -> Result<()> {
        let [wl_lo, wl_hi] = self.validity.wavelength_um;
        let [t_lo, t_hi] = self.validity.temperature_k;
        if !(wl_lo > 0.0 && wl_hi > wl_lo) {
            return Err(Error::invalid(format!(
                "material {}: bad wavelength validity window",
                self.id
            )));
        }
        if !(t_lo > 0.0 && t_hi > t_lo) {
            return Err(Error::invalid(format!(
                "material {}: bad temperature validity window",
                self.id
            )));
        }
        if !(0.0..1.0).contains(&self.guard.wavelength_fraction) || self.guard.temperature_k < 0.0 {
            return Err(Error::invalid(format!("material {}: bad guard band", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDatabase {
    #[serde(rename = "material")]
    pub materials: Vec<Material>,
}

impl MaterialDatabase {
    /// The database shipped with the crate.
    pub fn bundled() -> &'static MaterialDatabase {
        &BUNDLED
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let db: MaterialDatabase =
            toml::from_str(text).map_err(|e| Error::parse("material database", e))?;
        for m in &db.materials {
            m.validate()?;
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn get(&self, id: &str) -> Result<&Material> {
        self.materials
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::UnknownMaterial(id.to_string()))
    }

    pub fn refractive_index(
        &self,
        material_id: &str,
        wavelength_nm: f64,
        temperature_k: f64,
        polarization: Polarization,
    ) -> Result<f64> {
        self.get(material_id)?
            .refractive_index(wavelength_nm, temperature_k, polarization)
    }
}
