use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::spectrum::Spectrum;
use crate::error::{Error, Result};

/// Zero-padding factor applied before the transform; refines the delay grid.
const PADDING: usize = 4;

/// Normalised first-order correlation |mu(dt)| on a symmetric delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction {
    delay_step: f64,
    /// Samples at delays `(j - half) * delay_step`, `j = 0..=2*half`.
    magnitude: Vec<f64>,
    spectral_integral: f64,
    transform_at_zero: f64,
}

impl CorrelationFunction {
    /// Builds |mu| from samples centred on dt = 0 (odd length).
    pub fn from_samples(delay_step: f64, magnitude: Vec<f64>) -> Result<Self> {
        if magnitude.len() < 3 || magnitude.len() % 2 == 0 {
            return Err(Error::invalid(
                "correlation samples must have odd length centred on zero delay",
            ));
        }
        if !(delay_step > 0.0) {
            return Err(Error::invalid("delay step must be positive"));
        }
        if magnitude.iter().any(|m| !(0.0..=1.0 + 1e-9).contains(m)) {
            return Err(Error::invalid("|mu| samples must lie in [0, 1]"));
        }
        Ok(Self {
            delay_step,
            magnitude,
            spectral_integral: f64::NAN,
            transform_at_zero: f64::NAN,
        })
    }

    pub fn delay_step(&self) -> f64 {
        self.delay_step
    }

    fn half(&self) -> usize {
        self.magnitude.len() / 2
    }

    /// Largest |dt| on the grid.
    pub fn max_delay(&self) -> f64 {
        self.half() as f64 * self.delay_step
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.half() as f64;
        (0..self.magnitude.len()).map(move |j| (j as f64 - h) * self.delay_step)
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    /// Integral of the source spectrum and |FT(0)|, both in rad/s. They agree
    /// for a non-negative spectrum (NaN when built from raw samples).
    pub fn parseval_pair(&self) -> (f64, f64) {
        (self.spectral_integral, self.transform_at_zero)
    }

    /// Linear interpolation of |mu| at `delay`, `None` outside the grid.
    pub fn at(&self, delay: f64) -> Option<f64> {
        let x = delay / self.delay_step + self.half() as f64;
        if !(x >= 0.0 && x <= (self.magnitude.len() - 1) as f64) {
            return None;
        }
        let i = (x.floor() as usize).min(self.magnitude.len() - 2);
        let t = x - i as f64;
        Some(self.magnitude[i] * (1.0 - t) + self.magnitude[i + 1] * t)
    }

    /// Smallest positive delay at which |mu| drops below `level`.
    pub fn width_at(&self, level: f64) -> Option<f64> {
        let h = self.half();
        let m = &self.magnitude;
        let k = (h + 1..m.len()).find(|&j| m[j] < level)?;
        let t = (m[k - 1] - level) / (m[k - 1] - m[k]);
        Some(((k - 1 - h) as f64 + t) * self.delay_step)
    }
}

/// |mu(dt)| = |FT{S}(dt)| / |FT{S}(0)| by a zero-padded FFT.
///
/// With detuning spacing dW and transform length M the delay spacing is
/// 2*pi / (M dW) and the grid spans +-pi / dW.
pub fn correlation_function(spectrum: &Spectrum) -> CorrelationFunction {
    let n = spectrum.len();
    let m = (n * PADDING).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = spectrum
        .intensity()
        .iter()
        .map(|&s| Complex::new(s, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let d_omega = spectrum.detuning_step();
    let zero = buf[0].norm();
    let half = m / 2;
    // Negative delays come from the upper half of the FFT output.
    let magnitude = (0..=2 * half)
        .map(|j| {
            let k = (j as isize - half as isize).rem_euclid(m as isize) as usize;
            buf[k].norm() / zero
        })
        .collect();
    CorrelationFunction {
        delay_step: 2.0 * std::f64::consts::PI / (m as f64 * d_omega),
        magnitude,
        spectral_integral: spectrum.normalization(),
        transform_at_zero: zero * d_omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::spectrum::sinc_squared;

    #[test]
    fn unity_at_zero_and_even() {
        let s = Spectrum::from_fn(40.0, 2048, |w| sinc_squared(w)).unwrap();
        let mu = correlation_function(&s);
        assert!((mu.at(0.0).unwrap() - 1.0).abs() < 1e-12);
        let m = mu.magnitude();
        let last = m.len() - 1;
        for j in 0..m.len() / 2 {
            assert!((m[j] - m[last - j]).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval_pair_agrees() {
        let s = Spectrum::from_fn(40.0, 2048, |w| sinc_squared(0.7 * w)).unwrap();
        let (a, b) = correlation_function(&s).parseval_pair();
        assert!(((a - b) / a).abs() < 1e-6);
    }

    #[test]
    fn out_of_grid_is_none() {
        let s = Spectrum::from_fn(40.0, 2048, |w| sinc_squared(w)).unwrap();
        let mu = correlation_function(&s);
        assert!(mu.at(2.0 * mu.max_delay()).is_none());
        assert!(mu.at(-mu.max_delay()).is_some());
    }

    #[test]
    fn raw_samples_validated() {
        assert!(CorrelationFunction::from_samples(1.0, vec![0.5, 1.0]).is_err());
        assert!(CorrelationFunction::from_samples(1.0, vec![0.5, 1.0, 1.5]).is_err());
        let flat = CorrelationFunction::from_samples(1.0, vec![1.0; 5]).unwrap();
        assert_eq!(flat.at(1.5), Some(1.0));
        assert_eq!(flat.width_at(0.5), None);
    }
}
