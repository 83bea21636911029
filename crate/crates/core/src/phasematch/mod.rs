//! Quasi-phase-matched photon-pair source: dispersion, tuning, spectrum and
//! first-order correlation function.

mod correlation;
mod material;
mod qpm;
mod spectrum;

pub use correlation::{correlation_function, CorrelationFunction};
pub use material::{
    GuardBand, Interaction, Material, MaterialDatabase, Polarization, SellmeierCoefficients,
    Validity,
};
pub use qpm::{
    coherence_length, phase_mismatch, solve_qpm, QpmSolution, SpdcConfig, WavelengthPair,
    SIGNAL_WINDOW_NM,
};
pub use spectrum::{
    first_zero_detuning, sinc_squared, spdc_spectrum, Spectrum, SpectrumGrid,
    MIN_GRID_POINTS, MIN_HALF_SPAN_ZEROS,
};
