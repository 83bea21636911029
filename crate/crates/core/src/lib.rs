//! Simulation and analysis of optical coherence tomography with undetected
//! infrared photons.
//!
//! A photon pair source ([`phasematch`]) produces a visible signal photon and
//! an infrared idler photon. The idler probes a layered sample ([`sample`]);
//! the interference of the signal photons, recorded against the position of
//! the reference mirror, carries the sample's reflectances and optical depths
//! ([`forward`]). The [`inverse`] module recovers those quantities from a
//! trace and [`imaging`] repeats the measurement over a lateral raster.

pub mod error;
pub mod forward;
pub mod imaging;
pub mod inverse;
pub mod io;
pub mod phasematch;
pub mod pipeline;
pub mod sample;

pub use error::{Error, Result};
pub use forward::{
    fringe_visibility, synthesize, synthesize_pass, FringeConvention, Interferogram, NoiseModel,
    ScanConfig, ScanPass, TraceMeta,
};
pub use imaging::{
    bar_target, effective_reflectance, raster_scan, BarTarget, BeamProfile, Pipeline,
    RasterConfig, ReflectanceImage, ReflectanceMask,
};
pub use inverse::{
    detect_envelopes, estimate_material, fit_fringes, Calibration, DetectConfig, FitOptions,
    FringeFit, Geometry, LayerReport, MaterialEstimate, Measured, Peak, PeakClass,
};
pub use phasematch::{
    coherence_length, correlation_function, solve_qpm, spdc_spectrum, CorrelationFunction,
    MaterialDatabase, Polarization, QpmSolution, SpdcConfig, Spectrum, SpectrumGrid,
    WavelengthPair,
};
pub use sample::{
    fresnel_amplitude, invert_fresnel, optical_thickness, visibility_chain, Echo, EchoList,
    Layer, ProbePolarization, SampleStack,
};

/// Version written into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
