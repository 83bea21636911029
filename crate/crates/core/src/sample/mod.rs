//! Layered samples: Fresnel amplitudes, optical thicknesses and the echo
//! list that feeds the interferogram synthesis.

mod chain;
mod fresnel;
mod stack;

pub use chain::{
    visibility_chain, visibility_chain_with, ChainOptions, Echo, EchoList,
    DEFAULT_VISIBILITY_FLOOR,
};
pub use fresnel::{fresnel_amplitude, invert_fresnel};
pub(crate) use fresnel::invert_fresnel_slope;
pub use stack::{optical_thickness, Layer, ProbePolarization, SampleStack};
