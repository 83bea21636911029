//! Inputs shared by the benchmarks: the 1.55 um source and the silicon
//! window scan used throughout the test suites.

use nloct_core::forward::{Interferogram, NoiseModel, ScanConfig, ScanPass};
use nloct_core::phasematch::{MaterialDatabase, SpdcConfig, SpectrumGrid};
use nloct_core::pipeline::{simulate, Source};
use nloct_core::sample::{Layer, SampleStack};

pub fn source_config() -> SpdcConfig {
    SpdcConfig::new(532.0, 7.4, 399.0, 1.0)
}

/// Source whose correlation function reaches past the silicon echo.
pub fn source() -> Source {
    Source::new(
        &source_config(),
        SpectrumGrid::widest(32.0),
        1.2e-10,
        MaterialDatabase::bundled(),
    )
    .expect("bundled source tunes")
}

pub fn silicon() -> SampleStack {
    SampleStack::new(vec![Layer::isotropic("si", 1080.0, 3.478)]).with_reference_visibility(0.81)
}

pub fn silicon_scan() -> ScanConfig {
    ScanConfig {
        z_start_mm: -10.4,
        z_end_mm: -2.3,
        origin_mm: -10.1,
        noise: NoiseModel::Poisson,
        rng_seed: 1543,
        ..ScanConfig::default()
    }
}

pub fn silicon_trace(source: &Source) -> Interferogram {
    simulate(&silicon(), source, &silicon_scan(), ScanPass::Fine, 1).expect("silicon trace")
}
