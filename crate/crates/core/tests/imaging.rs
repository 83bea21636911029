mod common;

use std::sync::OnceLock;

use nloct_core::forward::NoiseModel;
use nloct_core::imaging::{
    bar_target, raster_scan, BarTarget, BeamProfile, Pipeline, RasterConfig, ReflectanceImage,
    ReflectanceMask,
};
use nloct_core::io::load_sample;
use nloct_core::phasematch::SpectrumGrid;
use nloct_core::pipeline::Source;
use nloct_core::sample::{Layer, SampleStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn source() -> &'static Source {
    static SOURCE: OnceLock<Source> = OnceLock::new();
    SOURCE.get_or_init(|| {
        Source::new(&ROWS[0].config(), SpectrumGrid::widest(32.0), 0.0, db()).unwrap()
    })
}

fn image(
    mask: &ReflectanceMask,
    fwhm: f64,
    cover: Option<&SampleStack>,
    n: usize,
    pipeline: Pipeline,
) -> ReflectanceImage {
    let mut config = RasterConfig::covering(mask, n, n);
    config.reference_visibility = ROWS[0].reference_visibility;
    config.pipeline = pipeline;
    let beam = BeamProfile::gaussian(fwhm).unwrap();
    raster_scan(mask, &beam, cover, &config, source()).unwrap()
}

fn ar_cover(tau: f64) -> SampleStack {
    let mut layer = Layer::isotropic("cover", 1000.0, 3.478).with_transmission(tau);
    layer.ar_coated = true;
    SampleStack::new(vec![layer])
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ideal_cover_leaves_image_unchanged() {
    let mask = bar_target(&BarTarget::usaf_88()).unwrap();
    let bare = image(&mask, 50.0, None, 16, Pipeline::Fast);
    let covered = image(&mask, 50.0, Some(&ar_cover(1.0)), 16, Pipeline::Fast);
    assert!(max_abs_diff(&bare.reflectance, &covered.reflectance) < 1e-9);
    assert!(max_abs_diff(&bare.visibility, &covered.visibility) < 1e-9);

    let fixture = load_sample(&fixture("samples/ar_silicon_cover.toml")).unwrap();
    let covered = image(&mask, 50.0, Some(&fixture), 16, Pipeline::Fast);
    assert!(max_abs_diff(&bare.reflectance, &covered.reflectance) < 1e-9);
}

#[test]
fn lossy_cover_scales_visibility_by_round_trip_loss() {
    let mask = bar_target(&BarTarget::usaf_88()).unwrap();
    let tau = 0.8;
    let bare = image(&mask, 50.0, None, 12, Pipeline::Fast);
    let lossy = image(&mask, 50.0, Some(&ar_cover(tau)), 12, Pipeline::Fast);
    for (v, w) in bare.visibility.iter().zip(&lossy.visibility) {
        assert!((w - v * tau * tau).abs() < 1e-12, "{w} vs {}", v * tau * tau);
    }
    assert!(max_abs_diff(&bare.reflectance, &lossy.reflectance) < 1e-9);
    assert!((lossy.meta.cover_transmission - tau * tau).abs() < 1e-15);
}

#[test]
fn uncoated_cover_is_corrected_by_its_fresnel_loss() {
    let mask = bar_target(&BarTarget::usaf_88()).unwrap();
    let cover = SampleStack::new(vec![Layer::isotropic("si", 1000.0, 3.478)]);
    let bare = image(&mask, 50.0, None, 8, Pipeline::Fast);
    let covered = image(&mask, 50.0, Some(&cover), 8, Pipeline::Fast);
    let r = (2.478f64 / 4.478).powi(2);
    assert!((covered.meta.cover_transmission - (1.0 - r).powi(2)).abs() < 1e-12);
    assert!(max_abs_diff(&bare.reflectance, &covered.reflectance) < 1e-9);
}

#[test]
fn wider_beam_lowers_bar_contrast() {
    let target = BarTarget::usaf_88();
    let mask = bar_target(&target).unwrap();
    let contrast: Vec<f64> = [25.0, 50.0, 100.0]
        .iter()
        .map(|&fwhm| bar_contrast(&image(&mask, fwhm, None, 32, Pipeline::Fast), &target))
        .collect();
    assert!(contrast[0] > contrast[1] && contrast[1] > contrast[2], "{contrast:?}");
}

#[test]
fn finer_bars_have_lower_contrast() {
    let c = |t: BarTarget| {
        let mask = bar_target(&t).unwrap();
        bar_contrast(&image(&mask, 50.0, None, 32, Pipeline::Fast), &t)
    };
    let (c88, c60) = (c(BarTarget::usaf_88()), c(BarTarget::usaf_60()));
    assert!(c60 < c88, "60 um: {c60}, 88 um: {c88}");
}

#[test]
fn fast_and_full_pipelines_agree_on_random_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(0.02..0.9)).collect();
    let mask = ReflectanceMask::new("random", 64, 64, 4.0, values).unwrap();
    let fast = image(&mask, 30.0, None, 16, Pipeline::Fast);
    let full = image(&mask, 30.0, None, 16, Pipeline::Full);
    assert_eq!(full.missing(), 0);
    let worst = max_abs_diff(&fast.reflectance, &full.reflectance);
    assert!(worst < 1e-3, "max |fast - full| = {worst}");
}

#[test]
fn noisy_full_pipeline_is_seeded() {
    let target = BarTarget::usaf_88();
    let mask = bar_target(&target).unwrap();
    let beam = BeamProfile::gaussian(50.0).unwrap();
    let mut config = RasterConfig::covering(&mask, 6, 6);
    config.reference_visibility = 0.81;
    config.pipeline = Pipeline::Full;
    config.scan.noise = NoiseModel::Poisson;
    config.scan.mean_counts = MEAN_COUNTS;
    config.base_seed = 11;
    let a = raster_scan(&mask, &beam, None, &config, source()).unwrap();
    let b = raster_scan(&mask, &beam, None, &config, source()).unwrap();
    assert_eq!(a.reflectance, b.reflectance);
    config.base_seed = 12;
    let c = raster_scan(&mask, &beam, None, &config, source()).unwrap();
    assert_ne!(a.reflectance, c.reflectance);
    // Every pixel lands within a few reported sigmas of the noiseless value.
    let fast = image(&mask, 50.0, None, 6, Pipeline::Fast);
    for i in 0..36 {
        let z = (a.reflectance[i] - fast.reflectance[i]).abs() / a.sigma[i];
        assert!(z < 5.0, "pixel {i}: z = {z}");
    }
}

#[test]
fn raster_outside_mask_marks_pixels_missing() {
    let mask = ReflectanceMask::uniform("small", 10, 10, 2.0, 0.5).unwrap();
    let mut config = RasterConfig::covering(&mask, 4, 1);
    config.step_um = 200.0;
    config.x0_um = 10.0;
    config.y0_um = 10.0;
    let beam = BeamProfile::gaussian(5.0).unwrap();
    let img = raster_scan(&mask, &beam, None, &config, source()).unwrap();
    assert_eq!(img.missing(), 3);
    assert!((img.reflectance[0] - 0.5).abs() < 1e-12);
}
