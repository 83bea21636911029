//! Comparisons against values computed independently of the library:
//! closed forms, brute-force quadrature, and numbers worked out by hand
//! (high-precision arithmetic) and frozen here.

mod common;

use nloct_core::imaging::{bar_target, effective_reflectance, BarTarget, BeamProfile, ReflectanceMask};
use nloct_core::io::load_sample;
use nloct_core::phasematch::{correlation_function, sinc_squared, Spectrum};
use nloct_core::sample::{visibility_chain, Layer, SampleStack};

use common::*;

#[test]
fn sinc_squared_spectrum_transforms_to_triangle() {
    // FT of sinc^2(a W) is proportional to the triangle 1 - |t| / (2a).
    let a = 1.7;
    let half_span = 256.0 * std::f64::consts::PI / a;
    let s = Spectrum::from_fn(half_span, 1 << 17, |w| sinc_squared(a * w)).unwrap();
    let mu = correlation_function(&s);
    let mut worst: f64 = 0.0;
    for t in mu.delays().filter(|t| t.abs() < 3.0 * a) {
        let exact = (1.0 - t.abs() / (2.0 * a)).max(0.0);
        worst = worst.max((mu.at(t).unwrap() - exact).abs());
    }
    assert!(worst < 1e-3, "max error {worst}");
    assert!((mu.at(0.0).unwrap() - 1.0).abs() < 1e-6);
    assert!((mu.width_at(0.5).unwrap() - a).abs() < 2e-3 * a);
}

#[test]
fn silicon_window_chain_frozen() {
    let stack = SampleStack::new(vec![Layer::isotropic("si", 1080.0, 3.476)]);
    let list = visibility_chain(&stack, 1);
    let got: Vec<(f64, f64)> = list.echoes.iter().map(|e| (e.depth_mm, e.visibility)).collect();
    let want = [
        (0.0, 0.553_172_475_424_486),
        (3.754_08, 0.383_901_815_456_542),
        (7.508_16, 0.117_473_873_976_385),
    ];
    assert_eq!(got.len(), 3);
    for ((d, v), (wd, wv)) in got.iter().zip(want) {
        assert!((d - wd).abs() < 1e-12, "{d} vs {wd}");
        assert!((v - wv).abs() < 1e-12, "{v} vs {wv}");
    }
}

#[test]
fn calibrated_silicon_chain_frozen() {
    let list = visibility_chain(&ROWS[0].silicon(), 1);
    let want = [0.448_231_353_282_716, 0.310_973_672_232_784, 0.095_226_549_427_325];
    for (e, w) in list.echoes.iter().zip(want) {
        assert!((e.visibility - w).abs() < 1e-12, "{} vs {w}", e.visibility);
    }
}

#[test]
fn waveplate_fixture_chain_frozen() {
    let stack = load_sample(&fixture("samples/compound_waveplate.toml")).unwrap();
    let list = visibility_chain(&stack, 0);
    let want = [
        (0.0, 0.213_217_938_630_999),
        (1.440_228, 0.203_524_648_296_658),
        (1.563_228, 0.200_145_732_201_454),
        (3.052_767, 0.190_488_205_641_325),
    ];
    assert_eq!(list.echoes.len(), 4);
    for (e, (wd, wv)) in list.echoes.iter().zip(want) {
        assert!((e.depth_mm - wd).abs() < 1e-9, "{} vs {wd}", e.depth_mm);
        assert!((e.visibility - wv).abs() < 1e-12, "{} vs {wv}", e.visibility);
    }
}

/// Amplitude average of sqrt(R) over the Gaussian intensity profile by
/// the midpoint rule on a 0.5 um lattice, clipped to the mask.
fn quadrature(mask: &ReflectanceMask, fwhm: f64, (cx, cy): (f64, f64)) -> f64 {
    let h = 0.5;
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let reach = 4.0 * fwhm;
    let (ex, ey) = mask.extent_um();
    let (mut num, mut den) = (0.0, 0.0);
    let steps = (2.0 * reach / h) as i64;
    for j in 0..steps {
        let y = cy - reach + (j as f64 + 0.5) * h;
        if y < 0.0 || y >= ey {
            continue;
        }
        for i in 0..steps {
            let x = cx - reach + (i as f64 + 0.5) * h;
            if x < 0.0 || x >= ex {
                continue;
            }
            let g = (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp();
            let px = (x / mask.pitch_um) as usize;
            let py = (y / mask.pitch_um) as usize;
            num += g * mask.get(px, py).sqrt();
            den += g;
        }
    }
    (num / den).powi(2)
}

#[test]
fn beam_average_matches_quadrature() {
    let target = BarTarget::usaf_88();
    let mask = bar_target(&target).unwrap();
    let beam = BeamProfile::gaussian(50.0).unwrap();
    let bars = target.bar_centers_x();
    let y = target.center_y();
    let points = [
        (bars[0], y),
        (bars[0] + 44.0, y),
        (target.gap_centers_x()[1], y),
        (bars[2], target.margin_um + 5.0),
        (20.0, 30.0),
        (3.0, y),
    ];
    for p in points {
        let fast = effective_reflectance(&mask, &beam, p).unwrap();
        let slow = quadrature(&mask, 50.0, p);
        assert!((fast - slow).abs() < 1e-4, "at {p:?}: {fast} vs {slow}");
    }
}

#[test]
fn half_plane_edge_matches_closed_form() {
    // Left half chrome, right half glass: on the edge the beam sees equal
    // amplitude weights, so r_eff is the mean of the two amplitudes.
    let (w, h) = (400, 200);
    let values: Vec<f64> = (0..w * h)
        .map(|k| if k % w < w / 2 { 0.63 } else { 0.04 })
        .collect();
    let mask = ReflectanceMask::new("edge", w, h, 1.0, values).unwrap();
    let beam = BeamProfile::gaussian(30.0).unwrap();
    let r = effective_reflectance(&mask, &beam, (200.0, 100.0)).unwrap();
    let expected = (0.5 * (0.63f64.sqrt() + 0.2)).powi(2);
    assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
}
