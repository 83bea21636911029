//! Invariants checked over generated inputs. Run alone with
//! `cargo test -p nloct-core --test properties`.

mod common;

use std::sync::OnceLock;

use nloct_core::pipeline::Source;
use nloct_core::sample::{visibility_chain, Layer, SampleStack};
use proptest::prelude::*;

use common::*;

fn stack_strategy() -> impl Strategy<Value = SampleStack> {
    prop::collection::vec((1.0f64..4.0, 50.0f64..2000.0, 0.5f64..1.0), 1..4).prop_map(|layers| {
        SampleStack::new(
            layers
                .into_iter()
                .enumerate()
                .map(|(i, (n, d, tau))| {
                    Layer::isotropic(&format!("l{i}"), d, n).with_transmission(tau)
                })
                .collect(),
        )
    })
}

fn row_one_source() -> &'static Source {
    static SOURCE: OnceLock<Source> = OnceLock::new();
    SOURCE.get_or_init(|| ROWS[0].source())
}

proptest! {
    #[test]
    fn fresnel_inversion_round_trips(n in 1.001f64..6.0, ambient in 1.0f64..1.5) {
        prop_assume!(n > ambient * 1.001);
        prop_assert!(fresnel_round_trip_error(n, ambient) < 1e-12);
    }

    #[test]
    fn extra_loss_never_raises_an_echo(
        stack in stack_strategy(),
        pick in 0usize..3,
        factor in 0.05f64..1.0,
    ) {
        let layer = pick % stack.layers.len();
        prop_assert!(attenuation_is_monotone(&stack, layer, factor));
    }

    #[test]
    fn visibilities_stay_below_one(stack in stack_strategy()) {
        let list = visibility_chain(&stack, 3);
        prop_assert!(list.echoes.iter().all(|e| e.visibility > 0.0 && e.visibility < 1.0));
        prop_assert!(list.echoes.windows(2).all(|w| w[0].depth_mm <= w[1].depth_mm));
    }

    #[test]
    fn window_echo_orders_decay(n in 1.2f64..4.0, d in 100.0f64..3000.0) {
        let stack = SampleStack::new(vec![Layer::isotropic("w", d, n)]);
        prop_assert!(orders_decay(&stack));
    }

    #[test]
    fn fitted_visibility_ignores_scale(
        v in 0.02f64..0.95,
        phase in -3.1f64..3.1,
        factor in 0.01f64..100.0,
    ) {
        prop_assert!(rescaled_fit_change(v, phase, factor) < 1e-9);
    }

    #[test]
    fn fit_recovers_ideal_visibility(v in 0.02f64..0.95, phase in -3.1f64..3.1) {
        let trace = cosine_trace(v, phase, 500.0);
        let fit = nloct_core::inverse::fit_fringes(&trace, 0.0, 1550.0).unwrap();
        prop_assert!((fit.visibility - v).abs() < 1e-3 * v, "{} vs {v}", fit.visibility);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn poisson_counts_have_matching_mean_and_variance(
        mean in 50.0f64..2e4,
        spp in 1u32..9,
        seed in any::<u64>(),
    ) {
        let (dm, dv) = poisson_moment_errors(mean, spp, seed);
        prop_assert!(dm < 0.05 && dv < 0.05, "mean err {dm}, var err {dv}");
    }

    #[test]
    fn reruns_are_byte_identical(seed in any::<u64>()) {
        let source = row_one_source();
        let a = trace_bytes(source, seed);
        prop_assert_eq!(&a, &trace_bytes(source, seed));
        prop_assert_ne!(a, trace_bytes(source, seed.wrapping_add(1)));
    }
}
