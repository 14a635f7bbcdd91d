mod common;

use proptest::prelude::*;

use common::oracles::{self, window, T0};
use impact_core::model::EnvProperty;
use impact_core::stl::{deviation_integral, robustness, violation_fraction, StlRequirement};
use impact_core::Signal;

#[test]
fn matches_dense_riemann_oracle_on_100_signals() {
    oracles::check_stl_against_riemann();
}

fn arb_signal() -> impl Strategy<Value = Signal> {
    prop::collection::vec((1.0f64..600.0, -50.0f64..50.0), 2..20).prop_map(|pts| {
        let mut t = T0;
        let samples = pts
            .into_iter()
            .map(|(gap, v)| {
                t += gap.round();
                (t, v)
            })
            .collect();
        Signal::new(EnvProperty::Temperature, samples).unwrap()
    })
}

fn full_req(sig: &Signal, setpoint: f64, tol: f64) -> StlRequirement {
    StlRequirement::new(EnvProperty::Temperature, setpoint, window(sig.start(), sig.end()), tol).unwrap()
}

proptest! {
    #![proptest_config(common::prop_config(11))]

    #[test]
    fn robustness_non_negative(sig in arb_signal(), setpoint in -50.0f64..50.0) {
        let r = robustness(&sig, &full_req(&sig, setpoint, 0.0)).unwrap();
        prop_assert!(r >= 0.0);
        let deviates = sig.values().iter().any(|v| *v != setpoint);
        prop_assert_eq!(r == 0.0, !deviates);
    }

    #[test]
    fn constant_at_setpoint_has_zero_robustness(v in -50.0f64..50.0, len in 1.0f64..3600.0) {
        let sig = Signal::constant(EnvProperty::Temperature, T0, T0 + len.round(), v).unwrap();
        prop_assert_eq!(robustness(&sig, &full_req(&sig, v, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn integral_zero_iff_fraction_zero(sig in arb_signal(), setpoint in -50.0f64..50.0, tol in 0.0f64..30.0) {
        let req = full_req(&sig, setpoint, tol);
        let i = deviation_integral(&sig, &req).unwrap();
        let eta = violation_fraction(&sig, &req).unwrap();
        prop_assert_eq!(i == 0.0, eta == 0.0);
    }

    #[test]
    fn shifting_a_violating_signal_up_increases_integral(
        sig in arb_signal(),
        tol in 0.0f64..5.0,
        c in 0.01f64..20.0,
    ) {
        // place the setpoint so the whole signal sits at or above setpoint + tol
        let lowest = sig.values().iter().copied().fold(f64::INFINITY, f64::min);
        let setpoint = lowest - tol;
        let req = full_req(&sig, setpoint, tol);
        let shifted = Signal::new(
            EnvProperty::Temperature,
            sig.samples().map(|(t, v)| (t, v + c)).collect(),
        ).unwrap();
        prop_assert!(deviation_integral(&shifted, &req).unwrap() > deviation_integral(&sig, &req).unwrap());
    }

    #[test]
    fn doubling_deviation_doubles_integral(sig in arb_signal(), setpoint in -50.0f64..50.0) {
        let req = full_req(&sig, setpoint, 0.0);
        let doubled = Signal::new(
            EnvProperty::Temperature,
            sig.samples().map(|(t, v)| (t, setpoint + 2.0 * (v - setpoint))).collect(),
        ).unwrap();
        let (i1, i2) = (deviation_integral(&sig, &req).unwrap(), deviation_integral(&doubled, &req).unwrap());
        let (e1, e2) = (violation_fraction(&sig, &req).unwrap(), violation_fraction(&doubled, &req).unwrap());
        prop_assert!((e1 - e2).abs() <= 1e-12);
        prop_assert!((i2 - 2.0 * i1).abs() <= 1e-9 * i1.max(1.0), "{} vs {}", i2, 2.0 * i1);
    }

    #[test]
    fn fraction_in_unit_interval(sig in arb_signal(), setpoint in -50.0f64..50.0, tol in 0.0f64..30.0) {
        let eta = violation_fraction(&sig, &full_req(&sig, setpoint, tol)).unwrap();
        prop_assert!((0.0..=1.0).contains(&eta));
    }
}
