use proptest::prelude::*;

use qkdbound_core::attack::{prepare_attack, LeakageModel};
use qkdbound_core::measurement::MeasurementSpec;
use qkdbound_core::optimize::{
    maximize_over_settings, minimize_over_gamma, SettingsSpace, DEFAULT_TOLERANCE,
};

fn j_star(v: f64, theta: f64, model: LeakageModel) -> f64 {
    let ms = [
        MeasurementSpec::ZBasis.build(2).unwrap(),
        MeasurementSpec::Xz { theta }.build(2).unwrap(),
    ];
    let refs: Vec<_> = ms.iter().collect();
    let a = prepare_attack(v, &refs).unwrap();
    minimize_over_gamma(&a.p_ent, &a.p_sep, a.q_v, model, DEFAULT_TOLERANCE)
        .unwrap()
        .objective
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn junk_leakage_never_helps_eve(v in 0.34f64..1.0, l in 0.0f64..0.6, theta in 0.0f64..3.2) {
        let junk = j_star(v, theta, LeakageModel::junk_only(l).unwrap());
        let uniform = j_star(v, theta, LeakageModel::uniform(l).unwrap());
        prop_assert!(junk >= uniform - 1e-9, "junk {junk} < uniform {uniform}");
    }

    #[test]
    fn more_leakage_never_raises_the_bound(v in 0.34f64..1.0, theta in 0.0f64..3.2) {
        let values: Vec<f64> = [0.0, 0.1, 0.2, 0.3]
            .iter()
            .map(|&l| j_star(v, theta, LeakageModel::uniform(l).unwrap()))
            .collect();
        prop_assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{values:?}");
    }
}

#[test]
fn rate_non_increasing_in_leakage_across_scenarios() {
    let cases = [
        (2, 2, SettingsSpace::Computational),
        (3, 2, SettingsSpace::Computational),
        (2, 3, SettingsSpace::XzFamily { theta1: None }),
    ];
    for (d, n, space) in cases {
        for v in [0.4, 0.55, 0.7, 0.85, 1.0] {
            let rates: Vec<f64> = [0.0, 0.1, 0.2, 0.3]
                .iter()
                .map(|&l| {
                    maximize_over_settings(d, n, v, LeakageModel::uniform(l).unwrap(), &space)
                        .unwrap()
                        .rate
                })
                .collect();
            assert!(
                rates.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "({d},{n}) v={v}: {rates:?}"
            );
        }
    }
}

#[test]
fn junk_rate_dominates_uniform_rate() {
    for v in [0.36, 0.45, 0.6, 0.8, 0.95] {
        for l in [0.1, 0.3] {
            let space = SettingsSpace::BlochGrid;
            let junk = maximize_over_settings(2, 2, v, LeakageModel::junk_only(l).unwrap(), &space)
                .unwrap();
            let uniform =
                maximize_over_settings(2, 2, v, LeakageModel::uniform(l).unwrap(), &space).unwrap();
            assert!(
                junk.rate >= uniform.rate - 1e-9,
                "v={v} L={l}: {} < {}",
                junk.rate,
                uniform.rate
            );
        }
    }
}
