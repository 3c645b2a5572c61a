use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qkdbound_core::attack::{prepare_attack, LeakageModel, MixingParameters};
use qkdbound_core::measurement::{MeasurementSet, MeasurementSpec};
use qkdbound_core::montecarlo::{empirical_objective, simulate_rounds};
use qkdbound_core::optimize::weighted_objective;

const ROUNDS: u64 = 1_000_000;

#[test]
fn chi_squared_passes_over_seeded_runs() {
    let set = MeasurementSet::from_specs(
        2,
        &[MeasurementSpec::ZBasis, MeasurementSpec::Xz { theta: 0.9 }],
    )
    .unwrap();
    let gamma = MixingParameters::new(vec![0.3, 0.8, 0.1, 0.6]).unwrap();
    for seed in 0..10u64 {
        let model = if seed % 2 == 0 {
            LeakageModel::uniform(0.2).unwrap()
        } else {
            LeakageModel::junk_only(0.2).unwrap()
        };
        let r =
            simulate_rounds(&set, 0.6, model, std::slice::from_ref(&gamma), ROUNDS, seed).unwrap();
        assert!(
            r.chi_squared.p_value > 1e-3,
            "seed {seed}: {:?}",
            r.chi_squared
        );
    }
}

#[test]
fn empirical_objective_tracks_analytic_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for i in 0..10u64 {
        let v = rng.random_range(0.4..1.0);
        let l = rng.random_range(0.0..0.4);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let model = if rng.random_bool(0.5) {
            LeakageModel::uniform(l).unwrap()
        } else {
            LeakageModel::junk_only(l).unwrap()
        };
        let gamma = MixingParameters::new((0..4).map(|_| rng.random::<f64>()).collect()).unwrap();
        let specs = [MeasurementSpec::ZBasis, MeasurementSpec::Xz { theta }];
        let set = MeasurementSet::from_specs(2, &specs).unwrap();
        let a = prepare_attack(v, &set.select(&[0, 0]).unwrap()).unwrap();
        let exact = weighted_objective(&gamma, &a.p_ent, &a.p_sep, a.q_v, model).unwrap();
        let r = simulate_rounds(&set, v, model, &[gamma], ROUNDS, i).unwrap();
        let est = empirical_objective(&r).unwrap();
        assert!(
            (est - exact).abs() <= 0.01,
            "case {i}: empirical {est} vs analytic {exact}"
        );
    }
}

#[test]
fn ideal_statistics_give_one_bit() {
    let set =
        MeasurementSet::from_specs(2, &[MeasurementSpec::ZBasis, MeasurementSpec::ZBasis]).unwrap();
    let r = simulate_rounds(
        &set,
        1.0,
        LeakageModel::uniform(0.0).unwrap(),
        &[MixingParameters::constant(4, 0.0).unwrap()],
        ROUNDS,
        77,
    )
    .unwrap();
    assert!((empirical_objective(&r).unwrap() - 1.0).abs() <= 0.01);
}

#[test]
fn three_party_tables_match() {
    let specs = [
        MeasurementSpec::ZBasis,
        MeasurementSpec::ZBasis,
        MeasurementSpec::Xz { theta: 0.4 },
    ];
    let set = MeasurementSet::from_specs(2, &specs).unwrap();
    let gamma = MixingParameters::constant(8, 0.5).unwrap();
    let r = simulate_rounds(
        &set,
        0.5,
        LeakageModel::uniform(0.25).unwrap(),
        &[gamma],
        ROUNDS,
        5,
    )
    .unwrap();
    assert!(r.max_joint_deviation < 5e-3);
    assert!(r.max_conditional_deviation < 5e-3);
}
