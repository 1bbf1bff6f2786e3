//! Property tests through the public API.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shadowlab::observable::parse_observable;
use shadowlab::shadow::{estimate, run_multishot, simulate_estimates, PreparedObservable};
use shadowlab::variance::random_traceless;
use shadowlab::{Ensemble, Execution, Observable, QuantumState, ShadowSet};

fn ensemble_strategy() -> impl Strategy<Value = Ensemble> {
    prop_oneof![Just(Ensemble::Pauli), Just(Ensemble::Clifford), Just(Ensemble::Haar)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimates_are_linear(seed in any::<u64>(), ens in ensemble_strategy(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = QuantumState::random_mixed(2, &mut rng);
        let shadows = run_multishot(&rho, ens, 6, 3, seed, Execution::Sequential).unwrap();
        let o1 = random_traceless(4, &mut rng);
        let o2 = random_traceless(4, &mut rng);
        let combo = &o1.scale_real(a) + &o2.scale_real(b);
        let e = |o: &shadowlab::DenseOperator| estimate(&shadows, &Observable::dense(o.clone()).unwrap()).unwrap().value;
        prop_assert!((e(&combo) - a * e(&o1) - b * e(&o2)).abs() < 1e-9);
    }

    #[test]
    fn streaming_matches_stored_sets(seed in any::<u64>(), ens in ensemble_strategy(), m in 1usize..8, k in 1usize..6) {
        let rho = QuantumState::ghz_theta(3, 0.4);
        let obs = parse_observable("pauli:XYZ", 3).unwrap();
        let stored = estimate(&run_multishot(&rho, ens, m, k, seed, Execution::Parallel).unwrap(), &obs).unwrap().value;
        let streamed = simulate_estimates(&rho, ens, m, k, seed, &[PreparedObservable::new(&obs, ens).unwrap()]).unwrap()[0];
        prop_assert_eq!(stored, streamed);
    }

    #[test]
    fn file_round_trip_is_lossless(seed in any::<u64>(), ens in ensemble_strategy()) {
        let rho = QuantumState::ghz_theta(2, 1.0);
        let shadows = run_multishot(&rho, ens, 3, 4, seed, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        shadows.write_to(&mut buf).unwrap();
        let back = ShadowSet::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, shadows);
    }

    #[test]
    fn identity_estimates_one(seed in any::<u64>(), ens in prop_oneof![Just(Ensemble::Pauli), Just(Ensemble::Clifford)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = QuantumState::random_pure(3, &mut rng);
        let shadows = run_multishot(&rho, ens, 5, 2, seed, Execution::Sequential).unwrap();
        let v = estimate(&shadows, &parse_observable("pauli:III", 3).unwrap()).unwrap().value;
        prop_assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn shadow_file_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.txt");
    let shadows = run_multishot(
        &QuantumState::ghz_theta(3, 0.0),
        Ensemble::Clifford,
        4,
        2,
        9,
        Execution::Parallel,
    )
    .unwrap();
    shadows.save(&path).unwrap();
    assert_eq!(ShadowSet::load(&path).unwrap(), shadows);
    std::fs::write(&path, "shadowset v1 ensemble=pauli n=2 M=1 K=1 seed=0\nP:0,25 00\n").unwrap();
    let err = ShadowSet::load(&path).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}
