use cascade_boot::bootstrap::{cascade, cascade_onto, sample_sequence, SamplingStrategy};
use cascade_boot::delta::{brute_force_permuted, contract, covariance_closed_form, diffusive_network, IndexVar};
use cascade_boot::ensembles::{generate_pool, EnsembleSpec, MatrixPool, Regime, RngStream};
use cascade_boot::estimator::{pearson_rho, predict_variance};
use cascade_boot::permutations::*;
use proptest::prelude::*;

fn permutation(max_n: usize) -> impl Strategy<Value = Permutation> {
    (1..=max_n)
        .prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        .prop_map(|v| Permutation::from_map(v).unwrap())
}

proptest! {
    #[test]
    fn sigma_invariants_beyond_exhaustive_range(alpha in permutation(14)) {
        let sigma = sigma_from_alpha(&alpha);
        prop_assert_eq!(sigma.sign(), 1);
        prop_assert_ne!(sigma.apply(0), alpha.len());
        prop_assert_eq!(&sigma, &sigma_commutator_form(&alpha));
        prop_assert!(cycle_type_check(&alpha));
        prop_assert!(count_k(&alpha) < alpha.len());
    }

    #[test]
    fn k_is_inverse_symmetric(alpha in permutation(10)) {
        prop_assert_eq!(count_k(&alpha), count_k(&alpha.inverse()));
    }

    #[test]
    fn relative_permutations_are_mutual_inverses(
        labels in Just((0..40usize).collect::<Vec<_>>()).prop_shuffle(),
        alpha in permutation(8),
    ) {
        let n = alpha.len();
        let a = SamplingSequence::new(labels[..n].to_vec(), SamplingMode::WithoutReplacement).unwrap();
        let b = SamplingSequence::new(
            alpha.as_slice().iter().map(|&i| labels[i]).collect(),
            SamplingMode::WithoutReplacement,
        ).unwrap();
        let ab = relative_permutation(&a, &b).unwrap().unwrap();
        let ba = relative_permutation(&b, &a).unwrap().unwrap();
        prop_assert_eq!(&ab, &alpha);
        prop_assert_eq!(ab.compose(&ba).unwrap(), Permutation::identity(n).unwrap());
    }

    #[test]
    fn contraction_ignores_internal_names(alpha in permutation(9), shuffle_seed in any::<u64>(), reverse in any::<bool>()) {
        let n = alpha.len();
        let net = diffusive_network(&alpha);
        // Rotate internal indices 1..N-1 of both chains by seed-dependent offsets.
        let inner = n.saturating_sub(1).max(1);
        let (su, sv) = ((shuffle_seed % inner as u64) as usize, ((shuffle_seed >> 32) % inner as u64) as usize);
        let rot = |i: usize, s: usize| if i == 0 || i == n { i } else { (i - 1 + s) % inner + 1 };
        let renamed = net.relabelled(
            |v| match v {
                IndexVar::U(i) => IndexVar::U(rot(i, su)),
                IndexVar::V(i) => IndexVar::V(rot(i, sv)),
            },
            reverse,
        );
        prop_assert_eq!(contract(&net), contract(&renamed));
    }

    #[test]
    fn without_replacement_never_repeats(seed in any::<u64>(), pool in 1usize..30, frac in 0.0f64..=1.0) {
        let len = ((pool as f64 * frac) as usize).max(1);
        let strategy = SamplingStrategy::new(SamplingMode::WithoutReplacement, len);
        let s = sample_sequence(strategy, pool, &mut RngStream::new(seed, 0).rng()).unwrap();
        prop_assert_eq!(s.len(), len);
        prop_assert!(s.has_distinct_labels());
        prop_assert!(s.labels().iter().all(|&l| l < pool));
    }

    #[test]
    fn cascade_splits_exactly(seed in any::<u64>(), labels in prop::collection::vec(0usize..5, 1..12), cut in 0usize..12) {
        let spec = EnsembleSpec::diffusive(3, 0.9).unwrap();
        let pool: MatrixPool<f64> = generate_pool(spec, 5, seed).unwrap();
        let seq = SamplingSequence::infer(labels.clone()).unwrap();
        let whole = cascade(pool.matrices(), &seq).unwrap();
        let cut = 1 + cut % labels.len();
        let prefix = SamplingSequence::infer(labels[..cut].to_vec()).unwrap();
        let split = cascade_onto(cascade(pool.matrices(), &prefix).unwrap(), pool.matrices(), &labels[cut..]).unwrap();
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn rho_is_a_ratio_of_closed_forms(alpha in permutation(9), m in 1usize..7) {
        let n = alpha.len();
        let own = covariance_closed_form(&alpha).total(m, 1.0);
        let selfcov = covariance_closed_form(&Permutation::identity(n).unwrap()).total(m, 1.0);
        prop_assert_eq!(pearson_rho(count_k(&alpha), m, n).unwrap(), own / selfcov);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_matches_oracle(alpha in permutation(4), m in 1usize..4, r in 0.25f64..2.0) {
        let table = brute_force_permuted(&alpha, m, r, Regime::Diffusive).unwrap();
        let cf = covariance_closed_form(&alpha);
        for (labels, v) in table.iter() {
            let want = cf.element(m, r, labels);
            prop_assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn baseline_is_self_covariance() {
    for (m, n, r) in [(2, 3, 1.0), (4, 2, 0.5), (3, 5, 1.3)] {
        let spec = EnsembleSpec::diffusive(m, r).unwrap();
        let seq = SamplingSequence::new((0..n).collect(), SamplingMode::WithoutReplacement).unwrap();
        let p = predict_variance(&[seq], &spec).unwrap();
        let cf = covariance_closed_form(&Permutation::identity(n).unwrap()).total(m, r);
        assert!((p.baseline_term - cf).abs() <= 1e-12 * cf);
    }
}
