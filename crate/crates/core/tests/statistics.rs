//! Monte Carlo checks of the ensembles, sampling and estimators at 4 SE.

use cascade_boot::bootstrap::{cascade, sample_sequence, SamplingStrategy};
use cascade_boot::delta::ballistic_expansion;
use cascade_boot::ensembles::*;
use cascade_boot::estimator::*;
use cascade_boot::permutations::{Permutation, SamplingMode, SamplingSequence};
use nalgebra::DMatrix;
use num_complex::Complex64;

const GATE: f64 = 4.0;

fn within(m: &Moments, i: usize, want: f64) -> bool {
    (m.mean[i] - want).abs() <= GATE * m.standard_error(i)
}

#[test]
fn real_diffusive_second_moments() {
    let spec = EnsembleSpec::diffusive(4, 1.0).unwrap();
    // probes: (a,b,c,d) with expected <X_ab X_cd> = δ_ac δ_bd
    let probes = [(0, 0, 0, 0), (1, 2, 1, 2), (0, 1, 1, 0), (2, 3, 2, 0), (3, 3, 0, 0)];
    let m = parallel_moments(100_000, 16 + probes.len(), |t, out| {
        let x: DMatrix<f64> = draw_matrix(&spec, RngStream::new(5, t)).unwrap();
        for (i, v) in x.iter().enumerate() {
            out[i] = *v;
        }
        for (i, &(a, b, c, d)) in probes.iter().enumerate() {
            out[16 + i] = x[(a, b)] * x[(c, d)];
        }
    });
    for i in 0..16 {
        assert!(m.mean[i].abs() < 4.0 / (1e5f64).sqrt(), "mean {i}");
        assert!((m.variance(i) - 1.0).abs() < 0.02, "variance {i}");
    }
    for (i, &(a, b, c, d)) in probes.iter().enumerate() {
        let want = if a == c && b == d { 1.0 } else { 0.0 };
        assert!(within(&m, 16 + i, want), "probe {:?}", probes[i]);
    }
}

#[test]
fn proper_complex_moments() {
    let spec = EnsembleSpec::new(3, 0.8, Regime::Diffusive, Field::ProperComplex).unwrap();
    let probes = [(0, 0, 0, 0), (1, 2, 1, 2), (0, 1, 1, 0), (2, 2, 0, 1)];
    let width = 4 * probes.len();
    let m = parallel_moments(100_000, width, |t, out| {
        let x: DMatrix<Complex64> = draw_matrix(&spec, RngStream::new(6, t)).unwrap();
        for (i, &(a, b, c, d)) in probes.iter().enumerate() {
            let pseudo = x[(a, b)] * x[(c, d)];
            let cov = x[(a, b)] * x[(c, d)].conj();
            out[4 * i..4 * i + 4].copy_from_slice(&[pseudo.re, pseudo.im, cov.re, cov.im]);
        }
    });
    for (i, &(a, b, c, d)) in probes.iter().enumerate() {
        let want = if a == c && b == d { 0.64 } else { 0.0 };
        assert!(within(&m, 4 * i, 0.0) && within(&m, 4 * i + 1, 0.0), "pseudo {:?}", probes[i]);
        assert!(within(&m, 4 * i + 2, want) && within(&m, 4 * i + 3, 0.0), "cov {:?}", probes[i]);
    }
}

#[test]
fn pool_members_are_uncorrelated() {
    let spec = EnsembleSpec::diffusive(2, 1.0).unwrap();
    let m = parallel_moments(10_000, 2, |t, out| {
        let pool: MatrixPool<f64> = generate_pool(spec, 3, derive_seed(77, t)).unwrap();
        let x = pool.matrices();
        out[0] = x[0][(0, 0)] * x[1][(0, 0)];
        out[1] = x[1][(1, 0)] * x[2][(1, 0)];
    });
    assert!(within(&m, 0, 0.0) && within(&m, 1, 0.0));
}

#[test]
fn overlap_probability_between_draws() {
    let strategy = SamplingStrategy::new(SamplingMode::WithoutReplacement, 3);
    let m = parallel_moments(100_000, 1, |t, out| {
        let mut rng = RngStream::new(8, t).rng();
        let a = sample_sequence(strategy, 10, &mut rng).unwrap();
        let b = sample_sequence(strategy, 10, &mut rng).unwrap();
        out[0] = a.labels().iter().any(|l| b.labels().contains(l)) as u8 as f64;
    });
    assert!(within(&m, 0, 1.0 - 35.0 / 120.0), "{}", m.mean[0]);
}

#[test]
fn grand_mean_without_replacement_is_zero() {
    let spec = EnsembleSpec::diffusive(4, 1.0).unwrap();
    let strategy = SamplingStrategy::new(SamplingMode::WithoutReplacement, 3);
    let m = parallel_moments(200, 32, |t, out| {
        let seed = derive_seed(9, t);
        let pool: MatrixPool<f64> = generate_pool(spec, 10, seed).unwrap();
        let mut rng = RngStream::new(seed, 1 << 40).rng();
        let seqs: Vec<SamplingSequence> =
            (0..10_000).map(|_| sample_sequence(strategy, 10, &mut rng).unwrap()).collect();
        let r = sample_mean(pool.matrices(), &seqs, MatrixFunction::Identity).unwrap();
        for (i, v) in r.estimate.iter().enumerate() {
            out[2 * i] = *v;
            out[2 * i + 1] = 0.0;
        }
    });
    for i in 0..16 {
        assert!(within(&m, 2 * i, 0.0), "element {i}: {} +- {}", m.mean[2 * i], m.standard_error(2 * i));
    }
}

#[test]
fn pair_covariance_examples() {
    let cases: [(EnsembleSpec, &[usize], f64); 3] = [
        (EnsembleSpec::diffusive(4, 1.0).unwrap(), &[2, 3, 1], 64.0),
        (EnsembleSpec::diffusive(3, 1.0).unwrap(), &[1, 2], 27.0),
        (EnsembleSpec::diffusive(3, 1.0).unwrap(), &[2, 1], 9.0),
    ];
    for (i, (spec, alpha, want)) in cases.iter().enumerate() {
        let alpha = Permutation::from_one_based(alpha).unwrap();
        let est = monte_carlo_pair_covariance::<f64>(spec, &alpha, 100_000, 100 + i as u64).unwrap();
        assert!(est.z_score(*want) <= GATE, "{alpha}: {est:?} vs {want}");
    }
}

#[test]
fn complex_pair_covariance_matches_real_formula() {
    let spec = EnsembleSpec::new(3, 1.0, Regime::Diffusive, Field::ProperComplex).unwrap();
    for (alpha, want) in [(&[1usize, 2][..], 27.0), (&[2, 1][..], 9.0)] {
        let alpha = Permutation::from_one_based(alpha).unwrap();
        let est = monte_carlo_pair_covariance::<Complex64>(&spec, &alpha, 100_000, 200).unwrap();
        assert!(est.z_score(want) <= GATE, "{alpha}: {est:?}");
    }
}

#[test]
fn ballistic_pair_covariance_matches_expansion() {
    let spec = EnsembleSpec::ballistic(2, 0.5).unwrap();
    for alpha in [[1usize, 2], [2, 1]] {
        let alpha = Permutation::from_one_based(&alpha).unwrap();
        let want = ballistic_expansion(&alpha, 2, 0.5).unwrap().total;
        let est = monte_carlo_pair_covariance::<f64>(&spec, &alpha, 100_000, 300).unwrap();
        assert!(est.z_score(want) <= GATE, "{alpha}: {est:?} vs {want}");
    }
}

#[test]
fn with_replacement_bias_vanishes_for_proper_complex() {
    let spec = EnsembleSpec::new(3, 1.0, Regime::Diffusive, Field::ProperComplex).unwrap();
    let exp = BiasExperiment {
        spec,
        source: SequenceSource::Fixed(SamplingSequence::new(vec![0, 0], SamplingMode::WithReplacement).unwrap()),
        pool_size: 1,
        trials: 50_000,
        seed: 10,
    };
    let report = bias_experiment::<Complex64>(&exp).unwrap();
    assert!(report.max_z_score(&DMatrix::zeros(3, 3)) <= GATE);
}

#[test]
fn random_with_replacement_bias_is_diluted() {
    // Two draws from a pool of four repeat with probability 1/4: bias r² I / 4.
    let spec = EnsembleSpec::diffusive(2, 1.0).unwrap();
    let exp = BiasExperiment {
        spec,
        source: SequenceSource::Random(SamplingStrategy::new(SamplingMode::WithReplacement, 2)),
        pool_size: 4,
        trials: 100_000,
        seed: 11,
    };
    let report = bias_experiment::<f64>(&exp).unwrap();
    assert!(report.max_z_score(&(DMatrix::identity(2, 2) * 0.25)) <= GATE);
}

#[test]
fn single_cascade_mean_is_that_cascade() {
    let spec = EnsembleSpec::diffusive(3, 1.0).unwrap();
    let pool: MatrixPool<f64> = generate_pool(spec, 4, 12).unwrap();
    let seq = SamplingSequence::infer(vec![3, 1, 2]).unwrap();
    let r = sample_mean(pool.matrices(), &[seq.clone()], MatrixFunction::Trace).unwrap();
    assert_eq!(r.estimate[(0, 0)], cascade(pool.matrices(), &seq).unwrap().trace());
}
