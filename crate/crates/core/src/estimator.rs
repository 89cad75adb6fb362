//! Sample-mean estimation from bootstrapped realisations.
//!
//! Monte Carlo loops here split trials into fixed-size chunks, each with its
//! own keyed RNG stream, and merge chunk statistics in chunk order. Results
//! are therefore bit-identical for any number of worker threads.
//!
//! Total covariances are estimated through element sums: for the ensembles
//! here every element of the covariance tensor is non-negative, so its
//! 1-norm equals the covariance of the element sums, which has an unbiased
//! per-trial estimator.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{cascade, sample_sequence, SamplingStrategy};
use crate::ensembles::{derive_seed, draw_matrix_with, ensemble_mean, generate_pool_serial, Element, EnsembleSpec, Regime, RngStream};
use crate::error::{Error, Result};
use crate::permutations::{count_k, relative_permutation, Permutation, SamplingMode, SamplingSequence};

/// Trials per work unit in Monte Carlo loops.
pub const TRIAL_CHUNK: u64 = 512;

/// Running mean and centred second moment per component (Chan et al. merge).
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; width],
            m2: vec![0.0; width],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(mut self, other: &Moments) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other.clone();
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
        self
    }

    /// Unbiased sample variance; zero for a single observation.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2[i] / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean of component `i`.
    pub fn standard_error(&self, i: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance(i) / self.count as f64).sqrt()
    }
}

/// Runs `observe(trial, out)` for `trials` trials and merges deterministically.
pub fn parallel_moments<F>(trials: u64, width: usize, observe: F) -> Moments
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(width);
            let mut buf = vec![0.0; width];
            let end = ((c + 1) * TRIAL_CHUNK).min(trials);
            for t in c * TRIAL_CHUNK..end {
                observe(t, &mut buf);
                acc.push(&buf);
            }
            acc
        })
        .collect();
    partials.iter().fold(Moments::new(width), |acc, p| acc.merge(p))
}

/// Registered observables `f(Z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFunction {
    /// `Z` itself.
    Identity,
    /// `Z_jk` (0-based).
    Element(usize, usize),
    Trace,
    /// `|Z_jk|²` (0-based).
    SquaredElement(usize, usize),
}

impl MatrixFunction {
    /// Parses `identity`, `trace`, `element:J,K` or `squared-element:J,K`
    /// with 1-based `J, K`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (text.trim(), None),
        };
        let pair = |arg: Option<&str>| -> Result<(usize, usize)> {
            let v = crate::permutations::parse_label_list(arg.unwrap_or(""))?;
            match v.as_slice() {
                [j, k] if *j > 0 && *k > 0 => Ok((j - 1, k - 1)),
                _ => Err(Error::Parse(format!("expected two 1-based indices in {text:?}"))),
            }
        };
        match name {
            "identity" => Ok(MatrixFunction::Identity),
            "trace" => Ok(MatrixFunction::Trace),
            "element" => pair(arg).map(|(j, k)| MatrixFunction::Element(j, k)),
            "squared-element" => pair(arg).map(|(j, k)| MatrixFunction::SquaredElement(j, k)),
            other => Err(Error::Parse(format!("unknown matrix function {other:?}"))),
        }
    }

    pub fn apply<T: Element>(&self, z: &DMatrix<T>) -> Result<DMatrix<T>> {
        let check = |j: usize, k: usize| {
            if j < z.nrows() && k < z.ncols() {
                Ok(())
            } else {
                Err(Error::LabelOutOfRange {
                    label: j.max(k),
                    pool_size: z.nrows(),
                })
            }
        };
        Ok(match *self {
            MatrixFunction::Identity => z.clone(),
            MatrixFunction::Element(j, k) => {
                check(j, k)?;
                DMatrix::from_element(1, 1, z[(j, k)])
            }
            MatrixFunction::Trace => DMatrix::from_element(1, 1, z.trace()),
            MatrixFunction::SquaredElement(j, k) => {
                check(j, k)?;
                let x = z[(j, k)];
                DMatrix::from_element(1, 1, x * x.conjugate())
            }
        })
    }
}

/// A sample mean with elementwise standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport<T: Element> {
    pub estimate: DMatrix<T>,
    /// `sqrt(E|x - x̄|² / (n (n-1)))` per element; zero for one sample.
    pub standard_error: DMatrix<f64>,
    pub n_samples: u64,
    pub seed: Option<u64>,
}

fn moments_to_report<T: Element>(m: &Moments, rows: usize, cols: usize, seed: Option<u64>) -> EstimatorReport<T> {
    let mut estimate = DMatrix::<T>::zeros(rows, cols);
    let mut se = DMatrix::<f64>::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = 2 * (r * cols + c);
            estimate[(r, c)] = T::from_parts(m.mean[i], m.mean[i + 1]);
            let var = m.variance(i) + m.variance(i + 1);
            se[(r, c)] = if m.count > 0 { (var / m.count as f64).sqrt() } else { 0.0 };
        }
    }
    EstimatorReport {
        estimate,
        standard_error: se,
        n_samples: m.count,
        seed,
    }
}

fn write_parts<T: Element>(x: &DMatrix<T>, out: &mut [f64]) {
    let cols = x.ncols();
    for r in 0..x.nrows() {
        for c in 0..cols {
            let (re, im) = x[(r, c)].parts();
            out[2 * (r * cols + c)] = re;
            out[2 * (r * cols + c) + 1] = im;
        }
    }
}

/// Mean of `f` over the cascades of `sequences` through `pool`.
pub fn sample_mean<T: Element>(
    pool: &[DMatrix<T>],
    sequences: &[SamplingSequence],
    f: MatrixFunction,
) -> Result<EstimatorReport<T>> {
    let values = sequences
        .iter()
        .map(|s| cascade(pool, s).and_then(|z| f.apply(&z)))
        .collect::<Result<Vec<_>>>()?;
    let first = values.first().ok_or(Error::EmptySequence)?;
    let (rows, cols) = first.shape();
    let mut m = Moments::new(2 * rows * cols);
    let mut buf = vec![0.0; 2 * rows * cols];
    for v in &values {
        write_parts(v, &mut buf);
        m.push(&buf);
    }
    Ok(moments_to_report(&m, rows, cols, None))
}

/// Where each trial's sequence comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum SequenceSource {
    Fixed(SamplingSequence),
    Random(SamplingStrategy),
}

impl SequenceSource {
    fn len(&self) -> usize {
        match self {
            SequenceSource::Fixed(s) => s.len(),
            SequenceSource::Random(s) => s.len,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasExperiment {
    pub spec: EnsembleSpec,
    pub source: SequenceSource,
    pub pool_size: usize,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport<T: Element> {
    /// `⟨Z̄⟩ - ⟨Z⟩` estimated over independent pools.
    pub bias: DMatrix<T>,
    pub standard_error: DMatrix<f64>,
    /// The on-the-fly mean `⟨X⟩^N`.
    pub ensemble_mean: DMatrix<T>,
    pub trials: u64,
}

impl<T: Element> BiasReport<T> {
    /// Largest `|bias - expected| / SE` over elements; elements with zero SE
    /// count as infinite unless they match exactly.
    pub fn max_z_score(&self, expected: &DMatrix<T>) -> f64 {
        self.bias
            .iter()
            .zip(expected.iter())
            .zip(self.standard_error.iter())
            .map(|((b, e), &se)| {
                let d = (*b - *e).modulus();
                if d == 0.0 {
                    0.0
                } else if se == 0.0 {
                    f64::INFINITY
                } else {
                    d / se
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Estimates the bias of the sample mean by regenerating the pool each trial.
///
/// Trial `t` builds its pool on `derive_seed(seed, t)` (streams `0..pool`)
/// and draws a random sequence from stream `pool_size` of the same seed.
pub fn bias_experiment<T: Element>(exp: &BiasExperiment) -> Result<BiasReport<T>> {
    exp.spec.validate()?;
    if T::FIELD != exp.spec.field {
        return Err(Error::InvalidEnsemble("field does not match element type".into()));
    }
    match &exp.source {
        SequenceSource::Fixed(s) => {
            if let Some(&bad) = s.labels().iter().find(|&&l| l >= exp.pool_size) {
                return Err(Error::LabelOutOfRange {
                    label: bad,
                    pool_size: exp.pool_size,
                });
            }
        }
        SequenceSource::Random(strategy) => strategy.check(exp.pool_size)?,
    }
    if exp.trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let m = exp.spec.dim;
    let n = exp.source.len();
    let mean_x = ensemble_mean::<T>(&exp.spec);
    let expected = (1..n).fold(mean_x.clone(), |acc, _| &acc * &mean_x);

    let moments = parallel_moments(exp.trials, 2 * m * m, |t, out| {
        let trial_seed = derive_seed(exp.seed, t);
        let pool = generate_pool_serial::<T>(&exp.spec, exp.pool_size, trial_seed);
        let seq = match &exp.source {
            SequenceSource::Fixed(s) => s.clone(),
            SequenceSource::Random(strategy) => {
                let mut rng = RngStream::new(trial_seed, exp.pool_size as u64).rng();
                sample_sequence(*strategy, exp.pool_size, &mut rng).expect("strategy checked")
            }
        };
        let z = cascade(&pool, &seq).expect("labels checked");
        write_parts(&(z - &expected), out);
    });
    let report = moments_to_report::<T>(&moments, m, m, Some(exp.seed));
    Ok(BiasReport {
        bias: report.estimate,
        standard_error: report.standard_error,
        ensemble_mean: expected,
        trials: exp.trials,
    })
}

/// `⟨X^{α₁}⋯X^{α_N}⟩` in the cases that need no moment expansion: distinct
/// labels factorise; a diffusive proper-complex product has no conjugates so
/// every pairing vanishes; a diffusive label used an odd number of times
/// leaves an odd moment; `(a, a)` gives `r² I` for real fields.
pub fn product_mean<T: Element>(spec: &EnsembleSpec, seq: &SamplingSequence) -> Option<DMatrix<T>> {
    let m = spec.dim;
    let n = seq.len();
    if seq.has_distinct_labels() {
        let mean_x = ensemble_mean::<T>(spec);
        return Some((1..n).fold(mean_x.clone(), |acc, _| &acc * &mean_x));
    }
    if spec.regime != Regime::Diffusive {
        return None;
    }
    let mut uses: HashMap<usize, usize> = HashMap::new();
    for &l in seq.labels() {
        *uses.entry(l).or_default() += 1;
    }
    if T::FIELD == crate::ensembles::Field::ProperComplex || uses.values().any(|c| c % 2 == 1) {
        return Some(DMatrix::zeros(m, m));
    }
    if n == 2 {
        return Some(DMatrix::identity(m, m) * T::real_value(spec.scale * spec.scale));
    }
    None
}

/// Ordered-pair counts by correlation class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairHistogram {
    /// `by_k[K]` ordered pairs related by a permutation with that `K`.
    pub by_k: Vec<u64>,
    /// Ordered pairs whose label sets differ.
    pub unmatched: u64,
}

impl PairHistogram {
    pub fn pairs(&self) -> u64 {
        self.by_k.iter().sum::<u64>() + self.unmatched
    }
}

/// Predicted `‖var[Ẑ]‖₁` split into the on-the-fly term and the
/// bootstrap correlation term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePrediction {
    pub baseline_term: f64,
    pub correlation_term: f64,
    pub pair_histogram: PairHistogram,
    pub n_z: u64,
}

impl VariancePrediction {
    pub fn total(&self) -> f64 {
        self.baseline_term + self.correlation_term
    }
}

fn check_sequences(sequences: &[SamplingSequence]) -> Result<usize> {
    let first = sequences.first().ok_or(Error::EmptySequence)?;
    let n = first.len();
    for s in sequences {
        if s.len() != n {
            return Err(Error::SizeMismatch { left: n, right: s.len() });
        }
        if s.mode() != SamplingMode::WithoutReplacement || !s.has_distinct_labels() {
            return Err(Error::Unsupported(
                "closed-form variance needs without-replacement sequences".into(),
            ));
        }
    }
    Ok(n)
}

/// Histogram of `K` over ordered pairs `l₁ ≠ l₂`.
pub fn pair_histogram(sequences: &[SamplingSequence]) -> Result<PairHistogram> {
    let n = check_sequences(sequences)?;
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (i, s) in sequences.iter().enumerate() {
        let mut key = s.labels().to_vec();
        key.sort_unstable();
        groups.entry(key).or_default().push(i);
    }
    let nz = sequences.len() as u64;
    let mut hist = PairHistogram {
        by_k: vec![0; n],
        unmatched: 0,
    };
    let mut matched = 0u64;
    for members in groups.values() {
        for &a in members {
            for &b in members {
                if a == b {
                    continue;
                }
                let pi = relative_permutation(&sequences[a], &sequences[b])?.expect("same label set");
                hist.by_k[count_k(&pi)] += 1;
                matched += 1;
            }
        }
    }
    hist.unmatched = nz * (nz - 1) - matched;
    Ok(hist)
}

/// `‖var[Ẑ]‖₁ = ‖var[Z]‖₁ / N_Z + Σ_{l₁≠l₂} C(K, M, N) / N_Z²` with
/// `‖var[Z]‖₁ = r^{2N} M^{N+1}` and `C(K, M, N) = r^{2N} M^{K+2}`.
///
/// Pairs with different label sets contribute nothing: an unshared
/// zero-mean factor decouples. That fails in the ballistic regime, which is
/// rejected.
pub fn predict_variance(sequences: &[SamplingSequence], spec: &EnsembleSpec) -> Result<VariancePrediction> {
    spec.validate()?;
    if spec.regime != Regime::Diffusive {
        return Err(Error::Unsupported(
            "closed-form variance covers the diffusive regime only".into(),
        ));
    }
    let hist = pair_histogram(sequences)?;
    let n = sequences[0].len();
    let m = spec.dim as f64;
    let nz = sequences.len() as f64;
    let scale = spec.scale.powi(2 * n as i32);
    let baseline = scale * m.powi(n as i32 + 1);
    let correlation: f64 = hist
        .by_k
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * scale * m.powi(k as i32 + 2))
        .sum();
    Ok(VariancePrediction {
        baseline_term: baseline / nz,
        correlation_term: correlation / (nz * nz),
        pair_histogram: hist,
        n_z: sequences.len() as u64,
    })
}

/// Pearson correlation between `X¹…Xᴺ` and a permutation with class `K`:
/// `M^{K-(N-1)}`, one for the self pair `K = N-1`.
pub fn pearson_rho(k: usize, dim: usize, n: usize) -> Result<f64> {
    if n == 0 || k >= n {
        return Err(Error::KOutOfRange {
            k,
            n,
            max: n.saturating_sub(1),
        });
    }
    Ok((dim as f64).powi(k as i32 - (n as i32 - 1)))
}

/// Extra realisations needed to match the on-the-fly variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationsRatio {
    /// `S = Σ_{l₁≠l₂} ρ(K(l₁, l₂))`.
    pub pair_sum: f64,
    /// `1 + S`, the small-correlation approximation.
    pub approximate: f64,
    /// `1 + S / N_Z`, from equating the two variance expressions exactly.
    pub exact: f64,
}

pub fn realizations_ratio(sequences: &[SamplingSequence], dim: usize) -> Result<RealizationsRatio> {
    let hist = pair_histogram(sequences)?;
    let n = sequences[0].len();
    let pair_sum = hist
        .by_k
        .iter()
        .enumerate()
        .map(|(k, &c)| Ok(c as f64 * pearson_rho(k, dim, n)?))
        .sum::<Result<f64>>()?;
    Ok(RealizationsRatio {
        pair_sum,
        approximate: 1.0 + pair_sum,
        exact: 1.0 + pair_sum / sequences.len() as f64,
    })
}

/// Monte Carlo estimate of a total covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: u64,
    pub workers: usize,
}

impl TotalEstimate {
    pub fn z_score(&self, predicted: f64) -> f64 {
        let d = (self.estimate - predicted).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.standard_error
        }
    }
}

fn element_sum<T: Element>(z: &DMatrix<T>) -> T {
    z.iter().fold(T::zero(), |acc, &x| acc + x)
}

/// Estimates `‖C‖₁` between `X¹…Xᴺ` and `X^{α₁}…X^{α_N}` from fresh
/// matrices each trial; the second product is conjugated for complex fields.
///
/// Trial `t` draws its `N` matrices in order from stream `t` of `seed`.
pub fn monte_carlo_pair_covariance<T: Element>(
    spec: &EnsembleSpec,
    alpha: &Permutation,
    trials: u64,
    seed: u64,
) -> Result<TotalEstimate> {
    spec.validate()?;
    if T::FIELD != spec.field {
        return Err(Error::InvalidEnsemble("field does not match element type".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidConfig("need at least two trials".into()));
    }
    let n = alpha.len();
    let reference = SamplingSequence::new((0..n).collect(), SamplingMode::WithoutReplacement)?;
    let permuted = SamplingSequence::new(alpha.as_slice().to_vec(), SamplingMode::WithoutReplacement)?;
    let mu = match spec.regime {
        Regime::Diffusive => T::zero(),
        Regime::Ballistic => T::real_value(spec.dim as f64),
    };
    let moments = parallel_moments(trials, 1, |t, out| {
        let mut rng = RngStream::new(seed, t).rng();
        let xs: Vec<DMatrix<T>> = (0..n).map(|_| draw_matrix_with(spec, &mut rng)).collect();
        let s1 = element_sum(&cascade(&xs, &reference).expect("valid")) - mu;
        let s2 = element_sum(&cascade(&xs, &permuted).expect("valid")) - mu;
        out[0] = (s1 * s2.conjugate()).parts().0;
    });
    Ok(TotalEstimate {
        estimate: moments.mean[0],
        standard_error: moments.standard_error(0),
        trials,
        workers: rayon::current_num_threads(),
    })
}

/// Empirical `‖var[Ẑ]‖₁` for fixed sequences over independent pools.
///
/// Regeneration `t` draws its pool on `derive_seed(seed, t)`.
pub fn empirical_estimator_variance<T: Element>(
    spec: &EnsembleSpec,
    sequences: &[SamplingSequence],
    pool_size: usize,
    regenerations: u64,
    seed: u64,
) -> Result<TotalEstimate> {
    spec.validate()?;
    if T::FIELD != spec.field {
        return Err(Error::InvalidEnsemble("field does not match element type".into()));
    }
    if sequences.is_empty() {
        return Err(Error::EmptySequence);
    }
    if regenerations < 2 {
        return Err(Error::InvalidConfig("need at least two regenerations".into()));
    }
    for s in sequences {
        if let Some(&bad) = s.labels().iter().find(|&&l| l >= pool_size) {
            return Err(Error::LabelOutOfRange { label: bad, pool_size });
        }
    }
    let n = sequences[0].len();
    let mean_x = ensemble_mean::<T>(spec);
    let mu = element_sum(&(1..n).fold(mean_x.clone(), |acc, _| &acc * &mean_x));
    let nz = T::real_value(sequences.len() as f64);
    let moments = parallel_moments(regenerations, 1, |t, out| {
        let pool = generate_pool_serial::<T>(spec, pool_size, derive_seed(seed, t));
        let total = sequences
            .iter()
            .map(|s| element_sum(&cascade(&pool, s).expect("labels checked")))
            .fold(T::zero(), |a, b| a + b);
        let s = total / nz - mu;
        out[0] = (s * s.conjugate()).parts().0;
    });
    Ok(TotalEstimate {
        estimate: moments.mean[0],
        standard_error: moments.standard_error(0),
        trials: regenerations,
        workers: rayon::current_num_threads(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wo(v: &[usize]) -> SamplingSequence {
        SamplingSequence::new(v.to_vec(), SamplingMode::WithoutReplacement).unwrap()
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5 - 7.0).collect();
        let mut seq = Moments::new(1);
        for &x in &xs {
            seq.push(&[x]);
        }
        let merged = xs.chunks(77).fold(Moments::new(1), |acc, c| {
            let mut m = Moments::new(1);
            for &x in c {
                m.push(&[x]);
            }
            acc.merge(&m)
        });
        assert!((seq.mean[0] - merged.mean[0]).abs() < 1e-12);
        assert!((seq.variance(0) - merged.variance(0)).abs() < 1e-9);
    }

    #[test]
    fn matrix_functions() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 4.0]);
        assert_eq!(MatrixFunction::parse("trace").unwrap().apply(&z).unwrap()[(0, 0)], 5.0);
        assert_eq!(MatrixFunction::parse("element:1,2").unwrap().apply(&z).unwrap()[(0, 0)], -2.0);
        assert_eq!(
            MatrixFunction::parse("squared-element:1,2").unwrap().apply(&z).unwrap()[(0, 0)],
            4.0
        );
        assert!(MatrixFunction::parse("element:3,1").unwrap().apply(&z).is_err());
        assert!(MatrixFunction::parse("element:0,1").is_err());
        assert!(MatrixFunction::parse("determinant").is_err());
    }

    #[test]
    fn sample_mean_single_and_identity_pool() {
        let pool = vec![DMatrix::<f64>::identity(3, 3); 4];
        let r = sample_mean(&pool, &[wo(&[0, 2, 1])], MatrixFunction::Element(0, 0)).unwrap();
        assert_eq!(r.estimate[(0, 0)], 1.0);
        assert_eq!(r.standard_error[(0, 0)], 0.0);
        assert_eq!(r.n_samples, 1);
        let z = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        let r = sample_mean(&[z.clone()], &[wo(&[0])], MatrixFunction::Identity).unwrap();
        assert_eq!(r.estimate, z);
    }

    #[test]
    fn variance_prediction_examples() {
        let spec = EnsembleSpec::diffusive(3, 1.0).unwrap();
        let p = predict_variance(&[wo(&[0, 1]), wo(&[2, 3])], &spec).unwrap();
        assert_eq!(p.correlation_term, 0.0);
        assert_eq!(p.baseline_term, 27.0 / 2.0);
        let p = predict_variance(&[wo(&[0, 1]), wo(&[0, 1])], &spec).unwrap();
        assert_eq!(p.correlation_term, 13.5);
        assert_eq!(p.pair_histogram.pairs(), 2);
        let rep = SamplingSequence::new(vec![0, 0], SamplingMode::WithReplacement).unwrap();
        assert!(predict_variance(&[rep], &spec).is_err());
        let ball = EnsembleSpec::ballistic(3, 1.0).unwrap();
        assert!(predict_variance(&[wo(&[0, 1])], &ball).is_err());
    }

    #[test]
    fn product_mean_cases() {
        let spec = EnsembleSpec::diffusive(2, 1.5).unwrap();
        let rep = |v: &[usize]| SamplingSequence::new(v.to_vec(), SamplingMode::WithReplacement).unwrap();
        assert_eq!(product_mean::<f64>(&spec, &rep(&[0, 0])), Some(DMatrix::identity(2, 2) * 2.25));
        assert_eq!(product_mean::<f64>(&spec, &rep(&[0, 0, 1])), Some(DMatrix::zeros(2, 2)));
        assert_eq!(product_mean::<f64>(&spec, &rep(&[0, 1, 0, 1])), None);
        assert_eq!(product_mean::<f64>(&spec, &wo(&[2, 0])), Some(DMatrix::zeros(2, 2)));
        let ball = EnsembleSpec::ballistic(2, 1.0).unwrap();
        assert_eq!(product_mean::<f64>(&ball, &wo(&[2, 0])), Some(DMatrix::identity(2, 2)));
        assert_eq!(product_mean::<f64>(&ball, &rep(&[0, 0])), None);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(pearson_rho(2, 7, 3).unwrap(), 1.0);
        assert!((pearson_rho(1, 10, 3).unwrap() - 0.1).abs() < 1e-15);
        assert!(pearson_rho(3, 10, 3).is_err());
        assert!(pearson_rho(1, 10, 4).unwrap() < pearson_rho(1, 10, 3).unwrap());
        assert!(pearson_rho(1, 11, 3).unwrap() < pearson_rho(1, 10, 3).unwrap());
    }

    #[test]
    fn ratio_examples() {
        let r = realizations_ratio(&[wo(&[0, 1]), wo(&[5, 6])], 4).unwrap();
        assert_eq!((r.approximate, r.exact), (1.0, 1.0));
        let r = realizations_ratio(&[wo(&[0, 1, 2]), wo(&[0, 1, 2])], 4).unwrap();
        assert_eq!(r.approximate, 3.0);
        assert_eq!(r.exact, 2.0);
    }

    #[test]
    fn bias_rejects_bad_input() {
        let spec = EnsembleSpec::diffusive(2, 1.0).unwrap();
        let exp = BiasExperiment {
            spec,
            source: SequenceSource::Fixed(SamplingSequence::infer(vec![0, 3]).unwrap()),
            pool_size: 2,
            trials: 10,
            seed: 0,
        };
        assert!(bias_experiment::<f64>(&exp).is_err());
    }

    #[test]
    fn monte_carlo_is_thread_count_independent() {
        let spec = EnsembleSpec::diffusive(2, 1.0).unwrap();
        let alpha = Permutation::from_one_based(&[2, 1]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_pair_covariance::<f64>(&spec, &alpha, 3000, 9).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.standard_error.to_bits(), b.standard_error.to_bits());
    }
}
