//! Sampling from pools, cascaded products and the single/dual-pool pipelines.
//!
//! Products are always evaluated strictly left to right,
//! `((X^{α₁} X^{α₂}) X^{α₃}) …`, so a realisation is reproducible bit for
//! bit from its sampling sequence.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{derive_seed, generate_pool, regenerate_pool, Element, EnsembleSpec, MatrixPool, RngStream, SeedRecord};
use crate::error::{Error, Result};
pub use crate::permutations::{SamplingMode, SamplingSequence};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStrategy {
    pub mode: SamplingMode,
    /// Sequence length `N`.
    pub len: usize,
}

impl SamplingStrategy {
    pub fn new(mode: SamplingMode, len: usize) -> Self {
        SamplingStrategy { mode, len }
    }

    pub fn check(&self, pool_size: usize) -> Result<()> {
        if self.len == 0 {
            return Err(Error::EmptySequence);
        }
        if pool_size == 0 || (self.mode == SamplingMode::WithoutReplacement && self.len > pool_size) {
            return Err(Error::InfeasibleSampling {
                len: self.len,
                pool_size,
            });
        }
        Ok(())
    }
}

/// Uniform sequence over `0..pool_size`: a Fisher–Yates prefix without
/// replacement, i.i.d. labels with replacement.
pub fn sample_sequence<R: Rng + ?Sized>(
    strategy: SamplingStrategy,
    pool_size: usize,
    rng: &mut R,
) -> Result<SamplingSequence> {
    strategy.check(pool_size)?;
    let labels = match strategy.mode {
        SamplingMode::WithReplacement => (0..strategy.len).map(|_| rng.random_range(0..pool_size)).collect(),
        SamplingMode::WithoutReplacement => {
            let mut deck: Vec<usize> = (0..pool_size).collect();
            for i in 0..strategy.len {
                let j = rng.random_range(i..pool_size);
                deck.swap(i, j);
            }
            deck.truncate(strategy.len);
            deck
        }
    };
    SamplingSequence::new(labels, strategy.mode)
}

/// `X^{α₁} X^{α₂} ⋯ X^{α_N}` over `matrices`.
pub fn cascade<T: Element>(matrices: &[DMatrix<T>], seq: &SamplingSequence) -> Result<DMatrix<T>> {
    let (&first, rest) = seq.labels().split_first().ok_or(Error::EmptySequence)?;
    let start = matrices.get(first).ok_or(Error::LabelOutOfRange {
        label: first,
        pool_size: matrices.len(),
    })?;
    cascade_onto(start.clone(), matrices, rest)
}

/// Continues a left-to-right product: `acc · X^{l₁} · X^{l₂} ⋯`.
pub fn cascade_onto<T: Element>(mut acc: DMatrix<T>, matrices: &[DMatrix<T>], labels: &[usize]) -> Result<DMatrix<T>> {
    for &l in labels {
        let x = matrices.get(l).ok_or(Error::LabelOutOfRange {
            label: l,
            pool_size: matrices.len(),
        })?;
        if acc.ncols() != x.nrows() {
            return Err(Error::SizeMismatch {
                left: acc.ncols(),
                right: x.nrows(),
            });
        }
        acc = &acc * x;
    }
    Ok(acc)
}

/// Rough `log10` of a typical element of an `n`-fold product: `(r√M)^n / √M`.
/// Double precision is comfortable while this stays within ±250.
pub fn magnitude_exponent(spec: &EnsembleSpec, n: usize) -> f64 {
    let m = spec.dim as f64;
    match spec.regime {
        crate::ensembles::Regime::Diffusive => n as f64 * (spec.scale * m.sqrt()).log10() - 0.5 * m.log10(),
        crate::ensembles::Regime::Ballistic => n as f64 * (1.0 + spec.scale * spec.scale * m).sqrt().log10(),
    }
}

/// Sizes of the two-stage pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// `N_r`: full-thickness realisations.
    pub realisations: u64,
    /// `N_δ`: thin slabs per full thickness.
    pub slabs: u64,
    /// `N₁`: thin-slab pool size.
    pub pool1_size: u64,
    /// `N₂`: intermediate-section pool size.
    pub pool2_size: u64,
    /// `n_Δ`: thin slabs per intermediate section.
    pub slabs_per_section: u64,
    /// `N_Δ`: intermediate sections per full thickness.
    pub sections: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("realisations", self.realisations),
            ("slabs", self.slabs),
            ("pool1_size", self.pool1_size),
            ("pool2_size", self.pool2_size),
            ("slabs_per_section", self.slabs_per_section),
            ("sections", self.sections),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        match self.slabs_per_section.checked_mul(self.sections) {
            Some(p) if p == self.slabs => Ok(()),
            _ => Err(Error::InvalidConfig(format!(
                "slabs ({}) must equal slabs_per_section ({}) x sections ({})",
                self.slabs, self.slabs_per_section, self.sections
            ))),
        }
    }

    /// Fills `sections` from `slabs / slabs_per_section`.
    pub fn with_derived_sections(
        realisations: u64,
        slabs: u64,
        pool1_size: u64,
        pool2_size: u64,
        slabs_per_section: u64,
    ) -> Result<Self> {
        if slabs_per_section == 0 || slabs % slabs_per_section != 0 {
            return Err(Error::InvalidConfig(format!(
                "slabs ({slabs}) is not a multiple of slabs_per_section ({slabs_per_section})"
            )));
        }
        let cfg = PipelineConfig {
            realisations,
            slabs,
            pool1_size,
            pool2_size,
            slabs_per_section,
            sections: slabs / slabs_per_section,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    OnTheFly,
    SinglePool,
    DualPool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub approach: Approach,
    pub generations: u64,
    pub products: u64,
}

/// Matrix generations and products for each approach.
///
/// The dual-pool product count is `N₂ n_Δ + N_r (N_Δ - 1)`; the actual
/// multiplications performed by [`dual_pool_run`] are
/// `N₂ (n_Δ - 1) + N_r (N_Δ - 1)` and reported there.
pub fn cost_model(config: &PipelineConfig) -> Result<[CostReport; 3]> {
    config.validate()?;
    let mul = |a: u64, b: u64| a.checked_mul(b).ok_or(Error::Overflow("cost model"));
    let add = |a: u64, b: u64| a.checked_add(b).ok_or(Error::Overflow("cost model"));
    let chain = mul(config.realisations, config.slabs - 1)?;
    Ok([
        CostReport {
            approach: Approach::OnTheFly,
            generations: mul(config.realisations, config.slabs)?,
            products: chain,
        },
        CostReport {
            approach: Approach::SinglePool,
            generations: config.pool1_size,
            products: chain,
        },
        CostReport {
            approach: Approach::DualPool,
            generations: config.pool1_size,
            products: add(
                mul(config.pool2_size, config.slabs_per_section)?,
                mul(config.realisations, config.sections - 1)?,
            )?,
        },
    ])
}

/// Sampling record sufficient to replay a dual-pool run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: EnsembleSpec,
    pub mode: SamplingMode,
    pub pool1: SeedRecord,
    /// 1-based labels into pool 1, one sequence per intermediate matrix.
    pub intermediate: Vec<Vec<usize>>,
    /// 1-based labels into pool 2, one sequence per realisation.
    pub realisations: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualPoolRun<T: Element> {
    pub pool1: MatrixPool<T>,
    pub pool2: Vec<DMatrix<T>>,
    pub intermediate: Vec<SamplingSequence>,
    pub realisations: Vec<SamplingSequence>,
    pub outputs: Vec<DMatrix<T>>,
    /// Matrix multiplications actually performed.
    pub multiplications: u64,
}

impl<T: Element> DualPoolRun<T> {
    pub fn provenance(&self, mode: SamplingMode) -> Provenance {
        Provenance {
            spec: *self.pool1.spec(),
            mode,
            pool1: self.pool1.seed_record().clone(),
            intermediate: self.intermediate.iter().map(SamplingSequence::to_one_based).collect(),
            realisations: self.realisations.iter().map(SamplingSequence::to_one_based).collect(),
        }
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} too large")))
}

/// Builds pool 1, pool 2 from `n_Δ`-fold cascades of pool 1, then `N_r`
/// cascades of `N_Δ` pool-2 matrices.
///
/// Seeds: pool 1 uses `derive_seed(seed, 1)` with streams `0..N₁`;
/// intermediate sequence `i` uses stream `i` of `derive_seed(seed, 2)`;
/// realisation `l` uses stream `l` of `derive_seed(seed, 3)`.
pub fn dual_pool_run<T: Element>(
    config: &PipelineConfig,
    spec: EnsembleSpec,
    mode: SamplingMode,
    seed: u64,
) -> Result<DualPoolRun<T>> {
    config.validate()?;
    let n1 = to_usize(config.pool1_size, "pool1_size")?;
    let n2 = to_usize(config.pool2_size, "pool2_size")?;
    let stage1 = SamplingStrategy::new(mode, to_usize(config.slabs_per_section, "slabs_per_section")?);
    let stage2 = SamplingStrategy::new(mode, to_usize(config.sections, "sections")?);
    stage1.check(n1)?;
    stage2.check(n2)?;

    let pool1: MatrixPool<T> = generate_pool(spec, n1, derive_seed(seed, 1))?;
    let inter_seed = derive_seed(seed, 2);
    let intermediate = (0..n2 as u64)
        .into_par_iter()
        .map(|i| sample_sequence(stage1, n1, &mut RngStream::new(inter_seed, i).rng()))
        .collect::<Result<Vec<_>>>()?;
    let pool2 = intermediate
        .par_iter()
        .map(|s| cascade(pool1.matrices(), s))
        .collect::<Result<Vec<_>>>()?;

    let real_seed = derive_seed(seed, 3);
    let realisations = (0..config.realisations)
        .into_par_iter()
        .map(|l| sample_sequence(stage2, n2, &mut RngStream::new(real_seed, l).rng()))
        .collect::<Result<Vec<_>>>()?;
    let outputs = realisations
        .par_iter()
        .map(|s| cascade(&pool2, s))
        .collect::<Result<Vec<_>>>()?;

    let multiplications = config.pool2_size * (config.slabs_per_section - 1) + config.realisations * (config.sections - 1);
    Ok(DualPoolRun {
        pool1,
        pool2,
        intermediate,
        realisations,
        outputs,
        multiplications,
    })
}

/// Rebuilds every full-thickness matrix from a provenance record.
pub fn replay<T: Element>(provenance: &Provenance) -> Result<Vec<DMatrix<T>>> {
    let pool1: MatrixPool<T> = regenerate_pool(provenance.spec, &provenance.pool1)?;
    let seqs = |lists: &[Vec<usize>]| {
        lists
            .iter()
            .map(|l| SamplingSequence::from_one_based(l, provenance.mode))
            .collect::<Result<Vec<_>>>()
    };
    let pool2 = seqs(&provenance.intermediate)?
        .iter()
        .map(|s| cascade(pool1.matrices(), s))
        .collect::<Result<Vec<_>>>()?;
    seqs(&provenance.realisations)?
        .iter()
        .map(|s| cascade(&pool2, s))
        .collect()
}

/// Single-pool pipeline: `N_r` cascades of `N_δ` draws straight from pool 1.
pub fn single_pool_run<T: Element>(
    spec: EnsembleSpec,
    pool_size: usize,
    realisations: usize,
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<(MatrixPool<T>, Vec<SamplingSequence>, Vec<DMatrix<T>>)> {
    strategy.check(pool_size)?;
    let pool: MatrixPool<T> = generate_pool(spec, pool_size, derive_seed(seed, 1))?;
    let real_seed = derive_seed(seed, 3);
    let seqs = (0..realisations as u64)
        .into_par_iter()
        .map(|l| sample_sequence(strategy, pool_size, &mut RngStream::new(real_seed, l).rng()))
        .collect::<Result<Vec<_>>>()?;
    let outputs = seqs
        .par_iter()
        .map(|s| cascade(pool.matrices(), s))
        .collect::<Result<Vec<_>>>()?;
    Ok((pool, seqs, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::Regime;

    fn seq(v: &[usize]) -> SamplingSequence {
        SamplingSequence::infer(v.to_vec()).unwrap()
    }

    #[test]
    fn full_draw_without_replacement_is_a_permutation() {
        let mut rng = RngStream::new(3, 0).rng();
        let s = sample_sequence(SamplingStrategy::new(SamplingMode::WithoutReplacement, 6), 6, &mut rng).unwrap();
        let mut labels = s.labels().to_vec();
        labels.sort_unstable();
        assert_eq!(labels, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn forced_repetition() {
        let mut rng = RngStream::new(3, 0).rng();
        let s = sample_sequence(SamplingStrategy::new(SamplingMode::WithReplacement, 2), 1, &mut rng).unwrap();
        assert_eq!(s.labels(), &[0, 0]);
        assert!(matches!(
            sample_sequence(SamplingStrategy::new(SamplingMode::WithoutReplacement, 3), 2, &mut rng),
            Err(Error::InfeasibleSampling { len: 3, pool_size: 2 })
        ));
    }

    #[test]
    fn cascade_order() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pool = vec![a.clone(), b.clone()];
        // (2,2,1,2,1) in 1-based labels
        let z = cascade(&pool, &seq(&[1, 1, 0, 1, 0])).unwrap();
        assert_eq!(z, &(&(&(&b * &b) * &a) * &b) * &a);
        assert_eq!(cascade(&pool, &seq(&[1])).unwrap(), b);
        let id = vec![DMatrix::<f64>::identity(3, 3); 2];
        assert_eq!(cascade(&id, &seq(&[0, 1, 0])).unwrap(), DMatrix::identity(3, 3));
        assert!(matches!(
            cascade(&pool, &seq(&[0, 2])),
            Err(Error::LabelOutOfRange { label: 2, pool_size: 2 })
        ));
    }

    #[test]
    fn cost_examples() {
        let cfg = PipelineConfig {
            realisations: 10_000,
            slabs: 300,
            pool1_size: 1000,
            pool2_size: 1000,
            slabs_per_section: 30,
            sections: 10,
        };
        let [otf, single, dual] = cost_model(&cfg).unwrap();
        assert_eq!((otf.generations, otf.products), (3_000_000, 2_990_000));
        assert_eq!((single.generations, single.products), (1000, 2_990_000));
        assert_eq!((dual.generations, dual.products), (1000, 120_000));
        let tiny = PipelineConfig {
            realisations: 1,
            slabs: 1,
            pool1_size: 1,
            pool2_size: 1,
            slabs_per_section: 1,
            sections: 1,
        };
        let [otf, ..] = cost_model(&tiny).unwrap();
        assert_eq!((otf.generations, otf.products), (1, 0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig {
            realisations: 4,
            slabs: 6,
            pool1_size: 5,
            pool2_size: 5,
            slabs_per_section: 2,
            sections: 3,
        };
        assert!(cfg.validate().is_ok());
        cfg.sections = 2;
        assert!(cfg.validate().is_err());
        cfg.sections = 0;
        assert!(cfg.validate().is_err());
        assert!(PipelineConfig::with_derived_sections(1, 7, 1, 1, 2).is_err());
        assert_eq!(PipelineConfig::with_derived_sections(1, 8, 1, 1, 2).unwrap().sections, 4);
    }

    #[test]
    fn dual_pool_shapes_and_replay() {
        let cfg = PipelineConfig {
            realisations: 7,
            slabs: 6,
            pool1_size: 8,
            pool2_size: 5,
            slabs_per_section: 2,
            sections: 3,
        };
        let spec = EnsembleSpec::diffusive(3, 0.5).unwrap();
        let run: DualPoolRun<f64> = dual_pool_run(&cfg, spec, SamplingMode::WithoutReplacement, 11).unwrap();
        assert_eq!(run.realisations.len(), 7);
        assert!(run.realisations.iter().all(|s| s.len() == 3 && s.labels().iter().all(|&l| l < 5)));
        assert_eq!(run.multiplications, 5 + 14);
        let prov = run.provenance(SamplingMode::WithoutReplacement);
        assert_eq!(replay::<f64>(&prov).unwrap(), run.outputs);
        let again: DualPoolRun<f64> = dual_pool_run(&cfg, spec, SamplingMode::WithoutReplacement, 11).unwrap();
        assert_eq!(again, run);
    }

    #[test]
    fn degenerate_intermediate_layer() {
        let cfg = PipelineConfig {
            realisations: 4,
            slabs: 3,
            pool1_size: 6,
            pool2_size: 6,
            slabs_per_section: 1,
            sections: 3,
        };
        let spec = EnsembleSpec::new(2, 1.0, Regime::Ballistic, crate::ensembles::Field::Real).unwrap();
        let run: DualPoolRun<f64> = dual_pool_run(&cfg, spec, SamplingMode::WithReplacement, 5).unwrap();
        for (s, x) in run.intermediate.iter().zip(&run.pool2) {
            assert_eq!(x, &run.pool1.matrices()[s.labels()[0]]);
        }
        assert_eq!(run.multiplications, 4 * 2);
    }

    #[test]
    fn infeasible_pipeline() {
        let cfg = PipelineConfig {
            realisations: 1,
            slabs: 4,
            pool1_size: 3,
            pool2_size: 3,
            slabs_per_section: 4,
            sections: 1,
        };
        let spec = EnsembleSpec::diffusive(2, 1.0).unwrap();
        assert!(dual_pool_run::<f64>(&cfg, spec, SamplingMode::WithoutReplacement, 0).is_err());
        assert!(dual_pool_run::<f64>(&cfg, spec, SamplingMode::WithReplacement, 0).is_ok());
    }
}
