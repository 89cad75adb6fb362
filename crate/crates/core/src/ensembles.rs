//! Constituent random matrices and pools of them.
//!
//! Randomness is keyed, never global: a [`RngStream`] is a `(master_seed,
//! stream_id)` pair mapped onto a ChaCha8 key and stream, so any matrix of
//! any pool can be regenerated on its own and in any order.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statistical model of a thin-section matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Zero-mean Gaussian elements.
    Diffusive,
    /// Identity plus a zero-mean Gaussian perturbation.
    Ballistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Real,
    /// Circularly symmetric: vanishing pseudo-covariance.
    ProperComplex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Matrix dimension `M`.
    pub dim: usize,
    /// Element standard deviation `r`, with `⟨|X_ab - ⟨X_ab⟩|²⟩ = r²`.
    pub scale: f64,
    pub regime: Regime,
    pub field: Field,
}

impl EnsembleSpec {
    pub fn new(dim: usize, scale: f64, regime: Regime, field: Field) -> Result<Self> {
        let spec = EnsembleSpec {
            dim,
            scale,
            regime,
            field,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn diffusive(dim: usize, scale: f64) -> Result<Self> {
        Self::new(dim, scale, Regime::Diffusive, Field::Real)
    }

    pub fn ballistic(dim: usize, scale: f64) -> Result<Self> {
        Self::new(dim, scale, Regime::Ballistic, Field::Real)
    }

    /// `r = 0` is accepted: a ballistic draw is then exactly the identity.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidEnsemble("dimension must be at least 1".into()));
        }
        if !self.scale.is_finite() || self.scale < 0.0 {
            return Err(Error::InvalidEnsemble(format!(
                "scale must be finite and non-negative, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A new master seed for the sub-experiment `tag` of `master`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    mix64(mix64(master) ^ mix64(tag ^ 0x5851_f42d_4c95_7f2d))
}

/// A deterministic, independent substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Scalars a pool can hold.
pub trait Element: ComplexField<RealField = f64> + Copy + Send + Sync {
    const FIELD: Field;

    /// Zero-mean draw with `⟨|x|²⟩ = scale²`; proper when complex.
    fn gaussian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self;

    fn real_value(x: f64) -> Self;

    /// `(re, im)`; `im` is zero for reals.
    fn parts(self) -> (f64, f64);

    fn from_parts(re: f64, im: f64) -> Self;
}

impl Element for f64 {
    const FIELD: Field = Field::Real;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        scale * rng.sample::<f64, _>(StandardNormal)
    }

    fn real_value(x: f64) -> Self {
        x
    }

    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Element for Complex64 {
    const FIELD: Field = Field::ProperComplex;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        let s = scale * std::f64::consts::FRAC_1_SQRT_2;
        let re = s * rng.sample::<f64, _>(StandardNormal);
        let im = s * rng.sample::<f64, _>(StandardNormal);
        Complex64::new(re, im)
    }

    fn real_value(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}

fn check_field<T: Element>(spec: &EnsembleSpec) -> Result<()> {
    if spec.field != T::FIELD {
        return Err(Error::InvalidEnsemble(format!(
            "ensemble field {:?} does not match element type {:?}",
            spec.field,
            T::FIELD
        )));
    }
    Ok(())
}

/// Draws one `M×M` matrix, elements in row-major order from `rng`.
pub fn draw_matrix_with<T: Element, R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> DMatrix<T> {
    let m = spec.dim;
    let mut data = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let mut x = T::gaussian(rng, spec.scale);
            if spec.regime == Regime::Ballistic && a == b {
                x += T::real_value(1.0);
            }
            data.push(x);
        }
    }
    DMatrix::from_row_slice(m, m, &data)
}

/// Draws one matrix from the start of `stream`.
pub fn draw_matrix<T: Element>(spec: &EnsembleSpec, stream: RngStream) -> Result<DMatrix<T>> {
    spec.validate()?;
    check_field::<T>(spec)?;
    Ok(draw_matrix_with(spec, &mut stream.rng()))
}

/// The ensemble mean `⟨X⟩`: zero or the identity.
pub fn ensemble_mean<T: Element>(spec: &EnsembleSpec) -> DMatrix<T> {
    match spec.regime {
        Regime::Diffusive => DMatrix::zeros(spec.dim, spec.dim),
        Regime::Ballistic => DMatrix::identity(spec.dim, spec.dim),
    }
}

/// How a pool was generated: matrix `i` comes from stream `stream_ids[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub stream_ids: Vec<u64>,
}

/// Immutable pool of pre-generated matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPool<T: Element> {
    spec: EnsembleSpec,
    matrices: Vec<DMatrix<T>>,
    seed_record: SeedRecord,
}

impl<T: Element> MatrixPool<T> {
    /// Wraps explicit matrices, e.g. read from disk.
    pub fn from_parts(spec: EnsembleSpec, matrices: Vec<DMatrix<T>>, seed_record: SeedRecord) -> Result<Self> {
        spec.validate()?;
        check_field::<T>(&spec)?;
        if matrices.is_empty() {
            return Err(Error::InvalidEnsemble("pool must hold at least one matrix".into()));
        }
        if let Some(bad) = matrices.iter().find(|x| x.shape() != (spec.dim, spec.dim)) {
            return Err(Error::SizeMismatch {
                left: spec.dim,
                right: bad.nrows(),
            });
        }
        if seed_record.stream_ids.len() != matrices.len() {
            return Err(Error::SizeMismatch {
                left: matrices.len(),
                right: seed_record.stream_ids.len(),
            });
        }
        Ok(MatrixPool {
            spec,
            matrices,
            seed_record,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn matrices(&self) -> &[DMatrix<T>] {
        &self.matrices
    }

    pub fn get(&self, label: usize) -> Option<&DMatrix<T>> {
        self.matrices.get(label)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn seed_record(&self) -> &SeedRecord {
        &self.seed_record
    }

    /// Regenerates the pool from its seed record.
    pub fn regenerate(&self) -> Result<Self> {
        regenerate_pool(self.spec, &self.seed_record)
    }
}

/// `size` independent draws on streams `0..size` of `master_seed`.
pub fn generate_pool<T: Element>(spec: EnsembleSpec, size: usize, master_seed: u64) -> Result<MatrixPool<T>> {
    if size == 0 {
        return Err(Error::InvalidEnsemble("pool size must be at least 1".into()));
    }
    let record = SeedRecord {
        master_seed,
        stream_ids: (0..size as u64).collect(),
    };
    regenerate_pool(spec, &record)
}

pub fn regenerate_pool<T: Element>(spec: EnsembleSpec, record: &SeedRecord) -> Result<MatrixPool<T>> {
    spec.validate()?;
    check_field::<T>(&spec)?;
    let matrices = record
        .stream_ids
        .par_iter()
        .map(|&id| draw_matrix_with(&spec, &mut RngStream::new(record.master_seed, id).rng()))
        .collect();
    MatrixPool::from_parts(spec, matrices, record.clone())
}

/// Single-threaded pool draw for inner loops that are already parallel.
pub(crate) fn generate_pool_serial<T: Element>(spec: &EnsembleSpec, size: usize, master_seed: u64) -> Vec<DMatrix<T>> {
    (0..size as u64)
        .map(|id| draw_matrix_with(spec, &mut RngStream::new(master_seed, id).rng()))
        .collect()
}
