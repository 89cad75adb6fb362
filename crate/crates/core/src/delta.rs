//! Kronecker-delta index networks.
//!
//! The covariance between `Z = X¹X²…Xᴺ` and its permuted counterpart
//! reduces, after inserting the pair moments, to sums over products of
//! Kronecker deltas. Two independent routes evaluate them here:
//!
//! * [`contract`] works symbolically. Index variables joined by deltas form
//!   connected components; a component without boundary labels sums to a
//!   factor `M`, and components holding boundary labels fix which of
//!   `j, k, m, n` must coincide.
//! * [`brute_force_covariance`] sums every internal index tuple with the
//!   analytic pair moments plugged in. No deltas, no cycles: it is the
//!   reference the closed forms are checked against.
//!
//! Boundary labels: `u₀ = j`, `u_N = k`, `v₀ = m`, `v_N = n`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::Regime;
use crate::error::{Error, Result};
use crate::permutations::Permutation;

/// Upper bound on `M^(2(N-1))` for [`brute_force_covariance`].
pub const BRUTE_FORCE_LIMIT: u128 = 100_000_000;
/// Largest `N` accepted by [`ballistic_expansion`].
pub const BALLISTIC_MAX_N: usize = 20;

/// An index variable: `u_i` of the reference product or `v_i` of the permuted one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IndexVar {
    U(usize),
    V(usize),
}

impl fmt::Display for IndexVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexVar::U(i) => write!(f, "u{i}"),
            IndexVar::V(i) => write!(f, "v{i}"),
        }
    }
}

/// The four free matrix-element labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Boundary {
    J,
    K,
    M,
    N,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [Boundary::J, Boundary::K, Boundary::M, Boundary::N];

    fn index(self) -> usize {
        self as usize
    }
}

/// A product of Kronecker deltas over index variables of an `N`-factor chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaNetwork {
    n: usize,
    constraints: Vec<(IndexVar, IndexVar)>,
}

impl DeltaNetwork {
    /// Checks multiplicities: internal variables twice, boundaries at most once.
    pub fn new(n: usize, constraints: Vec<(IndexVar, IndexVar)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::MalformedNetwork("chain length must be positive".into()));
        }
        let mut mult: BTreeMap<IndexVar, usize> = BTreeMap::new();
        for &(a, b) in &constraints {
            for v in [a, b] {
                let i = match v {
                    IndexVar::U(i) | IndexVar::V(i) => i,
                };
                if i > n {
                    return Err(Error::MalformedNetwork(format!("{v} exceeds chain length {n}")));
                }
                *mult.entry(v).or_default() += 1;
            }
        }
        let net = DeltaNetwork { n, constraints };
        for (v, m) in mult {
            let want_max = if net.boundary_of(v).is_some() { 1 } else { 2 };
            let ok = if want_max == 1 { m == 1 } else { m == 2 };
            if !ok {
                return Err(Error::MalformedNetwork(format!(
                    "{v} appears {m} times (expected {want_max})"
                )));
            }
        }
        Ok(net)
    }

    pub fn chain_length(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[(IndexVar, IndexVar)] {
        &self.constraints
    }

    pub fn boundary_of(&self, v: IndexVar) -> Option<Boundary> {
        match v {
            IndexVar::U(0) => Some(Boundary::J),
            IndexVar::U(i) if i == self.n => Some(Boundary::K),
            IndexVar::V(0) => Some(Boundary::M),
            IndexVar::V(i) if i == self.n => Some(Boundary::N),
            _ => None,
        }
    }

    fn variables(&self) -> Vec<IndexVar> {
        let mut vars: Vec<IndexVar> = self.constraints.iter().flat_map(|&(a, b)| [a, b]).collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    pub fn num_internal_u(&self) -> usize {
        self.variables()
            .into_iter()
            .filter(|v| matches!(v, IndexVar::U(_)) && self.boundary_of(*v).is_none())
            .count()
    }

    pub fn num_internal_v(&self) -> usize {
        self.variables()
            .into_iter()
            .filter(|v| matches!(v, IndexVar::V(_)) && self.boundary_of(*v).is_none())
            .count()
    }

    /// Same network with variables renamed by `rename` (which must be injective
    /// and keep boundary variables fixed) and constraints reordered.
    pub fn relabelled(&self, rename: impl Fn(IndexVar) -> IndexVar, reverse: bool) -> DeltaNetwork {
        let mut constraints: Vec<_> = self
            .constraints
            .iter()
            .map(|&(a, b)| if reverse { (rename(b), rename(a)) } else { (rename(a), rename(b)) })
            .collect();
        if reverse {
            constraints.reverse();
        }
        DeltaNetwork {
            n: self.n,
            constraints,
        }
    }
}

/// Partition of `{j, k, m, n}` imposed by the surviving deltas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryStructure {
    /// `δ_jm δ_kn`
    Aligned,
    /// `δ_jk δ_mn`
    Crossed,
    /// Any other partition, blocks listed explicitly.
    Other(Vec<Vec<Boundary>>),
}

impl BoundaryStructure {
    fn from_blocks(mut blocks: Vec<Vec<Boundary>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable();
        use Boundary::*;
        if blocks == vec![vec![J, K], vec![M, N]] {
            BoundaryStructure::Crossed
        } else if blocks == vec![vec![J, M], vec![K, N]] {
            BoundaryStructure::Aligned
        } else {
            BoundaryStructure::Other(blocks)
        }
    }

    pub fn blocks(&self) -> Vec<Vec<Boundary>> {
        use Boundary::*;
        match self {
            BoundaryStructure::Aligned => vec![vec![J, M], vec![K, N]],
            BoundaryStructure::Crossed => vec![vec![J, K], vec![M, N]],
            BoundaryStructure::Other(b) => b.clone(),
        }
    }

    /// Whether the labels `(j, k, m, n)` satisfy every delta.
    pub fn admits(&self, labels: [usize; 4]) -> bool {
        self.blocks().iter().all(|block| {
            let first = labels[block[0].index()];
            block.iter().all(|b| labels[b.index()] == first)
        })
    }

    /// Number of `(j, k, m, n) ∈ [1, M]⁴` admitted, as a power of `M`.
    pub fn free_labels(&self) -> u32 {
        self.blocks().len() as u32
    }
}

impl fmt::Display for BoundaryStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryStructure::Aligned => f.write_str("aligned"),
            BoundaryStructure::Crossed => f.write_str("crossed"),
            BoundaryStructure::Other(blocks) => {
                f.write_str("other:")?;
                for b in blocks {
                    let names: String = b
                        .iter()
                        .map(|x| match x {
                            Boundary::J => 'j',
                            Boundary::K => 'k',
                            Boundary::M => 'm',
                            Boundary::N => 'n',
                        })
                        .collect();
                    write!(f, "[{names}]")?;
                }
                Ok(())
            }
        }
    }
}

/// `r^r_power · M^m_power · (boundary deltas)`, held symbolically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormCovariance {
    pub m_power: u32,
    pub r_power: u32,
    pub boundary: BoundaryStructure,
}

impl ClosedFormCovariance {
    pub fn with_r_power(mut self, r_power: u32) -> Self {
        self.r_power = r_power;
        self
    }

    /// Value of the element `C^{jk}_{mn}` (0-based labels).
    pub fn element(&self, dim: usize, r: f64, labels: [usize; 4]) -> f64 {
        if self.boundary.admits(labels) {
            r.powi(self.r_power as i32) * (dim as f64).powi(self.m_power as i32)
        } else {
            0.0
        }
    }

    /// Sum over all `M⁴` elements.
    pub fn total(&self, dim: usize, r: f64) -> f64 {
        r.powi(self.r_power as i32)
            * (dim as f64).powi((self.m_power + self.boundary.free_labels()) as i32)
    }

    /// Exact integer total for `r = 1`.
    pub fn total_unit_scale(&self, dim: usize) -> Option<u128> {
        (dim as u128).checked_pow(self.m_power + self.boundary.free_labels())
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Contracts the network: one factor of `M` per boundary-free component, and
/// the boundary partition from components holding boundary labels.
///
/// The returned `r_power` is zero; callers attach the moment scale.
pub fn contract(network: &DeltaNetwork) -> ClosedFormCovariance {
    let vars = network.variables();
    let index: BTreeMap<IndexVar, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut dsu = DisjointSet::new(vars.len());
    for (a, b) in network.constraints() {
        dsu.union(index[a], index[b]);
    }
    let mut components: BTreeMap<usize, Vec<Boundary>> = BTreeMap::new();
    for (i, &v) in vars.iter().enumerate() {
        let root = dsu.find(i);
        let entry = components.entry(root).or_default();
        if let Some(b) = network.boundary_of(v) {
            entry.push(b);
        }
    }
    let m_power = components.values().filter(|b| b.is_empty()).count() as u32;
    let mut blocks: Vec<Vec<Boundary>> = components.into_values().filter(|b| !b.is_empty()).collect();
    // Boundaries absent from every delta are unconstrained singletons.
    for b in Boundary::ALL {
        if !blocks.iter().any(|blk| blk.contains(&b)) {
            blocks.push(vec![b]);
        }
    }
    ClosedFormCovariance {
        m_power,
        r_power: 0,
        boundary: BoundaryStructure::from_blocks(blocks),
    }
}

/// The diffusive network left after the `v` sums:
/// `δ(u_{α₁-1}, v₀) δ(v_N, u_{α_N}) Π_q δ(u_{α_{q+1}-1}, u_{α_q})`.
pub fn diffusive_network(alpha: &Permutation) -> DeltaNetwork {
    let a = alpha.as_slice();
    let n = a.len();
    let mut constraints = Vec::with_capacity(n + 1);
    constraints.push((IndexVar::U(a[0]), IndexVar::V(0)));
    constraints.push((IndexVar::V(n), IndexVar::U(a[n - 1] + 1)));
    for q in 0..n - 1 {
        constraints.push((IndexVar::U(a[q + 1]), IndexVar::U(a[q] + 1)));
    }
    DeltaNetwork::new(n, constraints).expect("diffusive network is well formed")
}

/// One term of the ballistic expansion. Factor `q` (0-based) takes the
/// mean-product deltas `δ(u_{α_q-1}, u_{α_q}) δ(v_{q-1}, v_q)` unless it is
/// in `gamma`, where it takes the fluctuation deltas
/// `δ(u_{α_q-1}, v_{q-1}) δ(u_{α_q}, v_q)`.
pub fn ballistic_term_network(alpha: &Permutation, gamma: &[bool]) -> Result<DeltaNetwork> {
    let a = alpha.as_slice();
    if gamma.len() != a.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: gamma.len(),
        });
    }
    let mut constraints = Vec::with_capacity(2 * a.len());
    for (q, &in_gamma) in gamma.iter().enumerate() {
        let (u_lo, u_hi) = (IndexVar::U(a[q]), IndexVar::U(a[q] + 1));
        let (v_lo, v_hi) = (IndexVar::V(q), IndexVar::V(q + 1));
        if in_gamma {
            constraints.push((u_lo, v_lo));
            constraints.push((u_hi, v_hi));
        } else {
            constraints.push((u_lo, u_hi));
            constraints.push((v_lo, v_hi));
        }
    }
    DeltaNetwork::new(a.len(), constraints)
}

/// Closed form of the diffusive covariance between `X¹…Xᴺ` and its
/// `alpha`-permutation: `r^{2N} M^K` on an aligned or crossed support.
pub fn covariance_closed_form(alpha: &Permutation) -> ClosedFormCovariance {
    contract(&diffusive_network(alpha)).with_r_power(2 * alpha.len() as u32)
}

/// A full `M⁴` table of covariance elements `C^{jk}_{mn}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceTable {
    pub dim: usize,
    /// Row-major over `(j, k, m, n)`.
    pub values: Vec<f64>,
}

impl CovarianceTable {
    pub fn get(&self, j: usize, k: usize, m: usize, n: usize) -> f64 {
        let d = self.dim;
        self.values[((j * d + k) * d + m) * d + n]
    }

    pub fn one_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Yields `([j, k, m, n], value)` for every element.
    pub fn iter(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        let d = self.dim;
        self.values.iter().enumerate().map(move |(i, &v)| {
            ([i / (d * d * d), (i / (d * d)) % d, (i / d) % d, i % d], v)
        })
    }
}

/// Sums every internal index tuple of the covariance between the products
/// along `first` and `second` (pool labels, each without repeats), using
/// the analytic second moments of the regime.
///
/// Diffusive: `⟨X_ab X_cd⟩ = r² δ_ac δ_bd`, `⟨X⟩ = 0`.
/// Ballistic: `⟨X_ab X_cd⟩ = δ_ab δ_cd + r² δ_ac δ_bd`, `⟨X_ab⟩ = δ_ab`.
pub fn brute_force_covariance(
    first: &[usize],
    second: &[usize],
    dim: usize,
    r: f64,
    regime: Regime,
) -> Result<CovarianceTable> {
    let n = first.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if second.len() != n {
        return Err(Error::SizeMismatch {
            left: n,
            right: second.len(),
        });
    }
    for seq in [first, second] {
        let mut s = seq.to_vec();
        s.sort_unstable();
        if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::RepeatedLabel { label: w[0] });
        }
    }
    if dim == 0 {
        return Err(Error::InvalidEnsemble("dimension must be positive".into()));
    }
    let work = (dim as u128).checked_pow(2 * (n as u32 - 1)).unwrap_or(u128::MAX);
    if work > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleTooLarge {
            work,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    // partner[p] = position in `second` holding the same label as first[p].
    let partner: Vec<Option<usize>> = first
        .iter()
        .map(|l| second.iter().position(|x| x == l))
        .collect();
    let unpaired_second: Vec<usize> = (0..n)
        .filter(|&q| !first.contains(&second[q]))
        .collect();

    let r2 = r * r;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let moment = |a: usize, b: usize, c: usize, d: usize| match regime {
        Regime::Diffusive => r2 * delta(a, c) * delta(b, d),
        Regime::Ballistic => delta(a, b) * delta(c, d) + r2 * delta(a, c) * delta(b, d),
    };
    let mean = |a: usize, b: usize| match regime {
        Regime::Diffusive => 0.0,
        Regime::Ballistic => delta(a, b),
    };

    let internal = n - 1;
    let inner = (dim as u64).pow(2 * internal as u32);
    let elements = dim.pow(4);
    let values = (0..elements)
        .into_par_iter()
        .map(|e| {
            let (j, k, m, nn) = (e / (dim * dim * dim), (e / (dim * dim)) % dim, (e / dim) % dim, e % dim);
            let mut u = vec![0usize; n + 1];
            let mut v = vec![0usize; n + 1];
            u[0] = j;
            u[n] = k;
            v[0] = m;
            v[n] = nn;
            let mut acc = 0.0;
            for t in 0..inner {
                // odometer over u_1..u_{N-1}, v_1..v_{N-1}
                let mut rest = t;
                for i in 1..n {
                    u[i] = (rest % dim as u64) as usize;
                    rest /= dim as u64;
                }
                for i in 1..n {
                    v[i] = (rest % dim as u64) as usize;
                    rest /= dim as u64;
                }
                let mut joint = 1.0;
                for p in 0..n {
                    joint *= match partner[p] {
                        Some(q) => moment(u[p], u[p + 1], v[q], v[q + 1]),
                        None => mean(u[p], u[p + 1]),
                    };
                    if joint == 0.0 {
                        break;
                    }
                }
                if joint != 0.0 {
                    for &q in &unpaired_second {
                        joint *= mean(v[q], v[q + 1]);
                    }
                }
                let mut separate = 1.0;
                for p in 0..n {
                    separate *= mean(u[p], u[p + 1]) * mean(v[p], v[p + 1]);
                    if separate == 0.0 {
                        break;
                    }
                }
                acc += joint - separate;
            }
            acc
        })
        .collect();
    Ok(CovarianceTable { dim, values })
}

/// Brute-force covariance between `(1, .., N)` and `alpha`.
pub fn brute_force_permuted(alpha: &Permutation, dim: usize, r: f64, regime: Regime) -> Result<CovarianceTable> {
    let first: Vec<usize> = (0..alpha.len()).collect();
    brute_force_covariance(&first, alpha.as_slice(), dim, r, regime)
}

/// One surviving term `r^{2|γ|} × (contracted deltas)` of the ballistic expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallisticTerm {
    /// 1-based factor positions taking the fluctuation pairing.
    pub gamma: Vec<usize>,
    pub covariance: ClosedFormCovariance,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallisticExpansion {
    pub total: f64,
    /// `coefficients[g]` is the exact integer multiplying `r^{2g}` in the
    /// element-summed covariance.
    pub coefficients: Vec<u128>,
    pub terms: Vec<BallisticTerm>,
}

impl BallisticExpansion {
    /// Element `C^{jk}_{mn}` reassembled from the terms.
    pub fn element(&self, dim: usize, r: f64, labels: [usize; 4]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.covariance.element(dim, r, labels))
            .sum()
    }
}

/// Expands the ballistic covariance over all nonempty subsets `γ` of factor
/// positions and contracts each term. The `γ = ∅` term equals the
/// subtracted mean product and is dropped.
pub fn ballistic_expansion(alpha: &Permutation, dim: usize, r: f64) -> Result<BallisticExpansion> {
    let n = alpha.len();
    if n > BALLISTIC_MAX_N {
        return Err(Error::ExpansionTooLarge {
            n,
            max: BALLISTIC_MAX_N,
        });
    }
    let mut coefficients = vec![0u128; n + 1];
    let mut terms = Vec::with_capacity((1usize << n) - 1);
    let mut gamma = vec![false; n];
    for mask in 1u32..(1u32 << n) {
        for (q, g) in gamma.iter_mut().enumerate() {
            *g = mask & (1 << q) != 0;
        }
        let size = mask.count_ones();
        let covariance = contract(&ballistic_term_network(alpha, &gamma)?).with_r_power(2 * size);
        let weight = covariance
            .total_unit_scale(dim)
            .ok_or(Error::Overflow("ballistic coefficient"))?;
        coefficients[size as usize] = coefficients[size as usize]
            .checked_add(weight)
            .ok_or(Error::Overflow("ballistic coefficient"))?;
        let total = covariance.total(dim, r);
        terms.push(BallisticTerm {
            gamma: (0..n).filter(|&q| gamma[q]).map(|q| q + 1).collect(),
            covariance,
            total,
        });
    }
    // Horner in r² over the exact coefficients.
    let r2 = r * r;
    let total = coefficients.iter().rev().fold(0.0, |acc, &c| acc * r2 + c as f64);
    Ok(BallisticExpansion {
        total,
        coefficients,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permutations::{boundary_cycle_relation, count_k, BoundaryRelation};
    use IndexVar::{U, V};

    fn p1(v: &[usize]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    #[test]
    fn diffusive_network_identity() {
        let net = diffusive_network(&p1(&[1, 2, 3]));
        assert_eq!(
            net.constraints(),
            &[(U(0), V(0)), (V(3), U(3)), (U(1), U(1)), (U(2), U(2))]
        );
        assert_eq!(net.num_internal_u(), 2);
        assert_eq!(net.num_internal_v(), 0);
    }

    #[test]
    fn diffusive_network_swap() {
        let net = diffusive_network(&p1(&[2, 1]));
        assert_eq!(net.constraints(), &[(U(1), V(0)), (V(2), U(1)), (U(0), U(2))]);
    }

    #[test]
    fn contraction_examples() {
        let c = contract(&diffusive_network(&p1(&[1, 2])));
        assert_eq!((c.m_power, &c.boundary), (1, &BoundaryStructure::Aligned));
        let c = contract(&diffusive_network(&p1(&[2, 1])));
        assert_eq!((c.m_power, &c.boundary), (0, &BoundaryStructure::Crossed));
        let lone = DeltaNetwork::new(3, vec![(U(1), U(1))]).unwrap();
        let c = contract(&lone);
        assert_eq!(c.m_power, 1);
        assert_eq!(c.boundary.free_labels(), 4);
    }

    #[test]
    fn malformed_networks() {
        assert!(DeltaNetwork::new(3, vec![(U(1), U(2))]).is_err());
        assert!(DeltaNetwork::new(3, vec![(U(0), V(0)), (U(0), V(3))]).is_err());
        assert!(DeltaNetwork::new(2, vec![(U(5), U(5))]).is_err());
        assert!(DeltaNetwork::new(0, vec![]).is_err());
    }

    #[test]
    fn closed_form_totals() {
        assert_eq!(covariance_closed_form(&p1(&[2, 1])).total(3, 1.0), 9.0);
        assert_eq!(covariance_closed_form(&p1(&[1, 2])).total(3, 1.0), 27.0);
        assert_eq!(covariance_closed_form(&p1(&[2, 3, 1])).total(2, 0.5), 0.125);
    }

    #[test]
    fn brute_force_swap_is_crossed() {
        let table = brute_force_permuted(&p1(&[2, 1]), 2, 1.0, Regime::Diffusive).unwrap();
        for ([j, k, m, n], v) in table.iter() {
            let expect = if j == k && m == n { 1.0 } else { 0.0 };
            assert_eq!(v, expect);
        }
        assert_eq!(table.one_norm(), 4.0);
    }

    #[test]
    fn brute_force_partial_overlap_vanishes() {
        let table = brute_force_covariance(&[0, 1, 2], &[1, 5, 0], 2, 1.0, Regime::Diffusive).unwrap();
        assert!(table.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn brute_force_single_ballistic_factor() {
        let table = brute_force_permuted(&p1(&[1]), 2, 1.0, Regime::Ballistic).unwrap();
        for ([j, k, m, n], v) in table.iter() {
            let expect = if j == m && k == n { 1.0 } else { 0.0 };
            assert_eq!(v, expect);
        }
    }

    #[test]
    fn brute_force_limits() {
        let big = Permutation::identity(6).unwrap();
        assert!(matches!(
            brute_force_permuted(&big, 8, 1.0, Regime::Diffusive),
            Err(Error::OracleTooLarge { .. })
        ));
        assert!(brute_force_covariance(&[0, 0], &[0, 1], 2, 1.0, Regime::Diffusive).is_err());
    }

    #[test]
    fn ballistic_examples() {
        let e = ballistic_expansion(&p1(&[1]), 3, 1.0).unwrap();
        assert_eq!(e.total, 9.0);
        assert_eq!(e.terms.len(), 1);
        let alpha = p1(&[1, 2]);
        let e = ballistic_expansion(&alpha, 2, 1.0).unwrap();
        let brute = brute_force_permuted(&alpha, 2, 1.0, Regime::Ballistic).unwrap();
        assert_eq!(e.total, brute.sum());
        assert_eq!(ballistic_expansion(&alpha, 2, 0.0).unwrap().total, 0.0);
        assert!(ballistic_expansion(&Permutation::identity(21).unwrap(), 2, 1.0).is_err());
    }

    #[test]
    fn structure_follows_boundary_relation_for_small_n() {
        for alpha in [p1(&[2, 1]), p1(&[2, 3, 1]), p1(&[3, 1, 2]), p1(&[1, 3, 2])] {
            let c = covariance_closed_form(&alpha);
            assert_eq!(c.m_power as usize, count_k(&alpha));
            let want = match boundary_cycle_relation(&alpha) {
                BoundaryRelation::SameCycle => BoundaryStructure::Crossed,
                BoundaryRelation::DifferentCycles => BoundaryStructure::Aligned,
            };
            assert_eq!(c.boundary, want, "alpha = {alpha}");
        }
    }
}
