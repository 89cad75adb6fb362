//! Permutation algebra and the boundary-cycle construction.
//!
//! A sampling permutation `alpha` of `N` elements relates two cascaded
//! products that use the same pool matrices in a different order. Its
//! correlation class is read off the `(N+1)`-element permutation `sigma`
//! built by [`sigma_from_alpha`]: `K` is the number of cycles of `sigma`
//! that contain neither `0` nor `N`.
//!
//! Everything is 0-based internally. The 1-based sequences used on the
//! command line are converted by [`Permutation::from_one_based`] and
//! [`Permutation::to_one_based`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `{0, .., n-1}` in one-line form: `map[i]` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPermutation);
        }
        Ok(Permutation { map: (0..n).collect() })
    }

    /// Validates that `map` is a bijection on `0..map.len()`.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::EmptyPermutation);
        }
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n {
                return Err(Error::InvalidPermutation {
                    len: n,
                    reason: format!("value {v} out of range"),
                });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation {
                    len: n,
                    reason: format!("value {v} repeated"),
                });
            }
        }
        Ok(Permutation { map })
    }

    /// Builds a permutation from a 1-based sequence such as `(2, 3, 1)`.
    pub fn from_one_based(values: &[usize]) -> Result<Self> {
        let map = values
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| Error::InvalidPermutation {
                    len: values.len(),
                    reason: "1-based values must be positive".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_map(map)
    }

    /// Parses a comma-separated 1-based list, e.g. `"2,3,1"`.
    pub fn parse_one_based(text: &str) -> Result<Self> {
        let values = parse_label_list(text)?;
        Self::from_one_based(&values)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    /// Image of `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|v| v + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Permutation {
            map: other.map.iter().map(|&i| self.map[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// The cyclic shift `i ↦ i + 1 (mod n)`.
    pub fn shift_up(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPermutation);
        }
        Ok(Permutation {
            map: (0..n).map(|i| (i + 1) % n).collect(),
        })
    }

    /// The cyclic shift `i ↦ i - 1 (mod n)`; inverse of [`Permutation::shift_up`].
    pub fn shift_down(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPermutation);
        }
        Ok(Permutation {
            map: (0..n).map(|i| (i + n - 1) % n).collect(),
        })
    }

    pub fn cycles(&self) -> CycleDecomposition {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                cycle.push(i);
                i = self.map[i];
            }
            cycles.push(cycle);
        }
        // Each cycle starts at its smallest element because `start` increases.
        CycleDecomposition { cycles }
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    /// `+1` for even permutations, `-1` for odd ones.
    pub fn sign(&self) -> i8 {
        if (self.len() - self.cycle_count()) % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for Permutation {
    /// Writes the 1-based one-line form, e.g. `2,3,1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

/// Disjoint cycles in canonical form: smallest element first in each cycle,
/// cycles ordered by their smallest element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleDecomposition {
    cycles: Vec<Vec<usize>>,
}

impl CycleDecomposition {
    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Number of points permuted.
    pub fn degree(&self) -> usize {
        self.cycles.iter().map(Vec::len).sum()
    }

    /// Cycle type `(a_1, .., a_n)`; entry `i - 1` counts cycles of length `i`.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut a = vec![0; self.degree()];
        for c in &self.cycles {
            a[c.len() - 1] += 1;
        }
        a
    }

    /// The cycle containing `x`, if any.
    pub fn cycle_of(&self, x: usize) -> Option<&[usize]> {
        self.cycles
            .iter()
            .find(|c| c.contains(&x))
            .map(Vec::as_slice)
    }
}

impl fmt::Display for CycleDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cycles {
            f.write_str("(")?;
            for (i, x) in c.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Embeds `alpha` as the permutation `0 ↦ 0`, `i ↦ alpha(i-1) + 1` on `{0..N}`.
///
/// As a function this is the tuple `(0, α_1, .., α_N)` in 1-based values.
pub fn embed_alpha(alpha: &Permutation) -> Permutation {
    let mut map = Vec::with_capacity(alpha.len() + 1);
    map.push(0);
    map.extend(alpha.map.iter().map(|v| v + 1));
    Permutation { map }
}

/// The boundary-cycle permutation `sigma` on `{0..N}`.
///
/// With `p1 = (α_1-1, .., α_N-1, N)` and `p2 = (0, α_1, .., α_N)`,
/// `sigma(p2[i]) = p1[i]` for every position `i`.
pub fn sigma_from_alpha(alpha: &Permutation) -> Permutation {
    let mut map = vec![0; alpha.len() + 1];
    sigma_into(alpha.as_slice(), &mut map);
    Permutation { map }
}

#[inline]
fn sigma_into(alpha: &[usize], sigma: &mut [usize]) {
    let n = alpha.len();
    // position 0: p2 = 0, p1 = α_1 - 1
    sigma[0] = alpha[0];
    for i in 1..n {
        sigma[alpha[i - 1] + 1] = alpha[i];
    }
    sigma[alpha[n - 1] + 1] = n;
}

/// `sigma` assembled as the commutator `σ₋ σ₂ σ₋⁻¹ σ₂⁻¹`, where `σ₂` is
/// [`embed_alpha`] and `σ₋` is the downward cyclic shift on `N + 1` points.
///
/// Independent of [`sigma_from_alpha`]; the two must agree.
pub fn sigma_commutator_form(alpha: &Permutation) -> Permutation {
    let n1 = alpha.len() + 1;
    let down = Permutation::shift_down(n1).expect("n1 >= 2");
    let s2 = embed_alpha(alpha);
    let product = [down.clone(), s2.clone(), down.inverse(), s2.inverse()]
        .into_iter()
        .reduce(|acc, p| acc.compose(&p).expect("equal sizes"))
        .expect("non-empty");
    product
}

/// Whether the boundary elements `0` and `N` share a cycle of `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRelation {
    SameCycle,
    DifferentCycles,
}

/// Everything the correlation analysis needs from one `alpha`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaAnalysis {
    pub sigma: Permutation,
    pub cycles: CycleDecomposition,
    pub k: usize,
    pub relation: BoundaryRelation,
}

impl SigmaAnalysis {
    pub fn new(alpha: &Permutation) -> Self {
        let n = alpha.len();
        let sigma = sigma_from_alpha(alpha);
        let cycles = sigma.cycles();
        let k = cycles
            .cycles()
            .iter()
            .filter(|c| !c.contains(&0) && !c.contains(&n))
            .count();
        let relation = match cycles.cycle_of(0) {
            Some(c) if c.contains(&n) => BoundaryRelation::SameCycle,
            _ => BoundaryRelation::DifferentCycles,
        };
        SigmaAnalysis {
            sigma,
            cycles,
            k,
            relation,
        }
    }
}

/// Number of cycles of `sigma` avoiding both `0` and `N`; `0 <= K <= N-1`.
pub fn count_k(alpha: &Permutation) -> usize {
    let mut scratch = vec![0; alpha.len() + 1];
    count_k_slice(alpha.as_slice(), &mut scratch)
}

/// Allocation-free [`count_k`] for hot loops. `alpha` must be a valid
/// 0-based permutation and `scratch` must hold `alpha.len() + 1` entries.
pub fn count_k_slice(alpha: &[usize], scratch: &mut [usize]) -> usize {
    let n = alpha.len();
    debug_assert_eq!(scratch.len(), n + 1);
    sigma_into(alpha, scratch);
    // Walk cycles, marking visited entries with usize::MAX.
    let mut k = 0;
    for start in 0..=n {
        if scratch[start] == usize::MAX {
            continue;
        }
        let mut boundary = false;
        let mut i = start;
        while scratch[i] != usize::MAX {
            boundary |= i == 0 || i == n;
            let next = scratch[i];
            scratch[i] = usize::MAX;
            i = next;
        }
        if !boundary {
            k += 1;
        }
    }
    k
}

pub fn boundary_cycle_relation(alpha: &Permutation) -> BoundaryRelation {
    SigmaAnalysis::new(alpha).relation
}

/// Checks the cycle-type constraint `Σ (i-1) a_i = S - Δ + 1` on `sigma`,
/// with `S = N - K`, `Δ = 1` when `0` and `N` share a cycle and `Δ = 2`
/// otherwise. Holds for every `alpha`.
pub fn cycle_type_check(alpha: &Permutation) -> bool {
    let analysis = SigmaAnalysis::new(alpha);
    let lhs: usize = analysis
        .cycles
        .cycle_type()
        .iter()
        .enumerate()
        .map(|(i, a)| i * a)
        .sum();
    let s = alpha.len() - analysis.k;
    let delta = match analysis.relation {
        BoundaryRelation::SameCycle => 1,
        BoundaryRelation::DifferentCycles => 2,
    };
    // S >= 1 always, so S + 1 - Δ never underflows.
    lhs == s + 1 - delta
}

/// How labels may repeat within one sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    WithReplacement,
    WithoutReplacement,
}

/// Ordered pool labels (0-based) defining one cascaded product.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SamplingSequence {
    labels: Vec<usize>,
    mode: SamplingMode,
}

impl SamplingSequence {
    pub fn new(labels: Vec<usize>, mode: SamplingMode) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySequence);
        }
        if mode == SamplingMode::WithoutReplacement {
            let mut seen = std::collections::HashSet::with_capacity(labels.len());
            for &l in &labels {
                if !seen.insert(l) {
                    return Err(Error::RepeatedLabel { label: l });
                }
            }
        }
        Ok(SamplingSequence { labels, mode })
    }

    /// Tags the sequence without-replacement when its labels are distinct.
    pub fn infer(labels: Vec<usize>) -> Result<Self> {
        match Self::new(labels.clone(), SamplingMode::WithoutReplacement) {
            Ok(s) => Ok(s),
            Err(Error::RepeatedLabel { .. }) => Self::new(labels, SamplingMode::WithReplacement),
            Err(e) => Err(e),
        }
    }

    pub fn from_one_based(labels: &[usize], mode: SamplingMode) -> Result<Self> {
        let zero = labels
            .iter()
            .map(|&l| {
                l.checked_sub(1)
                    .ok_or_else(|| Error::Parse("1-based labels must be positive".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero, mode)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn has_distinct_labels(&self) -> bool {
        let mut sorted = self.labels.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}

/// Parses `"2, 3,1"` into `[2, 3, 1]`.
pub fn parse_label_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("expected a non-negative integer, got {t:?}")))
        })
        .collect()
}

/// The permutation `π` with `b[q] = a[π(q)]`, when `a` and `b` use the same
/// label set; `None` otherwise.
///
/// Relabelling `a` as `(1, .., N)` turns `b` into `π` (1-based), so the pair
/// can be analysed with the routines in this module.
pub fn relative_permutation(
    a: &SamplingSequence,
    b: &SamplingSequence,
) -> Result<Option<Permutation>> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    for s in [a, b] {
        if !s.has_distinct_labels() {
            let mut sorted = s.labels.clone();
            sorted.sort_unstable();
            let dup = sorted.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
            return Err(Error::RepeatedLabel {
                label: dup.unwrap_or_default(),
            });
        }
    }
    let position: HashMap<usize, usize> = a
        .labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, i))
        .collect();
    let map = b
        .labels
        .iter()
        .map(|l| position.get(l).copied())
        .collect::<Option<Vec<_>>>();
    Ok(map.map(|map| Permutation { map }))
}
