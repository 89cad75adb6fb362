//! Exact frequencies `ν(K, N)` of each correlation class over `S_N`.
//!
//! [`enumerate_nu`] walks every permutation of `N` elements. The work is cut
//! into contiguous lexicographic rank intervals, each started by unranking,
//! so counts do not depend on how many workers run or how chunks are sized.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutations::{count_k_slice, sigma_from_alpha, Permutation};

/// Largest `N` enumerated without opting in.
pub const DEFAULT_MAX_N: usize = 11;
/// Largest `N` enumerated at all (13! ≈ 6.2e9 permutations).
pub const LARGE_MAX_N: usize = 13;

pub fn factorial(n: usize) -> Result<u64> {
    (1..=n as u64).try_fold(1u64, |acc, i| acc.checked_mul(i).ok_or(Error::Overflow("factorial")))
}

/// Binomial coefficient; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(acc).map_err(|_| Error::Overflow("binomial"))
}

/// Writes the permutation of lexicographic rank `rank` into `out`.
pub fn unrank_lexicographic(n: usize, mut rank: u64, out: &mut Vec<usize>) -> Result<()> {
    let total = factorial(n)?;
    if rank >= total {
        return Err(Error::Parse(format!("rank {rank} >= {n}!")));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    out.clear();
    for i in (0..n).rev() {
        let block = factorial(i)?;
        let idx = (rank / block) as usize;
        rank %= block;
        out.push(pool.remove(idx));
    }
    Ok(())
}

/// Advances `perm` to its lexicographic successor; `false` at the last one.
pub fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Exact counts `ν(K, N)` for `K = 0..N-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub n: usize,
    pub counts: Vec<u64>,
}

impl FrequencyTable {
    pub fn get(&self, k: usize) -> Option<u64> {
        self.counts.get(k).copied()
    }

    pub fn total(&self) -> Result<u64> {
        self.counts
            .iter()
            .try_fold(0u64, |a, &c| a.checked_add(c).ok_or(Error::Overflow("row sum")))
    }

    pub fn relative(&self, k: usize) -> Result<RelativeFrequency> {
        relative_frequency(self, k)
    }
}

/// `ν(K, N) / N!`, kept as an exact ratio plus its float value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeFrequency {
    pub n: usize,
    pub k: usize,
    pub count: u64,
    pub total: u64,
    pub value: f64,
}

pub fn relative_frequency(table: &FrequencyTable, k: usize) -> Result<RelativeFrequency> {
    let count = table.get(k).ok_or(Error::KOutOfRange {
        k,
        n: table.n,
        max: table.n - 1,
    })?;
    let total = factorial(table.n)?;
    Ok(RelativeFrequency {
        n: table.n,
        k,
        count,
        total,
        value: count as f64 / total as f64,
    })
}

#[derive(Clone, Debug)]
pub struct EnumerationOptions {
    /// Permits `N` up to [`LARGE_MAX_N`].
    pub allow_large: bool,
    /// Permutations per work unit.
    pub chunk_size: u64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            allow_large: false,
            chunk_size: 1 << 15,
        }
    }
}

pub fn enumerate_nu(n: usize) -> Result<FrequencyTable> {
    enumerate_nu_with(n, &EnumerationOptions::default(), None)
}

/// Progress callback, called with `(permutations done, total)`.
pub type Progress<'a> = &'a (dyn Fn(u64, u64) + Sync);

pub fn enumerate_nu_with(
    n: usize,
    opts: &EnumerationOptions,
    progress: Option<Progress<'_>>,
) -> Result<FrequencyTable> {
    let max = if opts.allow_large { LARGE_MAX_N } else { DEFAULT_MAX_N };
    if n == 0 || n > max {
        let hint = if !opts.allow_large && n <= LARGE_MAX_N && n > 0 {
            " (larger N needs the allow-large option)"
        } else {
            ""
        };
        return Err(Error::EnumerationRange { n, max, hint });
    }
    let total = factorial(n)?;
    let chunk = opts.chunk_size.max(1);
    let chunks = total.div_ceil(chunk);
    let done = AtomicU64::new(0);

    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let len = chunk.min(total - start);
            let mut perm = Vec::with_capacity(n);
            unrank_lexicographic(n, start, &mut perm)?;
            let mut scratch = vec![0usize; n + 1];
            let mut local = vec![0u64; n];
            for step in 0..len {
                local[count_k_slice(&perm, &mut scratch)] += 1;
                if step + 1 < len {
                    next_permutation(&mut perm);
                }
            }
            if let Some(cb) = progress {
                let d = done.fetch_add(len, Ordering::Relaxed) + len;
                cb(d, total);
            }
            Ok(local)
        })
        .try_reduce(
            || vec![0u64; n],
            |a, b| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| x.checked_add(*y).ok_or(Error::Overflow("count merge")))
                    .collect()
            },
        )?;
    Ok(FrequencyTable { n, counts })
}

/// The closed forms for `K ∈ {N-1, N-2, N-3, 0}`; `None` for other `K`.
///
/// Where several apply (small `N`) they agree; the first match is returned.
pub fn nu_closed_form(k: usize, n: usize) -> Result<Option<u64>> {
    if n == 0 || k >= n {
        return Err(Error::KOutOfRange {
            k,
            n,
            max: n.saturating_sub(1),
        });
    }
    let nn = n as u64;
    if k == n - 1 {
        return Ok(Some(1));
    }
    if k + 2 == n {
        return Ok(Some(nn - 1));
    }
    if k + 3 == n {
        let j = nn - 3;
        let v = [binomial(nn - 1, j)?, binomial(nn, j)?, binomial(nn + 1, j)?]
            .into_iter()
            .try_fold(0u64, |a, b| a.checked_add(b))
            .ok_or(Error::Overflow("closed form"))?;
        return Ok(Some(v));
    }
    if k == 0 {
        return Ok(Some(factorial(n)? / ((nn + 2) / 2)));
    }
    Ok(None)
}

/// Cycle-structure classes of `sigma` when `K = N-3`, named by which
/// non-singleton cycles carry the boundary elements `0` and `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CycleClass {
    /// `(0 p)(q N)`
    B1_1,
    /// `(0 p)(q r)`
    B1_2,
    /// `(p q)(r N)`
    B1_3,
    /// `(p q)(r s)`
    B1_4,
    /// `(0 p q)`
    B2_1,
    /// `(p q N)`
    B2_2,
    /// `(p q r)`
    B2_3,
}

impl CycleClass {
    pub const ALL: [CycleClass; 7] = [
        CycleClass::B1_1,
        CycleClass::B1_2,
        CycleClass::B1_3,
        CycleClass::B1_4,
        CycleClass::B2_1,
        CycleClass::B2_2,
        CycleClass::B2_3,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CycleClass::B1_1 => "B1.1",
            CycleClass::B1_2 => "B1.2",
            CycleClass::B1_3 => "B1.3",
            CycleClass::B1_4 => "B1.4",
            CycleClass::B2_1 => "B2.1",
            CycleClass::B2_2 => "B2.2",
            CycleClass::B2_3 => "B2.3",
        }
    }

    /// Number of admissible permutations in the class.
    pub fn expected_total(self, n: usize) -> u64 {
        let m = n as u64 - 1;
        // falling products of (N-1)(N-2)... divided by the symmetry factor
        let fall = |terms: u64| (0..terms).map(|i| m.saturating_sub(i)).product::<u64>();
        match self {
            CycleClass::B1_1 | CycleClass::B2_1 | CycleClass::B2_2 => fall(2) / 2,
            CycleClass::B1_2 | CycleClass::B1_3 | CycleClass::B2_3 => fall(3) / 6,
            CycleClass::B1_4 => fall(4) / 24,
        }
    }
}

impl fmt::Display for CycleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Result of [`classify_cycle_structures`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n: usize,
    pub counts: BTreeMap<CycleClass, u64>,
    /// Members whose cycles break the ordering constraint listed for their class.
    pub constraint_violations: BTreeMap<CycleClass, u64>,
    /// Permutations with `K = N-3` that fit no class; zero when the
    /// classification is complete.
    pub unclassified: u64,
}

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.unclassified
    }
}

/// Classifies the non-singleton cycles of `sigma`, boundary-aware.
pub fn classify_sigma(sigma: &Permutation) -> Option<(CycleClass, bool)> {
    let n = sigma.len() - 1;
    let cycles = sigma.cycles();
    let long: Vec<&Vec<usize>> = cycles.cycles().iter().filter(|c| c.len() > 1).collect();
    let has = |c: &Vec<usize>, x| c.contains(&x);
    // Cycle in the orientation starting at `x`.
    let from = |c: &Vec<usize>, x: usize| -> Vec<usize> {
        let at = c.iter().position(|&y| y == x).expect("x in cycle");
        c[at..].iter().chain(&c[..at]).copied().collect()
    };
    match long.as_slice() {
        [a, b] if a.len() == 2 && b.len() == 2 => {
            let (zero, rest): (Vec<_>, Vec<_>) = [*a, *b].into_iter().partition(|c| has(c, 0));
            let (top, rest): (Vec<_>, Vec<_>) = rest.into_iter().partition(|c| has(c, n));
            match (zero.as_slice(), top.as_slice(), rest.as_slice()) {
                ([z], [t], []) => {
                    let p = from(z, 0)[1];
                    let q = from(t, n)[1];
                    Some((CycleClass::B1_1, q < p))
                }
                ([z], [], [o]) => {
                    let p = from(z, 0)[1];
                    // (q r) is unordered; p must sit strictly between them.
                    let (lo, hi) = (o[0].min(o[1]), o[0].max(o[1]));
                    Some((CycleClass::B1_2, lo < p && p < hi))
                }
                ([], [t], [o]) => {
                    let r = from(t, n)[1];
                    let (lo, hi) = (o[0].min(o[1]), o[0].max(o[1]));
                    Some((CycleClass::B1_3, lo < r && r < hi))
                }
                ([], [], [x, y]) => {
                    // p < s < q < r with pairs {p, q} and {r, s}: interleaved.
                    let (a0, a1) = (x[0].min(x[1]), x[0].max(x[1]));
                    let (b0, b1) = (y[0].min(y[1]), y[0].max(y[1]));
                    let crossing = (a0 < b0 && b0 < a1 && a1 < b1) || (b0 < a0 && a0 < b1 && b1 < a1);
                    Some((CycleClass::B1_4, crossing))
                }
                _ => None,
            }
        }
        [c] if c.len() == 3 => {
            let (h0, hn) = (has(c, 0), has(c, n));
            match (h0, hn) {
                // Class notation lists 3-cycles against the mapping direction:
                // `(0 p q)` is 0 -> q -> p here.
                (true, false) => {
                    let o = from(c, 0);
                    Some((CycleClass::B2_1, o[1] < o[2]))
                }
                (false, true) => {
                    let o = from(c, n);
                    Some((CycleClass::B2_2, o[1] < o[2]))
                }
                (false, false) => {
                    // `(p q r)`, p smallest: p -> r -> q, require r < q.
                    let o = from(c, *c.iter().min().expect("nonempty"));
                    Some((CycleClass::B2_3, o[1] < o[2]))
                }
                (true, true) => None,
            }
        }
        _ => None,
    }
}

/// Splits all `alpha ∈ S_N` with `K = N-3` into the seven classes.
///
/// Defined for `N >= 3` (for smaller `N` there is no `K = N-3`). Only
/// `K = N-3` is supported.
pub fn classify_cycle_structures(n: usize, k: usize) -> Result<ClassCounts> {
    if n < 3 || k + 3 != n {
        return Err(Error::Unsupported(format!(
            "cycle-structure classes are defined for K = N-3 with N >= 3 (got N = {n}, K = {k})"
        )));
    }
    if n > DEFAULT_MAX_N {
        return Err(Error::EnumerationRange {
            n,
            max: DEFAULT_MAX_N,
            hint: "",
        });
    }
    let mut counts: BTreeMap<CycleClass, u64> = CycleClass::ALL.iter().map(|&c| (c, 0)).collect();
    let mut violations = counts.clone();
    let mut unclassified = 0;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut scratch = vec![0; n + 1];
    loop {
        if count_k_slice(&perm, &mut scratch) == k {
            let alpha = Permutation::from_map(perm.clone())?;
            match classify_sigma(&sigma_from_alpha(&alpha)) {
                Some((class, ok)) => {
                    *counts.get_mut(&class).expect("all classes present") += 1;
                    if !ok {
                        *violations.get_mut(&class).expect("all classes present") += 1;
                    }
                }
                None => unclassified += 1,
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(ClassCounts {
        n,
        counts,
        constraint_violations: violations,
        unclassified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rows() {
        assert_eq!(enumerate_nu(1).unwrap().counts, vec![1]);
        assert_eq!(enumerate_nu(4).unwrap().counts, vec![8, 12, 3, 1]);
    }

    #[test]
    fn range_errors() {
        assert!(matches!(enumerate_nu(0), Err(Error::EnumerationRange { .. })));
        assert!(matches!(enumerate_nu(12), Err(Error::EnumerationRange { max: 11, .. })));
        assert!(nu_closed_form(3, 3).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(nu_closed_form(2, 5).unwrap(), Some(31));
        assert_eq!(nu_closed_form(0, 10).unwrap(), Some(604_800));
        assert_eq!(nu_closed_form(5, 7).unwrap(), Some(6));
        assert_eq!(nu_closed_form(2, 7).unwrap(), None);
    }

    #[test]
    fn overlapping_closed_forms_agree() {
        // N = 3: K = 0 is also N-3; N = 2: K = 0 is also N-2.
        let n3_a = binomial(2, 0).unwrap() + binomial(3, 0).unwrap() + binomial(4, 0).unwrap();
        assert_eq!(n3_a, factorial(3).unwrap() / 2);
        assert_eq!(nu_closed_form(0, 2).unwrap(), Some(1));
        assert_eq!(factorial(2).unwrap() / 2, 1);
    }

    #[test]
    fn relative_frequency_examples() {
        let r = enumerate_nu(2).unwrap().relative(0).unwrap();
        assert_eq!((r.count, r.total), (1, 2));
        let r = enumerate_nu(4).unwrap().relative(3).unwrap();
        assert_eq!((r.count, r.total), (1, 24));
        let r = enumerate_nu(6).unwrap().relative(0).unwrap();
        assert_eq!(r.value, 0.25);
        assert!(enumerate_nu(3).unwrap().relative(3).is_err());
    }

    #[test]
    fn unranking_matches_iteration() {
        let mut perm: Vec<usize> = (0..5).collect();
        let mut out = Vec::new();
        for rank in 0..120 {
            unrank_lexicographic(5, rank, &mut out).unwrap();
            assert_eq!(out, perm);
            next_permutation(&mut perm);
        }
        assert!(unrank_lexicographic(5, 120, &mut out).is_err());
    }

    #[test]
    fn chunking_does_not_change_counts() {
        let reference = enumerate_nu(7).unwrap();
        for chunk_size in [1, 7, 100, 5040, 1 << 20] {
            let opts = EnumerationOptions {
                chunk_size,
                ..Default::default()
            };
            assert_eq!(enumerate_nu_with(7, &opts, None).unwrap(), reference);
        }
    }

    #[test]
    fn class_counts_at_five() {
        let c = classify_cycle_structures(5, 2).unwrap();
        assert_eq!(c.counts[&CycleClass::B2_1], 6);
        assert_eq!(c.total(), 31);
        assert!(c.constraint_violations.values().all(|&v| v == 0));
        let c6 = classify_cycle_structures(6, 3).unwrap();
        assert_eq!(c6.counts[&CycleClass::B1_4], 5);
        assert!(classify_cycle_structures(5, 1).is_err());
        assert!(classify_cycle_structures(2, 0).is_err());
    }
}
