//! Set partitions and the moment / cumulant / correlation algebra built on them.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::numerics::jackknife_sums;

/// Largest ground set accepted by [`enumerate_partitions`].
pub const MAX_GROUND: usize = 10;

/// Partition of `{0, .., m-1}` with blocks sorted internally and ordered by least element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetPartition {
    m: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Canonicalizes the given blocks; fails unless they partition `{0..m-1}`.
    pub fn new(m: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; m];
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(Error::Input("empty block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= m || seen[i] {
                    return Err(Error::Input(format!("element {i} out of range or repeated")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Input("blocks do not cover the ground set".into()));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { m, blocks })
    }

    fn from_rgs(rgs: &[usize]) -> Self {
        let k = rgs.iter().copied().max().map_or(0, |x| x + 1);
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        Self { m: rgs.len(), blocks }
    }

    pub fn ground_size(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// All partitions of an `m`-set, generated as restricted growth strings.
pub fn enumerate_partitions(m: usize) -> Result<Vec<SetPartition>> {
    if !(1..=MAX_GROUND).contains(&m) {
        return Err(Error::SizeGuard(format!("partition ground size {m} outside 1..={MAX_GROUND}")));
    }
    Ok(partitions_unchecked(m))
}

fn partitions_unchecked(m: usize) -> Vec<SetPartition> {
    if m == 0 {
        return vec![SetPartition { m: 0, blocks: Vec::new() }];
    }
    let mut out = Vec::new();
    let mut a = vec![0usize; m];
    // b[i] = 1 + max(a[0..i])
    let mut b = vec![1usize; m];
    loop {
        out.push(SetPartition::from_rgs(&a));
        let mut i = m - 1;
        while i > 0 && a[i] == b[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        a[i] += 1;
        for j in i + 1..m {
            a[j] = 0;
            b[j] = b[i].max(a[i] + 1);
        }
    }
    out
}

/// Outer partition `ρ` of the blocks of an inner partition `π`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedPartition {
    pub inner: SetPartition,
    pub outer: SetPartition,
}

impl NestedPartition {
    pub fn new(inner: SetPartition, outer: SetPartition) -> Result<Self> {
        if outer.ground_size() != inner.len() {
            return Err(Error::Input(format!(
                "outer partition acts on {} items but inner has {} blocks",
                outer.ground_size(),
                inner.len()
            )));
        }
        Ok(Self { inner, outer })
    }

    /// Number of inner blocks in each outer block.
    pub fn outer_sizes(&self) -> Vec<usize> {
        self.outer.block_sizes()
    }
}

fn falling_ratio(s: usize, n: i128) -> Ratio<i128> {
    let mut p = Ratio::from_integer(1);
    for i in 1..s as i128 {
        p *= Ratio::new(n - i, n);
    }
    p
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

/// `K_N(ρ) = Σ_{σ⊢ρ} (-1)^{|σ|-1}(|σ|-1)! Π_{C∈σ} Π_{i<s_C} (1 - i/N)` with `s_C` the
/// number of inner blocks gathered in `C`; evaluated exactly in rationals.
pub fn coefficient_k_n(rho: &NestedPartition, n: usize) -> Result<f64> {
    let ground = rho.inner.ground_size();
    if n < ground.max(1) {
        return Err(Error::Input(format!("N = {n} smaller than ground size {ground}")));
    }
    Ok(k_n_from_sizes(&rho.outer_sizes(), n))
}

pub(crate) fn k_n_from_sizes(sizes: &[usize], n: usize) -> f64 {
    let r = k_n_rational(sizes, n as i128);
    *r.numer() as f64 / *r.denom() as f64
}

fn k_n_rational(sizes: &[usize], n: i128) -> Ratio<i128> {
    let mut total = Ratio::from_integer(0);
    for sigma in partitions_unchecked(sizes.len()) {
        let k = sigma.len();
        let sign = if k % 2 == 1 { 1 } else { -1 };
        let mut term = Ratio::from_integer(sign * factorial(k - 1));
        for c in sigma.blocks() {
            let s: usize = c.iter().map(|&d| sizes[d]).sum();
            term *= falling_ratio(s, n);
        }
        total += term;
    }
    total
}

/// Signed block-size coefficients `(sizes, Σ (-1)^{|π|-1}(|π|-1)!)` of the cumulant
/// expansion of order `m`, grouped by the sorted multiset of block sizes.
pub fn cumulant_coefficients(m: usize) -> Vec<(Vec<usize>, i128)> {
    group_by_sizes(m, |k| if k % 2 == 1 { factorial(k - 1) } else { -factorial(k - 1) })
}

/// Multiplicities `(sizes, #partitions)` of the cluster expansion of order `m`.
pub fn cluster_coefficients(m: usize) -> Vec<(Vec<usize>, i128)> {
    group_by_sizes(m, |_| 1)
}

fn group_by_sizes(m: usize, weight: impl Fn(usize) -> i128) -> Vec<(Vec<usize>, i128)> {
    let mut map: BTreeMap<Vec<usize>, i128> = BTreeMap::new();
    for p in partitions_unchecked(m) {
        let mut sizes = p.block_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        *map.entry(sizes).or_insert(0) += weight(p.len());
    }
    map.into_iter().rev().collect()
}

/// Raw moments `μ_1..μ_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector(pub Vec<f64>);

/// Cumulants `κ_1..κ_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantVector(pub Vec<f64>);

pub fn moments_to_cumulants(mu: &MomentVector) -> CumulantVector {
    let m = &mu.0;
    CumulantVector((1..=m.len()).map(|k| apply(&cumulant_coefficients(k), |s| m[s - 1])).collect())
}

pub fn cumulants_to_moments(kappa: &CumulantVector) -> MomentVector {
    let k = &kappa.0;
    MomentVector((1..=k.len()).map(|j| apply(&cluster_coefficients(j), |s| k[s - 1])).collect())
}

fn apply(coeffs: &[(Vec<usize>, i128)], value: impl Fn(usize) -> f64) -> f64 {
    coeffs.iter().map(|(sizes, c)| *c as f64 * sizes.iter().map(|&s| value(s)).product::<f64>()).sum()
}

/// `∫φ^{⊗m}G^m` from the marginal pairings `M(ℓ) = ∫φ^{⊗ℓ}F^ℓ`.
pub fn correlation_pairing_from_marginal_pairings(marg: &BTreeMap<usize, f64>, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Input("order must be at least 1".into()));
    }
    for l in 1..=m {
        if !marg.contains_key(&l) {
            return Err(Error::Input(format!("missing marginal pairing for ℓ = {l}")));
        }
    }
    Ok(apply(&cumulant_coefficients(m), |s| marg[&s]))
}

/// Cluster re-expansion: `∫φ^{⊗m}F^m = Σ_π Π_B ∫φ^{⊗|B|}G^{|B|}`.
pub fn marginal_pairing_from_correlation_pairings(corr: &BTreeMap<usize, f64>, m: usize) -> Result<f64> {
    for l in 1..=m {
        if !corr.contains_key(&l) {
            return Err(Error::Input(format!("missing correlation pairing for ℓ = {l}")));
        }
    }
    Ok(apply(&cluster_coefficients(m), |s| corr[&s]))
}

/// Connected pairing `∫(⊗_i φ^{p_i}) G^{s}` for mixed powers, from marginal pairings
/// `marginal(q) = ∫(⊗_i φ^{q_i}) F^{|q|}` (argument sorted descending).
pub fn connected_mixed_pairing(powers: &[u32], marginal: &impl Fn(&[u32]) -> f64) -> f64 {
    let mut total = 0.0;
    for tau in partitions_unchecked(powers.len()) {
        let k = tau.len();
        let c = if k % 2 == 1 { factorial(k - 1) } else { -factorial(k - 1) } as f64;
        let prod: f64 = tau
            .blocks()
            .iter()
            .map(|e| {
                let mut q: Vec<u32> = e.iter().map(|&i| powers[i]).collect();
                q.sort_unstable_by(|a, b| b.cmp(a));
                marginal(&q)
            })
            .product();
        total += c * prod;
    }
    total
}

/// Unbiased cumulant estimate with jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KStat {
    pub value: f64,
    pub stderr: f64,
}

/// Fisher k-statistic from power sums of centred data over `n` samples.
pub(crate) fn k_stat_from_sums(s: &[f64], n: usize, m: usize, shift: f64) -> f64 {
    let nf = n as f64;
    let d = s[0] / nf;
    let (a2, a3, a4) = (s[1] / nf, s[2] / nf, s[3] / nf);
    let m2 = a2 - d * d;
    let m3 = a3 - 3.0 * d * a2 + 2.0 * d * d * d;
    let m4 = a4 - 4.0 * d * a3 + 6.0 * d * d * a2 - 3.0 * d.powi(4);
    match m {
        1 => shift + d,
        2 => nf / (nf - 1.0) * m2,
        3 => nf * nf / ((nf - 1.0) * (nf - 2.0)) * m3,
        _ => nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0)),
    }
}

/// Centred power features `(y-c)^1..(y-c)^4` for each sample, with `c` the sample mean.
pub(crate) fn centred_features(samples: &[f64]) -> (Vec<f64>, f64) {
    let c = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut f = Vec::with_capacity(4 * samples.len());
    for &y in samples {
        let e = y - c;
        f.extend_from_slice(&[e, e * e, e * e * e, e * e * e * e]);
    }
    (f, c)
}

/// k-statistic of order `m ≤ 4` with delete-one jackknife standard error.
pub fn k_statistics(samples: &[f64], m: usize) -> Result<KStat> {
    if !(1..=4).contains(&m) {
        return Err(Error::Input(format!("k-statistic order {m} outside 1..=4")));
    }
    if samples.len() <= m {
        return Err(Error::InsufficientData { need: m + 1, got: samples.len() });
    }
    let (feat, c) = centred_features(samples);
    let (value, stderr) = jackknife_sums(&feat, 4, |s, n| k_stat_from_sums(s, n, m, c));
    Ok(KStat { value, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_and_validation() {
        let p = SetPartition::new(4, vec![vec![3, 1], vec![0], vec![2]]).unwrap();
        assert_eq!(p.blocks(), &[vec![0], vec![1, 3], vec![2]]);
        assert!(SetPartition::new(3, vec![vec![0, 1]]).is_err());
        assert!(SetPartition::new(2, vec![vec![0, 1], vec![1]]).is_err());
    }

    #[test]
    fn size_guard() {
        assert!(matches!(enumerate_partitions(0), Err(Error::SizeGuard(_))));
        assert!(matches!(enumerate_partitions(11), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn k_n_small_cases() {
        let single = NestedPartition::new(
            SetPartition::new(1, vec![vec![0]]).unwrap(),
            SetPartition::new(1, vec![vec![0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(coefficient_k_n(&single, 7).unwrap(), 1.0);
        assert!(coefficient_k_n(&single, 0).is_err());
    }

    #[test]
    fn k_stat_rejects_tiny_samples() {
        assert!(matches!(k_statistics(&[1.0, 2.0, 3.0], 3), Err(Error::InsufficientData { .. })));
    }
}
