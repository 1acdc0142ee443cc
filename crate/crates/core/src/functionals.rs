//! Functionals on the Weyl chamber.
//!
//! For a signature `P` the separated pairs are `S(P) = {(i, j) : i <= p < j for some p in P}`
//! and the roots are `alpha_{ij}(a) = a_i - a_j`. The Falconer functional
//! `F_r(a)` is the cheapest way to buy `r` units of coefficient mass at unit
//! prices `alpha_{ij}(a)` with each coefficient in `[0, 1]`; the Lyapunov
//! functional `L_h(a)` is the most mass a budget `h` buys. Both linear
//! programs are solved greedily over the roots sorted ascending, and
//! [`lp_oracle_falconer`] / [`lp_oracle_lyapunov`] enumerate vertex profiles
//! as an independent check.
//!
//! Pairs are reported 1-based, as `(i, j)` with `1 <= i < j <= d`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixops::WeylVector;

pub type Pair = (usize, usize);

/// Absolute slack accepted on budget arguments that should lie in `[0, D]`.
const BUDGET_SLACK: f64 = 1e-12;

/// Largest dimension accepted by the exhaustive LP oracle.
pub const ORACLE_MAX_DIM: usize = 5;

/// A non-empty, strictly increasing subset of `{1, ..., d-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    d: usize,
    ps: Vec<usize>,
}

impl Signature {
    pub fn new(d: usize, ps: impl Into<Vec<usize>>) -> Result<Self> {
        let ps = ps.into();
        if d < 2 {
            return Err(Error::InvalidSignature(format!(
                "ambient dimension {d} < 2"
            )));
        }
        if ps.is_empty() {
            return Err(Error::InvalidSignature("empty signature".into()));
        }
        if ps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSignature(format!(
                "{ps:?} is not strictly increasing"
            )));
        }
        if ps[0] == 0 || *ps.last().unwrap() >= d {
            return Err(Error::InvalidSignature(format!(
                "{ps:?} not contained in 1..={}",
                d - 1
            )));
        }
        Ok(Self { d, ps })
    }

    /// The full flag signature `{1, ..., d-1}`.
    pub fn full(d: usize) -> Result<Self> {
        Self::new(d, (1..d).collect::<Vec<_>>())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ps(&self) -> &[usize] {
        &self.ps
    }

    /// `M = #P`.
    pub fn m(&self) -> usize {
        self.ps.len()
    }

    /// `p_0 = 0, p_1, ..., p_M, p_{M+1} = d`.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.ps.len() + 2);
        b.push(0);
        b.extend_from_slice(&self.ps);
        b.push(self.d);
        b
    }

    /// Block sizes `p_k - p_{k-1}` for `k = 1, ..., M+1`.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.boundaries().windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `P* = {d - p : p in P}`.
    pub fn dual(&self) -> Signature {
        let mut ps: Vec<usize> = self.ps.iter().map(|p| self.d - p).collect();
        ps.sort_unstable();
        Signature { d: self.d, ps }
    }

    /// All non-empty signatures in dimension `d`, in increasing bitmask order.
    pub fn all(d: usize) -> Vec<Signature> {
        (1u32..(1 << (d - 1)))
            .map(|mask| {
                let ps: Vec<usize> = (1..d).filter(|p| mask & (1 << (p - 1)) != 0).collect();
                Signature { d, ps }
            })
            .collect()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.ps.iter().map(|p| p.to_string()).collect();
        write!(f, "d={} P={{{}}}", self.d, ps.join(","))
    }
}

/// The separated pairs `S(P)` in lexicographic order, with the per-`p` subsets `S_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatedPairs {
    signature: Signature,
    pairs: Vec<Pair>,
}

impl SeparatedPairs {
    pub fn new(signature: &Signature) -> Self {
        let d = signature.d();
        let pairs = (1..=d)
            .flat_map(|i| ((i + 1)..=d).map(move |j| (i, j)))
            .filter(|&(i, j)| signature.ps().iter().any(|&p| i <= p && p < j))
            .collect();
        Self {
            signature: signature.clone(),
            pairs,
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// `D = #S(P)`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `S_p`, the pairs separated by `p`.
    pub fn separated_by(&self, p: usize) -> Vec<Pair> {
        self.pairs
            .iter()
            .copied()
            .filter(|&(i, j)| i <= p && p < j)
            .collect()
    }
}

/// Root values `alpha_{ij}(a) = a_i - a_j`, aligned with `pairs.pairs()`.
pub fn roots(a: &WeylVector, pairs: &SeparatedPairs) -> Vec<f64> {
    let v = a.as_slice();
    pairs
        .pairs()
        .iter()
        .map(|&(i, j)| v[i - 1] - v[j - 1])
        .collect()
}

/// Root values sorted ascending (the order of [`type_of`]).
pub fn sorted_roots(a: &WeylVector, pairs: &SeparatedPairs) -> Vec<f64> {
    let mut r = roots(a, pairs);
    r.sort_by(f64::total_cmp);
    r
}

/// `sum_{S(P)} (a_i - a_j)`.
pub fn root_sum(a: &WeylVector, pairs: &SeparatedPairs) -> f64 {
    roots(a, pairs).iter().sum()
}

/// `sum_{S_p} (a_i - a_j)`.
pub fn root_sum_separated_by(a: &WeylVector, p: usize) -> f64 {
    let v = a.as_slice();
    let mut s = 0.0;
    for i in 1..=p {
        for j in (p + 1)..=v.len() {
            s += v[i - 1] - v[j - 1];
        }
    }
    s
}

fn check_budget(r: f64, dim: usize) -> Result<f64> {
    if !(r.is_finite() && r >= -BUDGET_SLACK && r <= dim as f64 + BUDGET_SLACK) {
        return Err(Error::OutOfRange(format!(
            "budget r = {r} outside [0, {dim}]"
        )));
    }
    Ok(r.clamp(0.0, dim as f64))
}

/// Greedy Falconer functional on roots already sorted ascending.
pub fn falconer_from_sorted(sorted: &[f64], r: f64) -> f64 {
    let r = r.clamp(0.0, sorted.len() as f64);
    let whole = (r.floor() as usize).min(sorted.len());
    let frac = r - whole as f64;
    let mut s: f64 = sorted[..whole].iter().sum();
    if whole < sorted.len() && frac > 0.0 {
        s += frac * sorted[whole];
    }
    s
}

/// Greedy Lyapunov functional on roots already sorted ascending.
pub fn lyapunov_from_sorted(sorted: &[f64], h: f64) -> f64 {
    let mut budget = h.max(0.0);
    let mut mass = 0.0;
    for &cost in sorted {
        if cost <= 0.0 {
            mass += 1.0;
        } else if budget >= cost {
            budget -= cost;
            mass += 1.0;
        } else {
            mass += budget / cost;
            break;
        }
    }
    mass
}

/// `F_r^P(a)` for `0 <= r <= #S(P)`.
pub fn falconer_functional(a: &WeylVector, signature: &Signature, r: f64) -> Result<f64> {
    let pairs = SeparatedPairs::new(signature);
    let r = check_budget(r, pairs.len())?;
    Ok(falconer_from_sorted(&sorted_roots(a, &pairs), r))
}

/// `L_h^P(a)` for `h >= 0`; saturates at `#S(P)`.
pub fn lyapunov_functional(a: &WeylVector, signature: &Signature, h: f64) -> Result<f64> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::OutOfRange(format!(
            "entropy budget h = {h} must be >= 0"
        )));
    }
    let pairs = SeparatedPairs::new(signature);
    Ok(lyapunov_from_sorted(&sorted_roots(a, &pairs), h))
}

fn oracle_roots(a: &WeylVector, signature: &Signature) -> Result<Vec<f64>> {
    if signature.d() > ORACLE_MAX_DIM {
        return Err(Error::OracleTooLarge {
            d: signature.d(),
            max: ORACLE_MAX_DIM,
        });
    }
    Ok(roots(a, &SeparatedPairs::new(signature)))
}

/// Exhaustive minimisation over vertex profiles: coefficients in `{0, 1}` plus
/// at most one fractional coordinate.
pub fn lp_oracle_falconer(a: &WeylVector, signature: &Signature, r: f64) -> Result<f64> {
    let costs = oracle_roots(a, signature)?;
    let n = costs.len();
    let r = check_budget(r, n)?;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones() as f64;
        let base: f64 = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| costs[k])
            .sum();
        if ones >= r {
            best = best.min(base);
            continue;
        }
        let need = r - ones;
        if need <= 1.0 {
            for f in (0..n).filter(|k| mask & (1 << k) == 0) {
                best = best.min(base + need * costs[f]);
            }
        }
    }
    Ok(best)
}

/// Exhaustive maximisation over vertex profiles for the Lyapunov functional.
pub fn lp_oracle_lyapunov(a: &WeylVector, signature: &Signature, h: f64) -> Result<f64> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::OutOfRange(format!(
            "entropy budget h = {h} must be >= 0"
        )));
    }
    let costs = oracle_roots(a, signature)?;
    let n = costs.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let ones = mask.count_ones() as f64;
        let base: f64 = (0..n)
            .filter(|k| mask & (1 << k) != 0)
            .map(|k| costs[k])
            .sum();
        if base > h {
            continue;
        }
        best = best.max(ones);
        for f in (0..n).filter(|k| mask & (1 << k) == 0) {
            let x = if costs[f] <= 0.0 {
                1.0
            } else {
                ((h - base) / costs[f]).min(1.0)
            };
            best = best.max(ones + x);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    /// `D = #S(P)`.
    pub dimension: usize,
    /// `F_D(a)`, the right end of the range of `r -> F_r(a)`.
    pub falconer_max: f64,
    /// `max |L_{F_r(a)}(a) - r|` over the `r` grid.
    pub max_err_r: f64,
    /// `max |F_{L_h(a)}(a) - h|` over the `h` grid.
    pub max_err_h: f64,
    pub grid_points: usize,
}

/// Checks that `r -> F_r(a)` and `h -> L_h(a)` are mutually inverse on a grid.
/// Requires every root on `S(P)` to be strictly positive.
pub fn duality_check(
    a: &WeylVector,
    signature: &Signature,
    grid_points: usize,
) -> Result<DualityReport> {
    let pairs = SeparatedPairs::new(signature);
    let sorted = sorted_roots(a, &pairs);
    if let Some(zero) = sorted.iter().find(|&&v| v <= 0.0) {
        return Err(Error::Precondition(format!(
            "root value {zero} is not strictly positive"
        )));
    }
    let dim = pairs.len();
    let f_max = falconer_from_sorted(&sorted, dim as f64);
    let steps = grid_points.max(2) - 1;
    let mut max_err_r = 0.0f64;
    let mut max_err_h = 0.0f64;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let r = t * dim as f64;
        max_err_r = max_err_r
            .max((lyapunov_from_sorted(&sorted, falconer_from_sorted(&sorted, r)) - r).abs());
        let h = t * f_max;
        max_err_h = max_err_h
            .max((falconer_from_sorted(&sorted, lyapunov_from_sorted(&sorted, h)) - h).abs());
    }
    Ok(DualityReport {
        dimension: dim,
        falconer_max: f_max,
        max_err_r,
        max_err_h,
        grid_points: steps + 1,
    })
}

/// Which integer `q` carries the fractional coefficient in a restricted exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictedIndexing {
    /// `q - 1 < r <= q`, coefficient `r - q + 1` on `zeta_q` (agrees with `F_r`).
    Ceiling,
    /// `q' < r <= q' + 1`, coefficient `r - q' + 1` on `zeta_{q'}`, with `zeta_0 = 0`.
    Shifted,
}

/// An ordering of `S(P)` by non-decreasing root value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeOrder {
    order: Vec<Pair>,
}

impl TypeOrder {
    pub fn pairs(&self) -> &[Pair] {
        &self.order
    }

    /// Values `zeta_k(a)` in this type's order (not necessarily sorted for `a`).
    pub fn zetas(&self, a: &WeylVector) -> Vec<f64> {
        let v = a.as_slice();
        self.order
            .iter()
            .map(|&(i, j)| v[i - 1] - v[j - 1])
            .collect()
    }

    /// `sum_{k<q} zeta_k(a) + (dim_f - q + 1) zeta_q(a)` with `q - 1 < dim_f <= q`.
    pub fn phi(&self, a: &WeylVector, dim_f: f64) -> Result<f64> {
        let n = self.order.len();
        if !(dim_f > 0.0 && dim_f <= n as f64 + BUDGET_SLACK) {
            return Err(Error::OutOfRange(format!(
                "dimension {dim_f} outside (0, {n}]"
            )));
        }
        Ok(restricted_from_zetas(
            &self.zetas(a),
            dim_f,
            RestrictedIndexing::Ceiling,
        ))
    }

    /// The restricted exponent of a type at parameter `r` under either indexing.
    pub fn restricted_exponent(&self, a: &WeylVector, r: f64, indexing: RestrictedIndexing) -> f64 {
        restricted_from_zetas(&self.zetas(a), r, indexing)
    }
}

impl fmt::Display for TypeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .order
            .iter()
            .map(|(i, j)| format!("({i},{j})"))
            .collect();
        write!(f, "{}", parts.join("<"))
    }
}

/// Restricted exponent from `zeta` values listed in type order.
pub fn restricted_from_zetas(zetas: &[f64], r: f64, indexing: RestrictedIndexing) -> f64 {
    let n = zetas.len();
    if r <= 0.0 {
        return 0.0;
    }
    let r = r.min(n as f64);
    // q = ceil(r) so that q - 1 < r <= q
    let q = (r.ceil() as usize).clamp(1, n);
    match indexing {
        RestrictedIndexing::Ceiling => {
            zetas[..q - 1].iter().sum::<f64>() + (r - q as f64 + 1.0) * zetas[q - 1]
        }
        RestrictedIndexing::Shifted => {
            let qp = q - 1;
            if qp == 0 {
                return 0.0;
            }
            zetas[..qp - 1].iter().sum::<f64>() + (r - qp as f64 + 1.0) * zetas[qp - 1]
        }
    }
}

/// The type of `a`: pairs sorted by root value, ties broken lexicographically.
pub fn type_of(a: &WeylVector, signature: &Signature) -> TypeOrder {
    let pairs = SeparatedPairs::new(signature);
    let vals = roots(a, &pairs);
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&x, &y| match vals[x].total_cmp(&vals[y]) {
        Ordering::Equal => pairs.pairs()[x].cmp(&pairs.pairs()[y]),
        o => o,
    });
    TypeOrder {
        order: idx.into_iter().map(|k| pairs.pairs()[k]).collect(),
    }
}

/// `phi_T(a)` evaluated in the order of `type_of(a)`.
pub fn phi_t(a: &WeylVector, signature: &Signature, dim_f: f64) -> Result<f64> {
    type_of(a, signature).phi(a, dim_f)
}

/// Counting data behind the entropy-gap inequality at index `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapRecord {
    pub d: usize,
    pub ps: Vec<usize>,
    pub k: usize,
    /// `a_k(P)`.
    pub a_k: usize,
    /// `(p, b_k(p))` for `p` in `P`.
    pub b_k: Vec<(usize, usize)>,
    /// `M a_k(P) - sum_p b_k(p) - M(M-1)/2`.
    pub slack: i64,
    /// Per-step data along the enumeration `|p_1 - k| >= |p_2 - k| >= ...`.
    pub steps: Vec<GapStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapStep {
    pub p: usize,
    /// `a_k(A_i)` with `A_i = {p_1, ..., p_i}`.
    pub a_k_prefix: usize,
    pub b_k: usize,
    /// `a_k(A_i) >= b_k(p_i)`.
    pub claim_contains: bool,
    /// `a_k(A_{i+1}) >= a_k(A_i) + 1`; `None` on the last step.
    pub claim_increment: Option<bool>,
}

/// `a_k(A) = #{(i, j) : i <= a < j for some a in A, and i <= k < j}`.
pub fn count_a_k(d: usize, subset: &[usize], k: usize) -> usize {
    let mut n = 0;
    for i in 1..=k {
        for j in (k + 1)..=d {
            if subset.iter().any(|&a| i <= a && a < j) {
                n += 1;
            }
        }
    }
    n
}

/// Order of `P` by non-increasing distance to `k` (stable: ties keep increasing `p`).
pub fn distance_order(ps: &[usize], k: usize) -> Vec<usize> {
    let mut order = ps.to_vec();
    order.sort_by_key(|&p| std::cmp::Reverse(p.abs_diff(k)));
    order
}

/// Exact integer check of the entropy-gap counting at index `k`, along a given
/// enumeration of `P` (which should be a distance order for the claims to hold).
pub fn gap_combinatorics_along(
    signature: &Signature,
    k: usize,
    enumeration: &[usize],
) -> Result<GapRecord> {
    let d = signature.d();
    if k == 0 || k >= d {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", d - 1)));
    }
    let ps = signature.ps();
    let m = ps.len() as i64;
    let a_k = count_a_k(d, ps, k);
    let b_k: Vec<(usize, usize)> = ps.iter().map(|&p| (p, count_a_k(d, &[p], k))).collect();
    let b_sum: i64 = b_k.iter().map(|&(_, b)| b as i64).sum();
    let slack = m * a_k as i64 - b_sum - m * (m - 1) / 2;

    let prefix_counts: Vec<usize> = (1..=enumeration.len())
        .map(|i| count_a_k(d, &enumeration[..i], k))
        .collect();
    let steps = enumeration
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let b = count_a_k(d, &[p], k);
            GapStep {
                p,
                a_k_prefix: prefix_counts[i],
                b_k: b,
                claim_contains: prefix_counts[i] >= b,
                claim_increment: prefix_counts
                    .get(i + 1)
                    .map(|&next| next > prefix_counts[i]),
            }
        })
        .collect();
    Ok(GapRecord {
        d,
        ps: ps.to_vec(),
        k,
        a_k,
        b_k,
        slack,
        steps,
    })
}

/// [`gap_combinatorics_along`] with the stable distance order.
pub fn gap_combinatorics(signature: &Signature, k: usize) -> Result<GapRecord> {
    gap_combinatorics_along(signature, k, &distance_order(signature.ps(), k))
}

/// `dim F_P = p_1 (d - p_1) + (p_2 - p_1)(d - p_2) + ... + (p_M - p_{M-1})(d - p_M)`.
pub fn flag_dimension(signature: &Signature) -> usize {
    let b = signature.boundaries();
    let d = signature.d();
    (1..=signature.m())
        .map(|k| (b[k] - b[k - 1]) * (d - b[k]))
        .sum()
}

/// `dim X_P = d^2 - sum_k (p_k - p_{k-1})^2`.
pub fn xp_dimension(signature: &Signature) -> usize {
    let d = signature.d();
    d * d - signature.block_sizes().iter().map(|n| n * n).sum::<usize>()
}

/// `dim F_P - (M - 1)/2`.
pub fn limit_set_bound(signature: &Signature) -> f64 {
    flag_dimension(signature) as f64 - (signature.m() as f64 - 1.0) / 2.0
}

/// `dim X_P - M + 1`.
pub fn splitting_set_bound(signature: &Signature) -> f64 {
    xp_dimension(signature) as f64 - signature.m() as f64 + 1.0
}

/// `L_h(lambda)`.
pub fn lyapunov_dimension(h: f64, lambda: &WeylVector, signature: &Signature) -> Result<f64> {
    lyapunov_functional(lambda, signature, h)
}

/// `#S(P) - (sum_{S(P)} (lambda_i - lambda_j) - h) / (lambda_1 - lambda_d)`.
pub fn lyapunov_dimension_bound(h: f64, lambda: &WeylVector, signature: &Signature) -> Result<f64> {
    let v = lambda.as_slice();
    let spread = v[0] - v[v.len() - 1];
    if spread <= 0.0 {
        return Err(Error::Precondition(
            "degenerate exponents: lambda_1 = lambda_d".into(),
        ));
    }
    let pairs = SeparatedPairs::new(signature);
    Ok(pairs.len() as f64 - (root_sum(lambda, &pairs) - h) / spread)
}

/// Both sides of `h + (M-1)/2 (lambda_1 - lambda_d) <= sum_{S(P)} (lambda_i - lambda_j)`.
pub fn main_lemma_sides(h: f64, lambda: &WeylVector, signature: &Signature) -> (f64, f64) {
    let v = lambda.as_slice();
    let lhs = h + (signature.m() as f64 - 1.0) / 2.0 * (v[0] - v[v.len() - 1]);
    (lhs, root_sum(lambda, &SeparatedPairs::new(signature)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn wv(v: &[f64]) -> WeylVector {
        WeylVector::new(v.to_vec()).unwrap()
    }

    fn sig(d: usize, ps: &[usize]) -> Signature {
        Signature::new(d, ps.to_vec()).unwrap()
    }

    fn random_weyl(d: usize, rng: &mut impl Rng) -> WeylVector {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mean = v.iter().sum::<f64>() / d as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        WeylVector::from_unsorted(v)
    }

    #[test]
    fn signature_validation() {
        assert!(Signature::new(3, vec![]).is_err());
        assert!(Signature::new(3, vec![0, 1]).is_err());
        assert!(Signature::new(3, vec![1, 3]).is_err());
        assert!(Signature::new(3, vec![2, 1]).is_err());
        assert_eq!(sig(5, &[1, 3]).dual().ps(), &[2, 4]);
        assert_eq!(sig(5, &[1, 3]).block_sizes(), vec![1, 2, 2]);
        assert_eq!(Signature::all(4).len(), 7);
    }

    #[test]
    fn separated_pairs_of_full_flag() {
        let pairs = SeparatedPairs::new(&sig(3, &[1, 2]));
        assert_eq!(pairs.pairs(), &[(1, 2), (1, 3), (2, 3)]);
        assert_eq!(pairs.separated_by(2), vec![(1, 3), (2, 3)]);
    }

    #[test]
    fn roots_examples() {
        let pairs = SeparatedPairs::new(&sig(3, &[1, 2]));
        assert_eq!(roots(&wv(&[2.0, 0.0, -2.0]), &pairs), vec![2.0, 4.0, 2.0]);
        assert_eq!(roots(&wv(&[0.0, 0.0, 0.0]), &pairs), vec![0.0; 3]);
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let a = random_weyl(4, &mut rng);
            let t = rng.gen_range(0.1..5.0);
            let p = SeparatedPairs::new(&sig(4, &[1, 3]));
            for (x, y) in roots(&a.scaled(t), &p).iter().zip(roots(&a, &p)) {
                assert!((x - t * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn falconer_examples() {
        let a = wv(&[2.0, 0.0, -2.0]);
        let p = sig(3, &[1, 2]);
        assert_eq!(falconer_functional(&a, &p, 0.0).unwrap(), 0.0);
        assert_eq!(falconer_functional(&a, &p, 1.0).unwrap(), 2.0);
        assert_eq!(falconer_functional(&a, &p, 2.0).unwrap(), 4.0);
        assert_eq!(falconer_functional(&a, &p, 3.0).unwrap(), 8.0);
        assert_eq!(falconer_functional(&a, &sig(3, &[1]), 1.5).unwrap(), 4.0);
        assert!(falconer_functional(&a, &p, 3.5).is_err());
        assert!(falconer_functional(&a, &p, -0.5).is_err());
        for r in [1.0, 2.0, 3.0, 0.7, 2.25] {
            assert!(
                (lp_oracle_falconer(&a, &p, r).unwrap() - falconer_functional(&a, &p, r).unwrap())
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn lyapunov_examples() {
        let a = wv(&[2.0, 0.0, -2.0]);
        let p = sig(3, &[1, 2]);
        assert_eq!(lyapunov_functional(&a, &p, 0.0).unwrap(), 0.0);
        assert_eq!(lyapunov_functional(&a, &p, 4.0).unwrap(), 2.0);
        assert_eq!(lp_oracle_lyapunov(&a, &p, 4.0).unwrap(), 2.0);
        assert_eq!(lyapunov_functional(&a, &p, 8.0).unwrap(), 3.0);
        assert_eq!(lyapunov_functional(&a, &p, 100.0).unwrap(), 3.0);
    }

    #[test]
    fn zero_root_is_free() {
        let a = wv(&[1.0, 1.0, -2.0]);
        let p = sig(3, &[1, 2]);
        // roots: (1,2)=0, (1,3)=3, (2,3)=3
        assert_eq!(falconer_functional(&a, &p, 1.0).unwrap(), 0.0);
        assert_eq!(lp_oracle_falconer(&a, &p, 1.0).unwrap(), 0.0);
        assert_eq!(lyapunov_functional(&a, &p, 0.0).unwrap(), 1.0);
        assert_eq!(lp_oracle_lyapunov(&a, &p, 0.0).unwrap(), 1.0);
        assert_eq!(lyapunov_functional(&a, &p, 3.0).unwrap(), 2.0);
        assert_eq!(lp_oracle_lyapunov(&a, &p, 3.0).unwrap(), 2.0);
        assert!(duality_check(&a, &p, 5).is_err());
    }

    #[test]
    fn oracle_rejects_large_d() {
        let a = WeylVector::zero(6);
        assert!(matches!(
            lp_oracle_falconer(&a, &Signature::full(6).unwrap(), 1.0),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn duality_round_trip_example() {
        let a = wv(&[2.0, 0.0, -2.0]);
        let p = sig(3, &[1, 2]);
        let f2 = falconer_functional(&a, &p, 2.0).unwrap();
        assert_eq!(f2, 4.0);
        assert_eq!(lyapunov_functional(&a, &p, f2).unwrap(), 2.0);
        let rep = duality_check(&a, &p, 101).unwrap();
        assert!(rep.max_err_r < 1e-12 && rep.max_err_h < 1e-12);
        assert_eq!(rep.falconer_max, 8.0);
    }

    #[test]
    fn type_and_phi() {
        let a = wv(&[2.0, 0.0, -2.0]);
        let p = sig(3, &[1, 2]);
        assert_eq!(phi_t(&a, &p, 2.5).unwrap(), 6.0);
        assert_eq!(phi_t(&a, &p, 2.0).unwrap(), 4.0);
        assert!(phi_t(&a, &p, 0.0).is_err());
        assert!(phi_t(&a, &p, 3.5).is_err());
        let b = wv(&[3.0, 1.0, -4.0]);
        assert_eq!(type_of(&b, &p).pairs(), &[(1, 2), (2, 3), (1, 3)]);
        // ties broken lexicographically
        assert_eq!(type_of(&a, &p).pairs(), &[(1, 2), (2, 3), (1, 3)]);
    }

    #[test]
    fn restricted_indexings_differ_by_one() {
        let z = [1.0, 2.0, 4.0];
        assert_eq!(
            restricted_from_zetas(&z, 1.5, RestrictedIndexing::Ceiling),
            1.0 + 0.5 * 2.0
        );
        // q' = 1, coefficient r - q' + 1 = 1.5 on zeta_1
        assert_eq!(
            restricted_from_zetas(&z, 1.5, RestrictedIndexing::Shifted),
            1.5
        );
        assert_eq!(
            restricted_from_zetas(&z, 0.5, RestrictedIndexing::Shifted),
            0.0
        );
        assert_eq!(
            restricted_from_zetas(&z, 3.0, RestrictedIndexing::Ceiling),
            7.0
        );
    }

    #[test]
    fn gap_combinatorics_examples() {
        let r = gap_combinatorics(&sig(3, &[1, 2]), 1).unwrap();
        assert_eq!(
            (r.a_k, r.b_k.clone(), r.slack),
            (2, vec![(1, 2), (2, 1)], 0)
        );
        let r = gap_combinatorics(&sig(4, &[1, 3]), 2).unwrap();
        assert_eq!(
            (r.a_k, r.b_k.clone(), r.slack),
            (3, vec![(1, 2), (3, 2)], 1)
        );
        assert!(gap_combinatorics(&sig(4, &[1, 3]), 4).is_err());
    }

    #[test]
    fn dimension_formulas() {
        let full3 = sig(3, &[1, 2]);
        assert_eq!(flag_dimension(&full3), 3);
        assert_eq!(xp_dimension(&full3), 6);
        assert_eq!(limit_set_bound(&full3), 2.5);
        assert_eq!(splitting_set_bound(&full3), 5.0);
        let p = sig(4, &[1, 3]);
        assert_eq!(flag_dimension(&p), 5);
        assert_eq!(SeparatedPairs::new(&p).len(), 5);
    }

    #[test]
    fn lyapunov_dimension_example() {
        let l = wv(&[2.0, 0.0, -2.0]);
        let p = sig(3, &[1, 2]);
        assert_eq!(lyapunov_dimension(4.0, &l, &p).unwrap(), 2.0);
        assert_eq!(lyapunov_dimension_bound(4.0, &l, &p).unwrap(), 2.0);
        assert_eq!(lyapunov_dimension(0.0, &l, &p).unwrap(), 0.0);
        assert!(lyapunov_dimension_bound(1.0, &WeylVector::zero(3), &p).is_err());
    }

    #[test]
    fn main_lemma_form_implies_gap_bound() {
        let mut rng = rng_from_seed(11);
        let mut checked = 0;
        for _ in 0..2000 {
            let d = rng.gen_range(3..=6);
            let sigs = Signature::all(d);
            let p = &sigs[rng.gen_range(0..sigs.len())];
            let lambda = random_weyl(d, &mut rng);
            let (lhs0, rhs) = main_lemma_sides(0.0, &lambda, p);
            if rhs - lhs0 < 0.0 || lambda.spread() <= 0.0 {
                continue;
            }
            let h = rng.gen_range(0.0..=(rhs - lhs0));
            let dim = lyapunov_dimension(h, &lambda, p).unwrap();
            let bound = lyapunov_dimension_bound(h, &lambda, p).unwrap();
            assert!(dim <= bound + 1e-9);
            assert!(dim <= limit_set_bound(p) + 1e-9);
            checked += 1;
        }
        assert!(checked > 500);
    }

    fn weyl_strategy(d: usize) -> impl Strategy<Value = WeylVector> {
        any::<u64>().prop_map(move |s| random_weyl(d, &mut rng_from_seed(s)))
    }

    proptest! {
        #[test]
        fn falconer_monotone_concave_homogeneous(a in weyl_strategy(4), t in 0.1f64..4.0, mask in 1usize..8) {
            let ps: Vec<usize> = (1..4).filter(|p| mask & (1 << (p - 1)) != 0).collect();
            let p = sig(4, &ps);
            let dim = SeparatedPairs::new(&p).len() as f64;
            let grid: Vec<f64> = (0..=20).map(|k| dim * k as f64 / 20.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&r| falconer_functional(&a, &p, r).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            // cheapest roots are bought first, so F_r is convex in r and L_h concave in h
            for w in vals.windows(3) {
                prop_assert!(w[2] - w[1] >= w[1] - w[0] - 1e-9);
            }
            for &r in &grid {
                let lhs = falconer_functional(&a.scaled(t), &p, r).unwrap();
                prop_assert!((lhs - t * falconer_functional(&a, &p, r).unwrap()).abs() < 1e-9);
            }
            let hs: Vec<f64> = (0..=20).map(|k| vals[20] * k as f64 / 20.0).collect();
            let ls: Vec<f64> = hs.iter().map(|&h| lyapunov_functional(&a, &p, h).unwrap()).collect();
            for w in ls.windows(3) {
                prop_assert!(w[1] >= w[0] - 1e-12);
                prop_assert!(w[2] - w[1] <= w[1] - w[0] + 1e-9);
            }
        }
    }
}
