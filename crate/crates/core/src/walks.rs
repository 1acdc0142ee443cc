//! Random walks on free groups: exact convolutions, entropy, Lyapunov exponents.
//!
//! Entropy is only ever used through finite-`n` upper bounds: `H(mu^{*n}) / n`
//! (subadditivity) and the increments `H(mu^{*n}) - H(mu^{*(n-1)})`, which
//! decrease to `h_mu`. Every inequality that puts `h_mu` on its small side is
//! therefore tested conservatively.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{
    flag_dimension, lyapunov_dimension, main_lemma_sides, root_sum_separated_by, Signature,
};
use crate::matrixops::{flag_distance, flag_of, Mat, WeylVector};
use crate::representation::Representation;
use crate::rng::stream;
use crate::words::Word;

/// Default cap on the support of a convolution power.
pub const DEFAULT_SUPPORT_CAP: usize = 5_000_000;
/// Accepted deviation of the total mass from 1.
pub const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on a free group.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMeasure {
    rank: usize,
    atoms: BTreeMap<Word, f64>,
    non_elementary: bool,
}

impl WalkMeasure {
    /// Merges repeated words; probabilities must be positive and sum to 1.
    pub fn new(atoms: impl IntoIterator<Item = (Word, f64)>) -> Result<Self> {
        let mut map: BTreeMap<Word, f64> = BTreeMap::new();
        let mut rank = None;
        for (w, p) in atoms {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::Precondition(format!(
                    "probability {p} of {w} is not positive"
                )));
            }
            match rank {
                None => rank = Some(w.rank()),
                Some(r) if r != w.rank() => {
                    return Err(Error::GeneratorMismatch {
                        left: r,
                        right: w.rank(),
                    })
                }
                _ => {}
            }
            *map.entry(w).or_insert(0.0) += p;
        }
        let rank = rank.ok_or_else(|| Error::Empty("walk measure has no atoms".into()))?;
        let mass: f64 = map.values().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Precondition(format!("total mass {mass} != 1")));
        }
        Ok(Self {
            rank,
            atoms: map,
            non_elementary: false,
        })
    }

    /// Uniform on the `2k` letters: the simple random walk.
    pub fn uniform_on_generators(rank: usize) -> Self {
        let p = 1.0 / (2 * rank) as f64;
        let atoms = (0..2 * rank as u8)
            .map(|l| (Word::from_letters(rank, vec![l]).unwrap(), p))
            .collect();
        Self {
            rank,
            atoms,
            non_elementary: rank >= 2,
        }
    }

    pub fn dirac(w: Word) -> Self {
        let rank = w.rank();
        Self {
            rank,
            atoms: BTreeMap::from([(w, 1.0)]),
            non_elementary: false,
        }
    }

    /// Records the user's assertion that the support generates a non-elementary semigroup.
    pub fn with_non_elementary(mut self, asserted: bool) -> Self {
        self.non_elementary = asserted;
        self
    }

    pub fn non_elementary(&self) -> bool {
        self.non_elementary
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn atoms(&self) -> &BTreeMap<Word, f64> {
        &self.atoms
    }

    pub fn support_len(&self) -> usize {
        self.atoms.len()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.values().sum()
    }

    pub fn probability(&self, w: &Word) -> f64 {
        self.atoms.get(w).copied().unwrap_or(0.0)
    }

    /// `sum |g| mu(g)`.
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|(w, p)| w.len() as f64 * p).sum()
    }

    /// Shannon entropy `-sum mu(g) log mu(g)`.
    pub fn entropy(&self) -> f64 {
        -self.atoms.values().map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Push-forward under `g -> g^{-1}`.
    pub fn inverse(&self) -> Self {
        let atoms = self.atoms.iter().map(|(w, &p)| (w.inverse(), p)).collect();
        Self {
            rank: self.rank,
            atoms,
            non_elementary: self.non_elementary,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.atoms
            .iter()
            .all(|(w, &p)| (self.probability(&w.inverse()) - p).abs() <= MASS_TOL)
    }

    /// Draws an atom by inversion of the cumulative distribution in word order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Word {
        let u: f64 = rng.gen::<f64>() * self.mass();
        let mut acc = 0.0;
        let mut last = None;
        for (w, &p) in &self.atoms {
            acc += p;
            last = Some(w);
            if u < acc {
                return w;
            }
        }
        last.expect("measures are non-empty")
    }
}

/// `mu * nu`: the law of `x y` for independent `x ~ mu`, `y ~ nu`.
pub fn convolve(mu: &WalkMeasure, nu: &WalkMeasure, cap: usize) -> Result<WalkMeasure> {
    if mu.rank != nu.rank {
        return Err(Error::GeneratorMismatch {
            left: mu.rank,
            right: nu.rank,
        });
    }
    let mut out: BTreeMap<Word, f64> = BTreeMap::new();
    for (x, &p) in &mu.atoms {
        for (y, &q) in &nu.atoms {
            *out.entry(x.multiply(y)?).or_insert(0.0) += p * q;
            if out.len() > cap {
                return Err(Error::SupportCap { cap });
            }
        }
    }
    Ok(WalkMeasure {
        rank: mu.rank,
        atoms: out,
        non_elementary: mu.non_elementary && nu.non_elementary,
    })
}

/// Entropies of the convolution powers `mu^{*1}, ..., mu^{*n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyRates {
    /// `H(mu^{*n})` for `n = 1, 2, ...`.
    pub entropies: Vec<f64>,
    /// `H(mu^{*n}) / n`.
    pub rates: Vec<f64>,
    /// Support sizes of the powers.
    pub support: Vec<usize>,
    /// Set when the support cap stopped the computation before `n_max`.
    pub truncated: bool,
}

impl EntropyRates {
    /// `inf_n H(mu^{*n}) / n`.
    pub fn rate_bound(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `H(mu^{*n}) - H(mu^{*(n-1)})` for `n = 1, 2, ...` (with `H_0 = 0`).
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.entropies
            .iter()
            .map(|&h| {
                let d = h - prev;
                prev = h;
                d
            })
            .collect()
    }

    /// The increments decrease to `h_mu`, so the last one also bounds it from above.
    pub fn increment_bound(&self) -> f64 {
        self.increments().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// The smaller of the two finite-`n` upper bounds on `h_mu`.
    pub fn upper_bound(&self) -> f64 {
        self.rate_bound().min(self.increment_bound())
    }

    pub fn horizon(&self) -> usize {
        self.rates.len()
    }

    /// Pairs `(n, m)` with `H_{n+m} > H_n + H_m + tol` among the computed terms.
    pub fn subadditivity_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let h = &self.entropies;
        let mut out = Vec::new();
        for n in 1..=h.len() {
            for m in 1..=h.len() {
                if n + m <= h.len() && h[n + m - 1] > h[n - 1] + h[m - 1] + tol {
                    out.push((n, m));
                }
            }
        }
        out
    }
}

/// `H(mu^{*n}) / n` for `n = 1..=n_max`, stopping early (with `truncated`) at the cap.
pub fn entropy_rate(mu: &WalkMeasure, n_max: usize, cap: usize) -> EntropyRates {
    let mut out = EntropyRates {
        entropies: Vec::new(),
        rates: Vec::new(),
        support: Vec::new(),
        truncated: false,
    };
    let mut power = mu.clone();
    for n in 1..=n_max {
        if n > 1 {
            match convolve(&power, mu, cap) {
                Ok(next) => power = next,
                Err(_) => {
                    out.truncated = true;
                    break;
                }
            }
        }
        let h = power.entropy();
        out.entropies.push(h);
        out.rates.push(h / n as f64);
        out.support.push(power.support_len());
    }
    out
}

/// Plug-in estimate of `H(mu^{*n})` from `samples` sampled endpoints; biased low.
pub fn sampled_entropy(mu: &WalkMeasure, n: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, 0);
    let mut counts: BTreeMap<Word, usize> = BTreeMap::new();
    for _ in 0..samples {
        let mut w = Word::identity(mu.rank);
        for _ in 0..n {
            w = w.multiply(mu.sample(&mut rng)).expect("same rank");
        }
        *counts.entry(w).or_insert(0) += 1;
    }
    let total = samples as f64;
    -counts
        .values()
        .map(|&c| (c as f64 / total) * (c as f64 / total).ln())
        .sum::<f64>()
}

/// Monte-Carlo estimate of the Lyapunov vector of `rho_* mu`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkStats {
    pub horizon: usize,
    pub trials: usize,
    /// Trials discarded for non-finite values.
    pub aborted: usize,
    /// Mean of `(1/n) log S` over trials, non-increasing.
    pub mean: Vec<f64>,
    /// Standard error of each coordinate.
    pub std_err: Vec<f64>,
}

impl WalkStats {
    pub fn exponents(&self) -> WeylVector {
        WeylVector::from_unsorted(self.mean.clone())
    }
}

/// One trial: `(1/n) log S(g_1 ... g_n)` by QR re-orthonormalisation of the
/// transposed product, summing `log |R_ii|` (Benettin's scheme).
fn lyapunov_trial(
    mu: &WalkMeasure,
    rho: &Representation,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Option<Vec<f64>> {
    let d = rho.dim();
    let mut rng = stream(seed, trial);
    let mut q = Mat::identity(d, d);
    let mut sums = vec![0.0; d];
    for _ in 0..horizon {
        let w = mu.sample(&mut rng);
        for &l in w.letters() {
            let qr = (rho.letter(l).matrix().transpose() * &q).qr();
            let r = qr.r();
            for (i, s) in sums.iter_mut().enumerate() {
                *s += r[(i, i)].abs().ln();
            }
            q = qr.q();
        }
    }
    if sums.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut v: Vec<f64> = sums.iter().map(|s| s / horizon as f64).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Some(v)
}

/// Averages over `trials` independent walks; trial `t` draws from sub-seed `t` of `seed`,
/// so the result does not depend on scheduling.
pub fn lyapunov_exponents_mc(
    mu: &WalkMeasure,
    rho: &Representation,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<WalkStats> {
    if horizon == 0 || trials == 0 {
        return Err(Error::Precondition(
            "horizon and trials must be positive".into(),
        ));
    }
    if mu.rank != rho.rank() {
        return Err(Error::GeneratorMismatch {
            left: mu.rank,
            right: rho.rank(),
        });
    }
    let results: Vec<Option<Vec<f64>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| lyapunov_trial(mu, rho, horizon, seed, t))
        .collect();
    let good: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let aborted = trials - good.len();
    if good.is_empty() {
        return Err(Error::Overflow(format!("all {trials} trials overflowed")));
    }
    let d = rho.dim();
    let m = good.len() as f64;
    let mut mean = vec![0.0; d];
    for v in &good {
        for i in 0..d {
            mean[i] += v[i];
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let std_err = (0..d)
        .map(|i| {
            if good.len() < 2 {
                return 0.0;
            }
            let var = good.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(WalkStats {
        horizon,
        trials,
        aborted,
        mean,
        std_err,
    })
}

/// Outcome of one inequality with the entropy upper bound on its left side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    /// The finite-`n` bound is too weak; not a refutation.
    Inconclusive,
    /// An estimate-level inequality failed beyond its tolerance.
    Anomaly,
    /// A prerequisite estimate could not be computed.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub status: CheckStatus,
}

impl InequalityCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let status = if lhs <= rhs {
            CheckStatus::Pass
        } else {
            CheckStatus::Inconclusive
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub entropy_upper_bound: f64,
    pub entropy_horizon: usize,
    pub exponents: Vec<f64>,
    /// `h <= sum_{S_p} (lambda_i - lambda_j)` for each `p`.
    pub per_p: Vec<InequalityCheck>,
    /// `h + ((M-1)/2)(lambda_1 - lambda_d) <= sum_{S(P)} (lambda_i - lambda_j)`.
    pub main_lemma: InequalityCheck,
    /// `h <= psi(lambda)` when a growth-indicator value is supplied.
    pub growth: Option<InequalityCheck>,
    /// `L_h(lambda)` evaluated at the entropy upper bound.
    pub lyapunov_dimension: f64,
    /// `dim_LY <= #S(P) - (M-1)/2`.
    pub dimension_bound: InequalityCheck,
}

/// Evaluates the entropy/exponent inequalities with `h_upper >= h_mu`.
pub fn inequality_report(
    h_upper: f64,
    horizon: usize,
    lambda: &WeylVector,
    signature: &Signature,
    psi: Option<f64>,
) -> Result<InequalityReport> {
    let per_p = signature
        .ps()
        .iter()
        .map(|&p| {
            InequalityCheck::new(
                format!("entropy_vs_roots_p{p}"),
                h_upper,
                root_sum_separated_by(lambda, p),
            )
        })
        .collect();
    let (lhs, rhs) = main_lemma_sides(h_upper, lambda, signature);
    let dim_ly = lyapunov_dimension(h_upper, lambda, signature)?;
    let bound = flag_dimension(signature) as f64 - (signature.m() as f64 - 1.0) / 2.0;
    Ok(InequalityReport {
        entropy_upper_bound: h_upper,
        entropy_horizon: horizon,
        exponents: lambda.as_slice().to_vec(),
        per_p,
        main_lemma: InequalityCheck::new("main_lemma", lhs, rhs),
        growth: psi.map(|psi| InequalityCheck::new("entropy_vs_growth_indicator", h_upper, psi)),
        lyapunov_dimension: dim_ly,
        dimension_bound: InequalityCheck::new("lyapunov_dimension_bound", dim_ly, bound),
    })
}

/// Heuristic for "two independent loxodromic elements": the two most likely
/// support atoms of length at least one are `P`-gapped and have distinct
/// attracting flags (distance above `min_distance`).
pub fn loxodromic_heuristic(
    mu: &WalkMeasure,
    rho: &Representation,
    signature: &Signature,
    tol: f64,
    min_distance: f64,
) -> bool {
    let mut atoms: Vec<(&Word, f64)> = mu
        .atoms
        .iter()
        .filter(|(w, _)| !w.is_empty())
        .map(|(w, &p)| (w, p))
        .collect();
    atoms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    let flags: Vec<_> = atoms
        .iter()
        .filter_map(|(w, _)| {
            // attracting flag of a high power approximates the eigen-flag
            let g = rho.eval(&w.power(8)).ok()?;
            flag_of(&g, signature, tol).ok()
        })
        .take(2)
        .collect();
    flags.len() == 2 && flag_distance(&flags[0], &flags[1]).map_or(false, |x| x > min_distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixops::{eigen_moduli, UnimodularMatrix};
    use crate::words::parse_standard;

    fn srw() -> WalkMeasure {
        WalkMeasure::uniform_on_generators(2)
    }

    #[test]
    fn srw_convolution_square() {
        let mu = srw();
        let mu2 = convolve(&mu, &mu, DEFAULT_SUPPORT_CAP).unwrap();
        assert_eq!(mu2.probability(&Word::identity(2)), 0.25);
        assert_eq!(mu2.support_len(), 13);
        assert_eq!(mu.entropy(), 4f64.ln());
        assert!(mu.is_symmetric());
        assert_eq!(mu.first_moment(), 1.0);
    }

    #[test]
    fn dirac_convolution() {
        let w = parse_standard(2, "ab'").unwrap();
        let v = parse_standard(2, "ba").unwrap();
        let c = convolve(
            &WalkMeasure::dirac(w.clone()),
            &WalkMeasure::dirac(v.clone()),
            10,
        )
        .unwrap();
        assert_eq!(c, WalkMeasure::dirac(w.multiply(&v).unwrap()));
        assert!(matches!(
            convolve(&srw(), &srw(), 5),
            Err(Error::SupportCap { cap: 5 })
        ));
    }

    #[test]
    fn mass_is_conserved() {
        let mu = WalkMeasure::new([
            (parse_standard(2, "a").unwrap(), 0.5),
            (parse_standard(2, "b'").unwrap(), 0.3),
            (parse_standard(2, "ab").unwrap(), 0.2),
        ])
        .unwrap();
        let mu3 = convolve(&convolve(&mu, &mu, 1000).unwrap(), &mu, 1000).unwrap();
        assert!((mu3.mass() - 1.0).abs() <= 1e-12);
        assert!(WalkMeasure::new([(Word::identity(2), 0.5)]).is_err());
        assert!(WalkMeasure::new([(Word::identity(2), -1.0), (Word::identity(2), 2.0)]).is_err());
    }

    #[test]
    fn entropy_rate_of_dirac_is_zero() {
        let r = entropy_rate(
            &WalkMeasure::dirac(parse_standard(2, "ab").unwrap()),
            5,
            100,
        );
        assert!(r.rates.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn srw_entropy_rates() {
        let r = entropy_rate(&srw(), 8, DEFAULT_SUPPORT_CAP);
        assert!(!r.truncated);
        assert_eq!(r.horizon(), 8);
        let h8 = r.rates[7];
        assert!(h8 >= 0.5 * 3f64.ln() && h8 <= 4f64.ln());
        for w in r.rates[1..].windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(r.subadditivity_violations(1e-12).is_empty());
        let inc = r.increments();
        for w in inc.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(r.upper_bound() >= 0.5 * 3f64.ln() && r.upper_bound() <= r.rate_bound());
        let capped = entropy_rate(&srw(), 8, 200);
        assert!(capped.truncated && capped.horizon() < 8);
    }

    #[test]
    fn sampled_entropy_is_below_exact() {
        let exact = entropy_rate(&srw(), 4, DEFAULT_SUPPORT_CAP).entropies[3];
        let est = sampled_entropy(&srw(), 4, 20_000, 3);
        assert!(est <= exact + 1e-9 && est > 0.8 * exact);
    }

    fn diag_rep() -> Representation {
        Representation::standard(vec![
            UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap(),
            UnimodularMatrix::diagonal(&[0.5, 2.0, 1.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn dirac_diagonal_exponents_are_exact() {
        let mu = WalkMeasure::dirac(parse_standard(2, "a").unwrap());
        for horizon in [1, 7, 64] {
            let s = lyapunov_exponents_mc(&mu, &diag_rep(), horizon, 3, 1).unwrap();
            assert!((s.mean[0] - 4f64.ln()).abs() < 1e-12);
            assert!(s.mean[1].abs() < 1e-12);
            assert!((s.mean[2] + 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dirac_exponents_match_eigen_moduli() {
        let rho = Representation::standard(vec![UnimodularMatrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.3],
            vec![0.0, 0.2, 1.0],
        ])
        .unwrap()])
        .unwrap();
        let mu = WalkMeasure::dirac(parse_standard(1, "a").unwrap());
        let s = lyapunov_exponents_mc(&mu, &rho, 64, 1, 0).unwrap();
        let m = eigen_moduli(rho.letter(0));
        for (a, b) in s.mean.iter().zip(m.as_slice()) {
            assert!((a - b).abs() <= 0.05);
        }
    }

    #[test]
    fn commuting_diagonal_law_of_large_numbers() {
        let mu = WalkMeasure::new([
            (parse_standard(2, "a").unwrap(), 0.5),
            (parse_standard(2, "b").unwrap(), 0.5),
        ])
        .unwrap();
        let s = lyapunov_exponents_mc(&mu, &diag_rep(), 400, 64, 9).unwrap();
        // E[log diag] = ½(log4, 0, -log4) + ½(-log2, log2, 0)
        let mut expected = vec![
            0.5 * (4f64.ln() - 2f64.ln()),
            0.5 * 2f64.ln(),
            -0.5 * 4f64.ln(),
        ];
        expected.sort_by(|a, b| b.total_cmp(a));
        for i in 0..3 {
            assert!(
                (s.mean[i] - expected[i]).abs() < 4.0 * s.std_err[i] + 0.02,
                "{:?}",
                s
            );
        }
        assert!(s.mean.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn seeded_runs_reproduce() {
        let a = lyapunov_exponents_mc(&srw(), &diag_rep(), 50, 16, 77).unwrap();
        let b = lyapunov_exponents_mc(&srw(), &diag_rep(), 50, 16, 77).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| lyapunov_exponents_mc(&srw(), &diag_rep(), 50, 16, 77).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn symmetric_walk_matches_inverse_walk() {
        let rho = Representation::standard(vec![
            UnimodularMatrix::from_rows(&[
                vec![3.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.5],
                vec![0.0, 0.5, 0.6],
            ])
            .unwrap(),
            UnimodularMatrix::from_rows(&[
                vec![1.0, 0.0, 2.0],
                vec![0.0, 1.5, 0.0],
                vec![0.4, 0.0, 1.5],
            ])
            .unwrap(),
        ])
        .unwrap();
        let mu = srw();
        let a = lyapunov_exponents_mc(&mu, &rho, 200, 64, 5).unwrap();
        let b = lyapunov_exponents_mc(&mu.inverse(), &rho, 200, 64, 6).unwrap();
        for i in 0..3 {
            let se = (a.std_err[i].powi(2) + b.std_err[i].powi(2)).sqrt();
            assert!((a.mean[i] - b.mean[i]).abs() <= 4.0 * se + 0.01);
        }
    }

    #[test]
    fn dirac_inequalities_hold_trivially() {
        let sig = Signature::new(3, vec![1, 2]).unwrap();
        let lambda = WeylVector::new(vec![4f64.ln(), 0.0, -4f64.ln()]).unwrap();
        let r = inequality_report(0.0, 5, &lambda, &sig, Some(0.0)).unwrap();
        assert!(r.per_p.iter().all(|c| c.status == CheckStatus::Pass));
        assert_eq!(r.main_lemma.status, CheckStatus::Pass);
        assert_eq!(r.lyapunov_dimension, 0.0);
        assert_eq!(r.dimension_bound.rhs, 2.5);
    }

    #[test]
    fn main_lemma_pass_gives_dimension_bound() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for _ in 0..500 {
            let d = rng.gen_range(3..=5);
            let sigs = Signature::all(d);
            let sig = &sigs[rng.gen_range(0..sigs.len())];
            let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mean = v.iter().sum::<f64>() / d as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let lambda = WeylVector::from_unsorted(v);
            let h = rng.gen_range(0.0..4.0);
            let r = inequality_report(h, 1, &lambda, sig, None).unwrap();
            if r.main_lemma.status == CheckStatus::Pass && lambda.spread() > 1e-9 {
                assert!(r.lyapunov_dimension <= r.dimension_bound.rhs + 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn loxodromic_heuristic_on_schottky_pair() {
        let sig = Signature::new(3, vec![1, 2]).unwrap();
        let k = nalgebra::Rotation3::from_euler_angles(0.4, 0.9, 1.3).into_inner();
        let a = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
        let b = UnimodularMatrix::new_unchecked(
            Mat::from_column_slice(3, 3, k.as_slice())
                * a.matrix()
                * Mat::from_column_slice(3, 3, k.transpose().as_slice()),
        );
        let rho = Representation::standard(vec![a, b]).unwrap();
        assert!(loxodromic_heuristic(&srw(), &rho, &sig, 1e-6, 1e-3));
        let mu = WalkMeasure::dirac(parse_standard(2, "a").unwrap());
        assert!(!loxodromic_heuristic(&mu, &rho, &sig, 1e-6, 1e-3));
    }
}
