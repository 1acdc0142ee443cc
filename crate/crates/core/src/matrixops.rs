//! Real `d x d` linear algebra on `SL(d, R)`.
//!
//! Singular values come from a one-sided Jacobi SVD, which keeps small
//! singular values to high relative accuracy on graded matrices. Long words
//! are multiplied in the factored form `B = T Q` ([`GradedProduct`]) so their
//! products are never formed explicitly.
//!
//! Distances between subspaces and flags are Frobenius norms of differences of
//! orthogonal projectors.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Signature;

pub type Mat = DMatrix<f64>;

/// Default relative gap below which `s_p` and `s_{p+1}` count as equal.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
/// Accepted drift of `det` from 1 before a matrix is renormalised.
pub const DET_TOL: f64 = 1e-8;
/// Orthonormality tolerance for subspace bases.
pub const ORTHO_TOL: f64 = 1e-9;
/// Nesting tolerance for flags.
pub const NEST_TOL: f64 = 1e-8;
/// Smallest singular value of a stacked splitting basis.
pub const SPLIT_RANK_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 80;

// ---------------------------------------------------------------------------
// Weyl chamber

/// A point of the closed Weyl chamber: non-increasing, summing to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylVector(Vec<f64>);

impl WeylVector {
    /// Validates ordering and the zero-sum condition (relative tolerance `1e-9`).
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if v.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition(format!("{v:?} is not non-increasing")));
        }
        let sum: f64 = v.iter().sum();
        let scale = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if sum.abs() > 1e-9 * scale {
            return Err(Error::Precondition(format!(
                "components sum to {sum:e}, not 0"
            )));
        }
        Ok(Self(v))
    }

    /// Sorts descending; does not check the sum.
    pub fn from_unsorted(mut v: Vec<f64>) -> Self {
        v.sort_by(|a, b| b.total_cmp(a));
        Self(v)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, t: f64) -> Self {
        if t >= 0.0 {
            Self(self.0.iter().map(|x| x * t).collect())
        } else {
            Self::from_unsorted(self.0.iter().map(|x| x * t).collect())
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `a_1 - a_d`.
    pub fn spread(&self) -> f64 {
        self.0[0] - self.0[self.0.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl fmt::Display for WeylVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| format!("{x:.6}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

// ---------------------------------------------------------------------------
// SL(d, R)

/// A square matrix with determinant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodularMatrix(Mat);

impl UnimodularMatrix {
    /// Accepts any matrix with positive determinant, rescaling by `det^{-1/d}`
    /// (with a warning) when `|det - 1| > 1e-8`.
    pub fn new(m: Mat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape {
                rows: m.nrows(),
                cols: m.ncols(),
                expected: m.nrows(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(Error::NonPositiveDeterminant { det });
        }
        if (det - 1.0).abs() > DET_TOL {
            warn!(
                "determinant {det:e} != 1, rescaling by det^(-1/{})",
                m.nrows()
            );
            let scale = det.powf(-1.0 / m.nrows() as f64);
            return Ok(Self(m * scale));
        }
        Ok(Self(m))
    }

    /// Wraps without checks; for matrices known to lie in `SL(d, R)` up to rounding.
    pub fn new_unchecked(m: Mat) -> Self {
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Shape {
                rows: 0,
                cols: 0,
                expected: 1,
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Shape {
                rows: d,
                cols: bad.len(),
                expected: d,
            });
        }
        Self::new(Mat::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self(Mat::identity(d, d))
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(Mat::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inverse(&self) -> Self {
        Self(
            self.0
                .clone()
                .try_inverse()
                .expect("unimodular matrices are invertible"),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut acc = Self::identity(self.dim());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn conjugate_by(&self, h: &Self) -> Self {
        h.mul(self).mul(&h.inverse())
    }
}

// ---------------------------------------------------------------------------
// SVD

/// Singular value decomposition `A = U diag(s) V^T`, `s` non-increasing.
///
/// Signs are fixed so that the largest-magnitude entry of each column of `U`
/// is positive (first such entry on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    pub fn log_singular_values(&self) -> Vec<f64> {
        self.s.iter().map(|x| x.ln()).collect()
    }

    /// Relative gap `(s_p - s_{p+1}) / s_p`, for `1 <= p < d`.
    pub fn relative_gap(&self, p: usize) -> f64 {
        (self.s[p - 1] - self.s[p]) / self.s[p - 1]
    }

    pub fn check_gap(&self, p: usize, tol: f64) -> Result<()> {
        let gap = self.relative_gap(p);
        if !(gap >= tol) {
            return Err(Error::GapTooSmall { index: p, gap, tol });
        }
        Ok(())
    }
}

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
pub fn jacobi_svd(a: &Mat) -> Svd {
    let n = a.ncols();
    let mut g = a.clone();
    let mut v = Mat::identity(n, n);
    let eps = f64::EPSILON * n as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 1)..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dot(&g.column(j));
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut g, i, j, c, s);
                rotate_columns(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| g.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = Mat::zeros(a.nrows(), n);
    let mut vs = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        s.push(norms[src]);
        if norms[src] > 0.0 {
            u.set_column(dst, &(g.column(src) / norms[src]));
        }
        vs.set_column(dst, &v.column(src));
    }
    complete_orthonormal(&mut u, &s);
    for k in 0..n {
        let col = u.column(k);
        let mut best = 0;
        for r in 1..col.len() {
            if col[r].abs() > col[best].abs() {
                best = r;
            }
        }
        if col[best] < 0.0 {
            u.column_mut(k).neg_mut();
            vs.column_mut(k).neg_mut();
        }
    }
    Svd { u, s, v: vs }
}

fn rotate_columns(m: &mut Mat, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let xi = m[(r, i)];
        let xj = m[(r, j)];
        m[(r, i)] = c * xi - s * xj;
        m[(r, j)] = s * xi + c * xj;
    }
}

/// Fills columns with zero singular value by Gram-Schmidt against the rest.
fn complete_orthonormal(u: &mut Mat, s: &[f64]) {
    let n = u.nrows();
    for k in 0..u.ncols() {
        if s[k] > 0.0 {
            continue;
        }
        for e in 0..n {
            let mut cand = DVector::from_fn(n, |r, _| if r == e { 1.0 } else { 0.0 });
            for other in 0..u.ncols() {
                if other != k && (s[other] > 0.0 || other < k) {
                    let proj = u.column(other).dot(&cand);
                    cand -= u.column(other) * proj;
                }
            }
            let norm = cand.norm();
            if norm > 1e-6 {
                u.set_column(k, &(cand / norm));
                break;
            }
        }
    }
}

pub fn svd(g: &UnimodularMatrix) -> Svd {
    jacobi_svd(g.matrix())
}

/// RQ decomposition `x = r q` with `r` upper triangular and `q` orthogonal.
fn rq(x: &Mat) -> (Mat, Mat) {
    let n = x.nrows();
    let flip = |m: &Mat| Mat::from_fn(n, n, |i, j| m[(n - 1 - i, j)]);
    let qr = flip(x).transpose().qr();
    let (q1, r1) = (qr.q(), qr.r());
    let r1t = r1.transpose();
    let r = Mat::from_fn(n, n, |i, j| r1t[(n - 1 - i, n - 1 - j)]);
    let q = flip(&q1.transpose());
    (r, q)
}

/// Product of matrices held as `B = T Q`, `T` upper triangular, `Q` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedProduct {
    t: Mat,
    q: Mat,
}

impl GradedProduct {
    pub fn identity(d: usize) -> Self {
        Self {
            t: Mat::identity(d, d),
            q: Mat::identity(d, d),
        }
    }

    pub fn from_factors<'a>(d: usize, factors: impl IntoIterator<Item = &'a Mat>) -> Self {
        let mut p = Self::identity(d);
        for f in factors {
            p.push(f);
        }
        p
    }

    /// `B <- B g`.
    pub fn push(&mut self, g: &Mat) {
        let (r, q) = rq(&(&self.q * g));
        self.t = &self.t * r;
        self.q = q;
    }

    pub fn pushed(&self, g: &Mat) -> Self {
        let mut next = self.clone();
        next.push(g);
        next
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// The explicit product; loses small singular values for long words.
    pub fn to_matrix(&self) -> Mat {
        &self.t * &self.q
    }

    pub fn svd(&self) -> Svd {
        let inner = jacobi_svd(&self.t);
        Svd {
            v: self.q.transpose() * &inner.v,
            u: inner.u,
            s: inner.s,
        }
    }

    pub fn log_singular_values(&self) -> WeylVector {
        WeylVector::from_unsorted(self.svd().log_singular_values())
    }
}

/// `log S(g)`.
pub fn log_singular_values(g: &UnimodularMatrix) -> Result<WeylVector> {
    if g.matrix().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(WeylVector::from_unsorted(svd(g).log_singular_values()))
}

// ---------------------------------------------------------------------------
// Subspaces and flags

/// A subspace given by an orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Mat,
}

impl Subspace {
    /// Wraps a basis already orthonormal to `1e-9`.
    pub fn from_orthonormal(basis: Mat) -> Result<Self> {
        let p = basis.ncols();
        let gram = basis.transpose() * &basis;
        let err = (gram - Mat::identity(p, p)).amax();
        if err > ORTHO_TOL {
            return Err(Error::Precondition(format!(
                "basis not orthonormal (error {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Orthonormalises the column span of `m`, which must have full column rank.
    pub fn span(m: &Mat) -> Result<Self> {
        let p = m.ncols();
        if p == 0 {
            return Ok(Self {
                basis: Mat::zeros(m.nrows(), 0),
            });
        }
        let f = jacobi_svd(&(m.transpose() * m));
        let scale = f.s[0].max(f64::MIN_POSITIVE);
        if f.s[p - 1] <= 1e-24 * scale {
            return Err(Error::Singular("spanning set is rank deficient".into()));
        }
        let qr = m.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let mut basis = q.columns(0, p).into_owned();
        // positive diagonal in R makes the basis a function of the spanning set
        for k in 0..p {
            if r[(k, k)] < 0.0 {
                basis.column_mut(k).neg_mut();
            }
        }
        Ok(Self { basis })
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.transpose()
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        let d = self.ambient();
        let f = jacobi_svd(&(Mat::identity(d, d) - self.projector()));
        Subspace {
            basis: f.u.columns(0, d - self.dim()).into_owned(),
        }
    }

    /// `g W`.
    pub fn transform(&self, g: &Mat) -> Result<Subspace> {
        Subspace::span(&(g * &self.basis))
    }

    /// `||(I - P_other) B||_F`: zero iff `self` is contained in `other`.
    pub fn containment_residual(&self, other: &Subspace) -> f64 {
        let d = self.ambient();
        ((Mat::identity(d, d) - other.projector()) * &self.basis).norm()
    }

    /// Sine of the smallest principal angle with `other` (for `dim self <= codim other`).
    pub fn min_angle_sine(&self, other: &Subspace) -> f64 {
        let d = self.ambient();
        let residual = (Mat::identity(d, d) - other.projector()) * &self.basis;
        if self.dim() == 0 {
            return 1.0;
        }
        *jacobi_svd(&residual).s.get(self.dim() - 1).unwrap_or(&0.0)
    }
}

/// `||P_a - P_b||_F`.
pub fn grassmann_distance(a: &Subspace, b: &Subspace) -> f64 {
    (a.projector() - b.projector()).norm()
}

/// A partial flag with nested pieces of the dimensions in its signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    signature: Signature,
    pieces: Vec<Subspace>,
}

impl Flag {
    pub fn new(signature: Signature, pieces: Vec<Subspace>) -> Result<Self> {
        if pieces.len() != signature.m() {
            return Err(Error::Precondition(format!(
                "{} pieces for signature {}",
                pieces.len(),
                signature
            )));
        }
        for (piece, &p) in pieces.iter().zip(signature.ps()) {
            if piece.dim() != p || piece.ambient() != signature.d() {
                return Err(Error::Precondition(format!(
                    "piece of dim {} where {p} expected",
                    piece.dim()
                )));
            }
        }
        for w in pieces.windows(2) {
            let r = w[0].containment_residual(&w[1]);
            if r > NEST_TOL {
                return Err(Error::Precondition(format!(
                    "pieces not nested (residual {r:e})"
                )));
            }
        }
        Ok(Self { signature, pieces })
    }

    /// Flag whose `p`-piece is the span of the first `p` columns of an orthonormal `basis`.
    pub fn from_ordered_basis(signature: Signature, basis: &Mat) -> Self {
        let pieces = signature
            .ps()
            .iter()
            .map(|&p| Subspace {
                basis: basis.columns(0, p).into_owned(),
            })
            .collect();
        Self { signature, pieces }
    }

    /// The coordinate flag `span(e_1, ..., e_p)`.
    pub fn standard(signature: Signature) -> Self {
        let d = signature.d();
        Self::from_ordered_basis(signature, &Mat::identity(d, d))
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn pieces(&self) -> &[Subspace] {
        &self.pieces
    }

    pub fn projectors(&self) -> Vec<Mat> {
        self.pieces.iter().map(Subspace::projector).collect()
    }

    /// `g x`.
    pub fn transform(&self, g: &Mat) -> Result<Flag> {
        let pieces = self
            .pieces
            .iter()
            .map(|s| s.transform(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Flag {
            signature: self.signature.clone(),
            pieces,
        })
    }

    pub fn nesting_residual(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| w[0].containment_residual(&w[1]))
            .fold(0.0, f64::max)
    }
}

/// `max_p ||P_{x_p} - P_{y_p}||_F`.
pub fn flag_distance(x: &Flag, y: &Flag) -> Result<f64> {
    if x.signature != y.signature {
        return Err(Error::SignatureMismatch {
            left: x.signature.ps().to_vec(),
            right: y.signature.ps().to_vec(),
        });
    }
    Ok(x.pieces
        .iter()
        .zip(&y.pieces)
        .map(|(a, b)| grassmann_distance(a, b))
        .fold(0.0, f64::max))
}

/// `xi^p` from a precomputed SVD: span of the `p` leading left singular vectors.
pub fn xi_p_from_svd(f: &Svd, p: usize, tol: f64) -> Result<Subspace> {
    let d = f.s.len();
    if p == 0 || p >= d {
        return Err(Error::OutOfRange(format!("p = {p} outside 1..{d}")));
    }
    f.check_gap(p, tol)?;
    Ok(Subspace {
        basis: f.u.columns(0, p).into_owned(),
    })
}

/// `xi^p(g)`: the `p`-plane whose volume `g^{-1}` contracts the most.
pub fn xi_p(g: &UnimodularMatrix, p: usize, tol: f64) -> Result<Subspace> {
    xi_p_from_svd(&svd(g), p, tol)
}

pub fn flag_from_svd(f: &Svd, signature: &Signature, tol: f64) -> Result<Flag> {
    for &p in signature.ps() {
        f.check_gap(p, tol)?;
    }
    Ok(Flag::from_ordered_basis(signature.clone(), &f.u))
}

/// `xi(g) = (xi^{p_1}(g) < ... < xi^{p_M}(g))`.
pub fn flag_of(g: &UnimodularMatrix, signature: &Signature, tol: f64) -> Result<Flag> {
    flag_from_svd(&svd(g), signature, tol)
}

/// `xi^*(g) = (xi^{d-p_M}(g^{-1}) < ... < xi^{d-p_1}(g^{-1}))`, read off the right
/// singular vectors of `g` (the left singular vectors of `g^{-1}` in reverse order).
pub fn dual_flag_from_svd(f: &Svd, signature: &Signature, tol: f64) -> Result<Flag> {
    for &p in signature.ps() {
        f.check_gap(p, tol)?;
    }
    let d = f.s.len();
    let reversed = Mat::from_fn(d, d, |i, j| f.v[(i, d - 1 - j)]);
    Ok(Flag::from_ordered_basis(signature.dual(), &reversed))
}

pub fn dual_flag_of(g: &UnimodularMatrix, signature: &Signature, tol: f64) -> Result<Flag> {
    dual_flag_from_svd(&svd(g), signature, tol)
}

// ---------------------------------------------------------------------------
// Eigenvalues and splittings

fn complex_eigenvalues(g: &Mat) -> Vec<(f64, f64)> {
    g.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Logarithms of eigenvalue moduli, non-increasing.
pub fn eigen_moduli(g: &UnimodularMatrix) -> WeylVector {
    let mut logs: Vec<f64> = complex_eigenvalues(g.matrix())
        .iter()
        .map(|&(re, im)| re.hypot(im).ln())
        .collect();
    logs.sort_by(|a, b| b.total_cmp(a));
    WeylVector(logs)
}

/// `max_i |lambda_i(g) - (1/n) log s_i(g^n)|`, with `g^n` accumulated in graded form.
pub fn eigen_moduli_deviation(g: &UnimodularMatrix, n: usize) -> f64 {
    let moduli = eigen_moduli(g);
    let power = GradedProduct::from_factors(g.dim(), std::iter::repeat(g.matrix()).take(n));
    let sv = power.log_singular_values();
    moduli
        .as_slice()
        .iter()
        .zip(sv.as_slice())
        .map(|(a, b)| (a - b / n as f64).abs())
        .fold(0.0, f64::max)
}

/// A direct sum decomposition `R^d = E_1 + ... + E_{M+1}` with `dim E_k = p_k - p_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    signature: Signature,
    blocks: Vec<Subspace>,
}

impl Splitting {
    pub fn new(signature: Signature, blocks: Vec<Subspace>) -> Result<Self> {
        let sizes = signature.block_sizes();
        if blocks.len() != sizes.len() || blocks.iter().zip(&sizes).any(|(b, &n)| b.dim() != n) {
            return Err(Error::Precondition(
                "block dimensions do not match the signature".into(),
            ));
        }
        let s = Self { signature, blocks };
        let smin = s.stacked_min_singular_value();
        if smin <= SPLIT_RANK_TOL {
            return Err(Error::Singular(format!(
                "blocks are not independent (smallest singular value {smin:e})"
            )));
        }
        Ok(s)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn blocks(&self) -> &[Subspace] {
        &self.blocks
    }

    /// The `d x d` matrix whose columns are the block bases in order.
    pub fn stacked_basis(&self) -> Mat {
        let d = self.signature.d();
        let mut m = Mat::zeros(d, d);
        let mut col = 0;
        for b in &self.blocks {
            m.columns_mut(col, b.dim()).copy_from(b.basis());
            col += b.dim();
        }
        m
    }

    pub fn stacked_min_singular_value(&self) -> f64 {
        *jacobi_svd(&self.stacked_basis()).s.last().unwrap()
    }

    /// `max_k ||(I - P_k) g P_k|| / ||g||`.
    pub fn invariance_residual(&self, g: &Mat) -> f64 {
        let d = g.nrows();
        let norm = jacobi_svd(g).s[0];
        self.blocks
            .iter()
            .map(|b| {
                let p = b.projector();
                ((Mat::identity(d, d) - &p) * g * &p).norm() / norm
            })
            .fold(0.0, f64::max)
    }
}

/// `max_k ||P_{E_k} - P_{F_k}||_F`.
pub fn splitting_distance(x: &Splitting, y: &Splitting) -> Result<f64> {
    if x.signature != y.signature {
        return Err(Error::SignatureMismatch {
            left: x.signature.ps().to_vec(),
            right: y.signature.ps().to_vec(),
        });
    }
    Ok(x.blocks
        .iter()
        .zip(&y.blocks)
        .map(|(a, b)| grassmann_distance(a, b))
        .fold(0.0, f64::max))
}

/// Groups the generalised eigenspaces of `g` by modulus windows cut at `P`.
///
/// Block `k` is the kernel of `prod (g - z)` over the eigenvalues `z` ranked
/// `p_{k-1} + 1 ..= p_k` by modulus; conjugate pairs enter as real quadratic
/// factors, so they always stay in one block.
pub fn eigen_splitting(g: &UnimodularMatrix, signature: &Signature, tol: f64) -> Result<Splitting> {
    let d = g.dim();
    if signature.d() != d {
        return Err(Error::SignatureMismatch {
            left: vec![signature.d()],
            right: vec![d],
        });
    }
    let mut eig = complex_eigenvalues(g.matrix());
    eig.sort_by(|a, b| {
        b.0.hypot(b.1)
            .total_cmp(&a.0.hypot(a.1))
            .then(b.1.total_cmp(&a.1))
    });
    let moduli: Vec<f64> = eig.iter().map(|&(re, im)| re.hypot(im)).collect();
    for &p in signature.ps() {
        let gap = (moduli[p - 1] - moduli[p]) / moduli[p - 1];
        if !(gap >= tol) {
            return Err(Error::GapTooSmall { index: p, gap, tol });
        }
    }
    let scale = jacobi_svd(g.matrix()).s[0];
    let id = Mat::identity(d, d);
    let bounds = signature.boundaries();
    let mut blocks = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut poly = id.clone();
        let mut taken = 0;
        for &(re, im) in &eig[lo..hi] {
            let m = re.hypot(im);
            let norm = (scale + m) * (scale + m);
            if im.abs() <= 1e-10 * m.max(1e-300) {
                poly = poly * (g.matrix() - &id * re) / (scale + m);
                taken += 1;
            } else if im > 0.0 {
                let quad = g.matrix() * g.matrix() - g.matrix() * (2.0 * re) + &id * (m * m);
                poly = poly * quad / norm;
                taken += 2;
            }
        }
        let size = hi - lo;
        if taken != size {
            return Err(Error::Singular(format!(
                "unpaired complex eigenvalues in block {lo}..{hi}"
            )));
        }
        let f = jacobi_svd(&poly);
        // kernel: right singular vectors of the `size` smallest singular values
        let kernel = f.v.columns(d - size, size).into_owned();
        blocks.push(Subspace::span(&kernel)?);
    }
    Splitting::new(signature.clone(), blocks)
}

// ---------------------------------------------------------------------------
// Iwasawa cocycle

/// `log |det_W g|` for `W` with orthonormal basis `B`: `sum log |R_ii|` for `g B = Q R`.
pub fn log_volume_distortion(g: &Mat, w: &Subspace) -> Result<f64> {
    if w.dim() == 0 {
        return Ok(0.0);
    }
    let image = g * w.basis();
    let r = image.clone().qr().r();
    let scale = jacobi_svd(g).s[0];
    let mut total = 0.0;
    for i in 0..w.dim() {
        let x = r[(i, i)].abs();
        if !(x > 1e-14 * scale) {
            return Err(Error::Singular(
                "volume distortion is numerically singular".into(),
            ));
        }
        total += x.ln();
    }
    Ok(total)
}

/// Iwasawa cocycle of `g` at the flag `t`: block increments `c_k` with
/// `c_1 + ... + c_k = log |det_{t_{p_k}} g|`. For a full flag this is the
/// usual `d`-vector; the last entry closes the sum to `log det g = 0`.
pub fn iwasawa_cocycle(g: &UnimodularMatrix, t: &Flag) -> Result<Vec<f64>> {
    let mut partial = Vec::with_capacity(t.pieces().len() + 1);
    for piece in t.pieces() {
        partial.push(log_volume_distortion(g.matrix(), piece)?);
    }
    partial.push(g.matrix().determinant().abs().ln());
    let mut out = Vec::with_capacity(partial.len());
    let mut prev = 0.0;
    for s in partial {
        out.push(s - prev);
        prev = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use nalgebra::SymmetricEigen;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_sl(d: usize, rng: &mut ChaCha8Rng) -> UnimodularMatrix {
        loop {
            let m = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.5..1.5));
            let det = m.determinant();
            if det.abs() > 0.05 {
                let m = if det < 0.0 {
                    let mut m = m;
                    m.row_mut(0).neg_mut();
                    m
                } else {
                    m
                };
                return UnimodularMatrix::new(m).unwrap();
            }
        }
    }

    pub(crate) fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> Mat {
        let m = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let mut q = m.qr().q();
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        q
    }

    fn sl(rows: &[&[f64]]) -> UnimodularMatrix {
        UnimodularMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn log_singular_values_examples() {
        let g = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
        let l = log_singular_values(&g).unwrap();
        assert!((l.as_slice()[0] - 4f64.ln()).abs() < 1e-15);
        assert!(l.as_slice()[1].abs() < 1e-15);
        assert!((l.as_slice()[2] + 4f64.ln()).abs() < 1e-15);
        assert_eq!(
            log_singular_values(&UnimodularMatrix::identity(3))
                .unwrap()
                .as_slice(),
            &[0.0; 3]
        );
    }

    #[test]
    fn singular_values_match_symmetric_eigensolver() {
        let mut rng = rng_from_seed(5);
        for d in 2..=6 {
            for _ in 0..20 {
                let g = random_sl(d, &mut rng);
                let ours = svd(&g).s;
                let gram = g.matrix() * g.matrix().transpose();
                let mut oracle: Vec<f64> = SymmetricEigen::new(gram)
                    .eigenvalues
                    .iter()
                    .map(|x| x.sqrt())
                    .collect();
                oracle.sort_by(|a, b| b.total_cmp(a));
                for (a, b) in ours.iter().zip(&oracle) {
                    assert!(((a - b) / b).abs() < 1e-8, "{a} vs {b}");
                }
                let l = log_singular_values(&g).unwrap();
                assert!(WeylVector::new(l.into_vec()).is_ok());
            }
        }
    }

    #[test]
    fn svd_reconstructs_and_sign_convention() {
        let mut rng = rng_from_seed(6);
        let g = random_sl(4, &mut rng);
        let f = svd(&g);
        let rec = &f.u * Mat::from_diagonal(&DVector::from_vec(f.s.clone())) * f.v.transpose();
        assert!((rec - g.matrix()).amax() < 1e-12);
        for k in 0..4 {
            let col = f.u.column(k);
            let big = col
                .iter()
                .cloned()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
        assert_eq!(svd(&g), svd(&g));
    }

    #[test]
    fn rq_factorisation() {
        let mut rng = rng_from_seed(8);
        let x = random_sl(4, &mut rng);
        let (r, q) = rq(x.matrix());
        assert!((&r * &q - x.matrix()).amax() < 1e-12);
        assert!((q.transpose() * &q - Mat::identity(4, 4)).amax() < 1e-12);
        for i in 0..4 {
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graded_product_keeps_small_singular_values() {
        // diag(6,1,1/6) conjugated by a fixed rotation, alternated with its inverse-free partner
        let a = UnimodularMatrix::diagonal(&[6.0, 1.0, 1.0 / 6.0]).unwrap();
        let mut rng = rng_from_seed(2);
        let k = random_rotation(3, &mut rng);
        let b = UnimodularMatrix::new_unchecked(&k * a.matrix() * k.transpose());
        let word = [
            &a, &b, &a, &b, &b, &a, &b, &a, &a, &b, &b, &a, &b, &a, &b, &b, &a, &a, &b, &a,
        ];
        let gp = GradedProduct::from_factors(3, word.iter().map(|m| m.matrix()));
        let l = gp.log_singular_values();
        // determinant one survives to high accuracy even with a spread near e^70
        assert!(l.spread() > 50.0);
        assert!(l.sum().abs() < 1e-10);
        // s_3 equals 1 / s_1 of the inverse product
        let inv: Vec<Mat> = word
            .iter()
            .rev()
            .map(|m| m.inverse().matrix().clone())
            .collect();
        let gi = GradedProduct::from_factors(3, inv.iter());
        let li = gi.log_singular_values();
        assert!((l.as_slice()[2] + li.as_slice()[0]).abs() < 1e-10);
        assert!((l.as_slice()[1] + li.as_slice()[1]).abs() < 1e-10);
    }

    #[test]
    fn xi_p_examples() {
        let g = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
        let e1 =
            Subspace::from_orthonormal(Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert!(grassmann_distance(&xi_p(&g, 1, DEFAULT_GAP_TOL).unwrap(), &e1) < 1e-14);
        assert!(matches!(
            xi_p(&UnimodularMatrix::identity(3), 1, DEFAULT_GAP_TOL),
            Err(Error::GapTooSmall { index: 1, .. })
        ));
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let r = random_rotation(3, &mut rng);
            let q = random_rotation(3, &mut rng);
            let h = UnimodularMatrix::new_unchecked(&r * g.matrix() * &q);
            let x = xi_p(&h, 2, DEFAULT_GAP_TOL).unwrap();
            let oracle = Subspace::from_orthonormal(r.columns(0, 2).into_owned()).unwrap();
            assert!(grassmann_distance(&x, &oracle) < 1e-10);
            // g^{-1} contracts the 2-volume of xi^2 by exactly 1/(s_1 s_2)
            let vol = log_volume_distortion(h.inverse().matrix(), &x).unwrap();
            assert!((vol + 4f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn flags_of_diagonal_and_conjugated() {
        let p = Signature::new(3, vec![1, 2]).unwrap();
        let g = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
        let x = flag_of(&g, &p, DEFAULT_GAP_TOL).unwrap();
        assert!(flag_distance(&x, &Flag::standard(p.clone())).unwrap() < 1e-14);
        // dual flag: e_3 < span(e_3, e_2)
        let y = dual_flag_of(&g, &p, DEFAULT_GAP_TOL).unwrap();
        let rev = Mat::from_fn(3, 3, |i, j| if i + j == 2 { 1.0 } else { 0.0 });
        assert!(flag_distance(&y, &Flag::from_ordered_basis(p.dual(), &rev)).unwrap() < 1e-14);
        let mut rng = rng_from_seed(10);
        for _ in 0..20 {
            let r = random_rotation(3, &mut rng);
            let q = random_rotation(3, &mut rng);
            let h = UnimodularMatrix::new_unchecked(&r * g.matrix() * &q);
            let x = flag_of(&h, &p, DEFAULT_GAP_TOL).unwrap();
            assert!(flag_distance(&x, &Flag::from_ordered_basis(p.clone(), &r)).unwrap() < 1e-8);
            // dual flag agrees with the flag of the inverse
            let y = dual_flag_of(&h, &p, DEFAULT_GAP_TOL).unwrap();
            let y_inv = flag_of(&h.inverse(), &p.dual(), DEFAULT_GAP_TOL).unwrap();
            assert!(flag_distance(&y, &y_inv).unwrap() < 1e-8);
            assert!(x.nesting_residual() < 1e-12);
        }
    }

    #[test]
    fn transversality_of_xi_p_and_dual() {
        let mut rng = rng_from_seed(12);
        for d in 3..=5 {
            for _ in 0..20 {
                let g = random_sl(d, &mut rng);
                for p in 1..d {
                    let (Ok(a), Ok(b)) = (xi_p(&g, p, 1e-6), xi_p(&g.inverse(), d - p, 1e-6))
                    else {
                        continue;
                    };
                    let mut stacked = Mat::zeros(d, d);
                    stacked.columns_mut(0, p).copy_from(a.basis());
                    stacked.columns_mut(p, d - p).copy_from(b.basis());
                    assert!(*jacobi_svd(&stacked).s.last().unwrap() > 1e-8);
                }
            }
        }
    }

    #[test]
    fn eigen_moduli_examples() {
        let t = 0.7f64;
        let rot = sl(&[&[t.cos(), -t.sin()], &[t.sin(), t.cos()]]);
        assert!(eigen_moduli(&rot)
            .as_slice()
            .iter()
            .all(|x| x.abs() < 1e-12));
        let tri = sl(&[&[2.0, 1.0], &[0.0, 0.5]]);
        let m = eigen_moduli(&tri);
        assert!((m.as_slice()[0] - 2f64.ln()).abs() < 1e-12);
        assert!((m.as_slice()[1] + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn eigen_moduli_match_power_singular_values() {
        let mut rng = rng_from_seed(13);
        let mut checked = 0;
        for _ in 0..50 {
            let g = random_sl(3, &mut rng);
            // well-conditioned: moderate norm and well separated moduli
            let m = eigen_moduli(&g);
            if svd(&g).s[0] > 5.0 || m.as_slice().windows(2).any(|w| w[0] - w[1] < 0.25) {
                continue;
            }
            assert!(eigen_moduli_deviation(&g, 32) <= 0.05, "{:?}", g);
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn eigen_splitting_examples() {
        let p = Signature::new(3, vec![1, 2]).unwrap();
        let g = UnimodularMatrix::diagonal(&[4.0, 1.0, 0.25]).unwrap();
        let s = eigen_splitting(&g, &p, DEFAULT_GAP_TOL).unwrap();
        let id = Mat::identity(3, 3);
        for k in 0..3 {
            let e = Subspace::from_orthonormal(id.columns(k, 1).into_owned()).unwrap();
            assert!(grassmann_distance(&s.blocks()[k], &e) < 1e-12);
        }
        let tri = sl(&[&[2.0, 1.0], &[0.0, 0.5]]);
        let s =
            eigen_splitting(&tri, &Signature::new(2, vec![1]).unwrap(), DEFAULT_GAP_TOL).unwrap();
        let e1 = Subspace::span(&Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let e2 = Subspace::span(&Mat::from_column_slice(2, 1, &[1.0, -1.5])).unwrap();
        assert!(grassmann_distance(&s.blocks()[0], &e1) < 1e-12);
        assert!(grassmann_distance(&s.blocks()[1], &e2) < 1e-12);
        assert!(eigen_splitting(&UnimodularMatrix::identity(3), &p, DEFAULT_GAP_TOL).is_err());
    }

    #[test]
    fn eigen_splitting_invariant_and_power_stable() {
        let mut rng = rng_from_seed(14);
        let mut checked = 0;
        for _ in 0..60 {
            let d = rng.gen_range(3..=5);
            let g = random_sl(d, &mut rng);
            let sigs = Signature::all(d);
            let p = &sigs[rng.gen_range(0..sigs.len())];
            let Ok(s) = eigen_splitting(&g, p, 1e-3) else {
                continue;
            };
            assert!(s.invariance_residual(g.matrix()) < 1e-6);
            for n in [2, 3] {
                let sn = eigen_splitting(&g.pow(n), p, 1e-3).unwrap();
                assert!(splitting_distance(&s, &sn).unwrap() < 1e-6);
            }
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn flag_distance_properties() {
        let p = Signature::new(2, vec![1]).unwrap();
        let x = Flag::standard(p.clone());
        let y =
            Flag::from_ordered_basis(p.clone(), &Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(flag_distance(&x, &x).unwrap(), 0.0);
        assert!((flag_distance(&x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let other = Flag::standard(Signature::new(3, vec![1]).unwrap());
        assert!(flag_distance(&x, &other).is_err());

        let mut rng = rng_from_seed(15);
        let sig = Signature::new(4, vec![1, 3]).unwrap();
        let flags: Vec<Flag> = (0..60)
            .map(|_| Flag::from_ordered_basis(sig.clone(), &random_rotation(4, &mut rng)))
            .collect();
        let mut triples = 0;
        for a in &flags {
            for b in &flags {
                let ab = flag_distance(a, b).unwrap();
                assert!((ab - flag_distance(b, a).unwrap()).abs() < 1e-15);
                for c in flags.iter().step_by(20) {
                    assert!(
                        flag_distance(a, c).unwrap() <= ab + flag_distance(b, c).unwrap() + 1e-12
                    );
                    triples += 1;
                }
            }
        }
        assert!(triples >= 10_000);
    }

    #[test]
    fn iwasawa_examples() {
        let full = Signature::full(3).unwrap();
        let std = Flag::standard(full.clone());
        let c = iwasawa_cocycle(&UnimodularMatrix::identity(3), &std).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-15));
        let g = sl(&[&[2.0, 3.0, -1.0], &[0.0, -0.5, 7.0], &[0.0, 0.0, -1.0]]);
        let c = iwasawa_cocycle(&g, &std).unwrap();
        let expected = [2f64.ln(), 0.5f64.ln(), 0.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iwasawa_cocycle_identity() {
        let mut rng = rng_from_seed(16);
        for _ in 0..200 {
            let d = rng.gen_range(2..=5);
            let g = random_sl(d, &mut rng);
            let h = random_sl(d, &mut rng);
            let t = Flag::from_ordered_basis(
                Signature::full(d).unwrap(),
                &random_rotation(d, &mut rng),
            );
            let lhs = iwasawa_cocycle(&g.mul(&h), &t).unwrap();
            let ht = t.transform(h.matrix()).unwrap();
            let a = iwasawa_cocycle(&g, &ht).unwrap();
            let b = iwasawa_cocycle(&h, &t).unwrap();
            for k in 0..d {
                assert!((lhs[k] - a[k] - b[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unimodular_validation() {
        assert!(matches!(
            UnimodularMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]),
            Err(Error::NonPositiveDeterminant { .. })
        ));
        let g = UnimodularMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!((g.matrix().determinant() - 1.0).abs() < 1e-12);
        assert!(UnimodularMatrix::from_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(UnimodularMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0]]).is_err());
    }
}
