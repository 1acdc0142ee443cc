//! Affine charts on flag space around a dual flag, and the linearised action.
//!
//! For `y` in `F_{P*}` and a splitting `V = (V_1, ..., V_{M+1})` compatible with
//! `y`, the flags transverse to `y` are parametrised by nilpotent maps
//! `f in Nil(V)` through `phi_V(f)_k = (id + f)(V_1 + ... + V_k)`. In these
//! charts the group acts by `f -> g f g^{-1}`.
//!
//! A map `f` is stored by its blocks `f_{i,j}: V_i -> V_j`, `i < j`, written in
//! the orthonormal bases carried by the splitting.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functionals::Signature;
use crate::matrixops::{
    dual_flag_from_svd, grassmann_distance, jacobi_svd, svd, Flag, Mat, Splitting, Subspace, Svd,
    UnimodularMatrix,
};

/// Compatibility residual accepted for a splitting.
pub const COMPAT_TOL: f64 = 1e-8;
/// Smallest principal angle (radians) at which a flag still counts as transverse.
pub const TRANSVERSE_ANGLE: f64 = 1e-4;

/// A splitting of `R^d` together with the dual flag it is compatible with.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleSplitting {
    base: Flag,
    splitting: Splitting,
}

impl CompatibleSplitting {
    /// `base` lives in `F_{P*}`; `blocks` has dimensions `p_k - p_{k-1}`.
    pub fn new(base: Flag, blocks: Vec<Subspace>) -> Result<Self> {
        let signature = base.signature().dual();
        let s = Self {
            splitting: Splitting::new(signature, blocks)?,
            base,
        };
        let r = s.compatibility_residual()?;
        if r > COMPAT_TOL {
            return Err(Error::Precondition(format!(
                "splitting not compatible with its flag (residual {r:e})"
            )));
        }
        Ok(s)
    }

    pub fn base(&self) -> &Flag {
        &self.base
    }

    pub fn splitting(&self) -> &Splitting {
        &self.splitting
    }

    pub fn signature(&self) -> &Signature {
        self.splitting.signature()
    }

    pub fn blocks(&self) -> &[Subspace] {
        self.splitting.blocks()
    }

    /// `max_i ||P(y_{j >= i}) - P(V_i + ... + V_{M+1})||_F` over `i = 2..=M+1`.
    pub fn compatibility_residual(&self) -> Result<f64> {
        let blocks = self.blocks();
        let m = blocks.len() - 1;
        let mut worst = 0.0f64;
        for i in 1..=m {
            let tail = stack(&blocks[i..]);
            let span = Subspace::span(&tail)?;
            // y_{j >= i} is the piece of dimension d - p_{i-1}, index m - i in F_{P*}
            let piece = &self.base.pieces()[m - i];
            worst = worst.max(grassmann_distance(&span, piece));
        }
        Ok(worst)
    }

    /// `(g V, g y)`.
    pub fn transform(&self, g: &Mat) -> Result<Self> {
        let blocks = self
            .blocks()
            .iter()
            .map(|b| b.transform(g))
            .collect::<Result<Vec<_>>>()?;
        let base = self.base.transform(g)?;
        Ok(Self {
            splitting: Splitting::new(self.signature().clone(), blocks)?,
            base,
        })
    }

    /// `W_i = (id + u)(V_i)`: another splitting compatible with the same flag.
    pub fn sheared(&self, u: &NilCoords) -> Result<Self> {
        let ambient = u.ambient(self);
        let blocks = self
            .blocks()
            .iter()
            .map(|b| Subspace::span(&(b.basis() + &ambient * b.basis())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.base.clone(), blocks)
    }

    /// The `d x d` matrix `[V_1 | ... | V_{M+1}]`.
    pub fn stacked_basis(&self) -> Mat {
        self.splitting.stacked_basis()
    }

    /// The flag `V_1 < V_1 + V_2 < ...` in `F_P`, i.e. `phi_V(0)`.
    pub fn origin(&self) -> Flag {
        phi_v(self, &NilCoords::zero(self.signature()))
    }
}

fn stack(blocks: &[Subspace]) -> Mat {
    let d = blocks[0].ambient();
    let cols: usize = blocks.iter().map(Subspace::dim).sum();
    let mut m = Mat::zeros(d, cols);
    let mut c = 0;
    for b in blocks {
        m.columns_mut(c, b.dim()).copy_from(b.basis());
        c += b.dim();
    }
    m
}

/// `V_i(y) = y_{j >= i}` intersected with the orthogonal complement of `y_{j > i}`.
pub fn perp_splitting(y: &Flag) -> Result<CompatibleSplitting> {
    let d = y.signature().d();
    let pieces = y.pieces();
    let m = pieces.len();
    let mut blocks = Vec::with_capacity(m + 1);
    // blocks from V_1 (complement of the largest piece) down to V_{M+1} (the smallest)
    for i in 0..=m {
        let outer: Mat = if i == 0 {
            Mat::identity(d, d)
        } else {
            pieces[m - i].basis().clone()
        };
        let block = if i == m {
            Subspace::from_orthonormal(outer)?
        } else {
            let inner = &pieces[m - 1 - i];
            let residual = (Mat::identity(d, d) - inner.projector()) * &outer;
            let n = outer.ncols() - inner.dim();
            let f = jacobi_svd(&residual);
            if f.s[n - 1] <= 1e-8 {
                return Err(Error::Singular("degenerate flag".into()));
            }
            Subspace::from_orthonormal(f.u.columns(0, n).into_owned())?
        };
        blocks.push(block);
    }
    CompatibleSplitting::new(y.clone(), blocks)
}

/// The splitting of `R^d` into right-singular-vector groups of `g`
/// (eigenspaces of `sqrt(g^t g)`), compatible with the dual flag `xi*(g)`.
pub fn canonical_splitting(
    g: &UnimodularMatrix,
    signature: &Signature,
    tol: f64,
) -> Result<CompatibleSplitting> {
    canonical_splitting_from_svd(&svd(g), signature, tol)
}

pub fn canonical_splitting_from_svd(
    f: &Svd,
    signature: &Signature,
    tol: f64,
) -> Result<CompatibleSplitting> {
    let base = dual_flag_from_svd(f, signature, tol)?;
    let bounds = signature.boundaries();
    let blocks = bounds
        .windows(2)
        .map(|w| Subspace::from_orthonormal(f.v.columns(w[0], w[1] - w[0]).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    CompatibleSplitting::new(base, blocks)
}

/// Coordinates of `f in Nil(V)`: blocks `f_{i,j}` of shape `n_j x n_i` for `i < j`,
/// in lexicographic order of `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NilCoords {
    sizes: Vec<usize>,
    blocks: Vec<Mat>,
}

impl NilCoords {
    pub fn zero(signature: &Signature) -> Self {
        let sizes = signature.block_sizes();
        let blocks = block_pairs(sizes.len())
            .map(|(i, j)| Mat::zeros(sizes[j], sizes[i]))
            .collect();
        Self { sizes, blocks }
    }

    /// Reads column-major blocks in lexicographic `(i, j)` order.
    pub fn from_vec(signature: &Signature, values: &[f64]) -> Result<Self> {
        let mut out = Self::zero(signature);
        if values.len() != out.dim() {
            return Err(Error::Shape {
                rows: values.len(),
                cols: 1,
                expected: out.dim(),
            });
        }
        let mut at = 0;
        for b in &mut out.blocks {
            let n = b.len();
            b.copy_from_slice(&values[at..at + n]);
            at += n;
        }
        Ok(out)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    /// `#S(P)`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn block(&self, i: usize, j: usize) -> &Mat {
        let k = block_pairs(self.sizes.len())
            .position(|p| p == (i, j))
            .expect("block index with i < j");
        &self.blocks[k]
    }

    /// Coordinate norm; equals the Hilbert-Schmidt norm for orthogonal splittings.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Block strictly lower triangular matrix of `f` in the stacked-basis coordinates.
    fn lower_matrix(&self) -> Mat {
        let d: usize = self.sizes.iter().sum();
        let offsets = offsets(&self.sizes);
        let mut n = Mat::zeros(d, d);
        for ((i, j), b) in block_pairs(self.sizes.len()).zip(&self.blocks) {
            n.view_mut((offsets[j], offsets[i]), (self.sizes[j], self.sizes[i]))
                .copy_from(b);
        }
        n
    }

    /// `f` as a map of `R^d`: `S N S^{-1}` with `S` the stacked basis of `v`.
    pub fn ambient(&self, v: &CompatibleSplitting) -> Mat {
        let s = v.stacked_basis();
        let s_inv = s
            .clone()
            .try_inverse()
            .expect("splittings have invertible stacked bases");
        &s * self.lower_matrix() * s_inv
    }
}

fn block_pairs(blocks: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..blocks).flat_map(move |i| ((i + 1)..blocks).map(move |j| (i, j)))
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

/// `phi_V(f)`.
pub fn phi_v(v: &CompatibleSplitting, f: &NilCoords) -> Flag {
    let s = v.stacked_basis();
    let d = s.nrows();
    let image = &s * (Mat::identity(d, d) + f.lower_matrix());
    let signature = v.signature().clone();
    let pieces = signature
        .ps()
        .iter()
        .map(|&p| Subspace::span(&image.columns(0, p).into_owned()).expect("id + f is invertible"))
        .collect();
    Flag::new(signature, pieces).expect("images of nested sums are nested")
}

/// `phi_V^{-1}(x)` for `x` transverse to the base flag of `v`.
pub fn phi_v_inverse(v: &CompatibleSplitting, x: &Flag) -> Result<NilCoords> {
    let signature = v.signature();
    if x.signature() != signature {
        return Err(Error::SignatureMismatch {
            left: x.signature().ps().to_vec(),
            right: signature.ps().to_vec(),
        });
    }
    let m = signature.m();
    for (k, piece) in x.pieces().iter().enumerate() {
        // x_{p_k} against y of complementary dimension d - p_k
        let opposite = &v.base().pieces()[m - 1 - k];
        let sine = piece.min_angle_sine(opposite);
        if sine < TRANSVERSE_ANGLE.sin() {
            return Err(Error::NotTransverse {
                angle: sine.min(1.0).asin(),
            });
        }
    }
    let s = v.stacked_basis();
    let lu = s.lu();
    let sizes = signature.block_sizes();
    let offs = offsets(&sizes);
    let d = signature.d();
    let mut out = NilCoords::zero(signature);
    for (k, piece) in x.pieces().iter().enumerate() {
        let coords = lu
            .solve(piece.basis())
            .ok_or_else(|| Error::Singular("stacked basis".into()))?;
        let p = offs[k + 1];
        let top = coords.rows(0, p).into_owned();
        let bottom = coords.rows(p, d - p).into_owned();
        let top_inv = top
            .try_inverse()
            .ok_or(Error::NotTransverse { angle: 0.0 })?;
        let graph = bottom * top_inv;
        for j in (k + 1)..sizes.len() {
            let idx = block_pairs(sizes.len()).position(|q| q == (k, j)).unwrap();
            out.blocks[idx] = graph
                .view((offs[j] - p, offs[k]), (sizes[j], sizes[k]))
                .into_owned();
        }
    }
    Ok(out)
}

/// A linear map between two `Nil` spaces in block coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NilOperator {
    signature: Signature,
    matrix: Mat,
}

impl NilOperator {
    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn apply(&self, f: &NilCoords) -> NilCoords {
        let v = DMatrix::from_column_slice(f.dim(), 1, &f.to_vec());
        let out = &self.matrix * v;
        NilCoords::from_vec(&self.signature, out.as_slice()).expect("operator preserves dimension")
    }

    pub fn compose(&self, inner: &NilOperator) -> NilOperator {
        NilOperator {
            signature: self.signature.clone(),
            matrix: &self.matrix * &inner.matrix,
        }
    }

    /// Singular values, non-increasing.
    pub fn singular_values(&self) -> Vec<f64> {
        jacobi_svd(&self.matrix).s
    }
}

/// `phi_V^{-1} o g o phi_{g^{-1} V}` as the linear map `f -> g f g^{-1}` from
/// `Nil(g^{-1} V)` to `Nil(V)`. Returns the domain splitting `g^{-1} V` with the
/// bases the coordinates refer to.
pub fn conjugation_map(
    g: &UnimodularMatrix,
    v: &CompatibleSplitting,
) -> Result<(CompatibleSplitting, NilOperator)> {
    let g_inv = g.inverse();
    let domain = v.transform(g_inv.matrix())?;
    let restrictions = v
        .blocks()
        .iter()
        .zip(domain.blocks())
        .map(|(target, source)| {
            let a = target.basis().transpose() * g.matrix() * source.basis();
            let f = jacobi_svd(&a);
            if *f.s.last().unwrap() <= 1e-12 * f.s[0] {
                return Err(Error::Singular("block restriction of g is singular".into()));
            }
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    let inverses: Vec<Mat> = restrictions
        .iter()
        .map(|a| a.clone().try_inverse().unwrap())
        .collect();
    let signature = v.signature().clone();
    let sizes = signature.block_sizes();
    let dim: usize = block_pairs(sizes.len())
        .map(|(i, j)| sizes[i] * sizes[j])
        .sum();
    let mut matrix = Mat::zeros(dim, dim);
    let mut at = 0;
    for (i, j) in block_pairs(sizes.len()) {
        // vec(A_j F A_i^{-1}) = (A_i^{-T} kron A_j) vec(F)
        let k = inverses[i].transpose().kronecker(&restrictions[j]);
        let n = k.nrows();
        matrix.view_mut((at, at), (n, n)).copy_from(&k);
        at += n;
    }
    Ok((domain, NilOperator { signature, matrix }))
}

/// Axes of the image of the unit ball of `Nil(V)` under `f -> g f g^{-1}`, with
/// `V` the canonical splitting of `g`. Non-increasing.
pub fn ellipsoid_axes(g: &UnimodularMatrix, signature: &Signature, tol: f64) -> Result<Vec<f64>> {
    let f = svd(g);
    let v = canonical_splitting_from_svd(&f, signature, tol)?;
    let target = v.transform(g.matrix())?;
    let (_, op) = conjugation_map(g, &target)?;
    Ok(op.singular_values())
}

/// `{s_b / s_a : a in block i, b in block j, i < j}`, non-increasing.
pub fn cross_block_ratios(s: &[f64], signature: &Signature) -> Vec<f64> {
    let bounds = signature.boundaries();
    let mut out = Vec::new();
    for (i, j) in block_pairs(bounds.len() - 1) {
        for a in bounds[i]..bounds[i + 1] {
            for b in bounds[j]..bounds[j + 1] {
                out.push(s[b] / s[a]);
            }
        }
    }
    out.sort_by(|x, y| y.total_cmp(x));
    out
}

/// Largest relative deviation between the ellipsoid axes and the cross-block ratios.
pub fn ellipsoid_deviation(g: &UnimodularMatrix, signature: &Signature, tol: f64) -> Result<f64> {
    let axes = ellipsoid_axes(g, signature, tol)?;
    let ratios = cross_block_ratios(&svd(g).s, signature);
    Ok(axes
        .iter()
        .zip(&ratios)
        .map(|(a, r)| ((a - r) / r).abs())
        .fold(0.0, f64::max))
}

/// Largest deviation from affinity of `phi_W^{-1} o phi_V` on the probes `f1, f2, t`:
/// `h(f1 + f2) - h(f1) - h(f2) + h(0)` and `h(t f1) - h(0) - t (h(f1) - h(0))`.
pub fn change_of_splitting_residual(
    v: &CompatibleSplitting,
    w: &CompatibleSplitting,
    f1: &NilCoords,
    f2: &NilCoords,
    t: f64,
) -> Result<f64> {
    let sig = v.signature();
    let h = |f: &[f64]| -> Result<Vec<f64>> {
        let x = phi_v(v, &NilCoords::from_vec(sig, f)?);
        Ok(phi_v_inverse(w, &x)?.to_vec())
    };
    let (a, b) = (f1.to_vec(), f2.to_vec());
    let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let scaled: Vec<f64> = a.iter().map(|x| t * x).collect();
    let h0 = h(&vec![0.0; a.len()])?;
    let (ha, hb, hs, ht) = (h(&a)?, h(&b)?, h(&sum)?, h(&scaled)?);
    let mut worst = 0.0f64;
    for k in 0..a.len() {
        worst = worst.max((hs[k] - ha[k] - hb[k] + h0[k]).abs());
        worst = worst.max((ht[k] - h0[k] - t * (ha[k] - h0[k])).abs());
    }
    Ok(worst)
}
