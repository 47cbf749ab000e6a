//! Block matrices over cluster pairs and the weighted norm calculus.
//!
//! Real block matrices act on per-mode pairs (p, q). Complex ones either
//! act on per-mode pairs (xi, eta) or, for scalar matrices Q, on one
//! component per mode.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, LinalgScalar};
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::modes::Clustering;
use crate::C64;

pub trait Scalar: LinalgScalar + Send + Sync + std::fmt::Debug + PartialEq {
    fn mag2(&self) -> f64;
    fn from_re(x: f64) -> Self;
    fn conj_val(&self) -> Self;
}

impl Scalar for f64 {
    fn mag2(&self) -> f64 {
        self * self
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn conj_val(&self) -> Self {
        *self
    }
}

impl Scalar for C64 {
    fn mag2(&self) -> f64 {
        self.norm_sqr()
    }
    fn from_re(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj_val(&self) -> Self {
        self.conj()
    }
}

/// Level sizes and weights of a clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
    pub level_w: Vec<u32>,
    pub offsets: Vec<usize>,
    pub w_max: u32,
}

impl BlockShape {
    pub fn new(clus: &Clustering) -> Arc<Self> {
        Arc::new(BlockShape {
            sizes: clus.levels.iter().map(|l| l.size()).collect(),
            weights: clus.level_weights(),
            level_w: clus.levels.iter().map(|l| l.w).collect(),
            offsets: clus.levels.iter().map(|l| l.offset).collect(),
            w_max: clus.w_max,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_modes(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Level of every flat mode index.
    pub fn mode_level(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_modes());
        for (i, &n) in self.sizes.iter().enumerate() {
            out.extend(std::iter::repeat(i).take(n));
        }
        out
    }

    /// Flat range of a level with `comp` components per mode.
    pub fn range(&self, level: usize, comp: usize) -> std::ops::Range<usize> {
        let a = comp * self.offsets[level];
        a..a + comp * self.sizes[level]
    }
}

/// Vector over the modes of a clustering, two components per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector<T> {
    pub shape: Arc<BlockShape>,
    pub data: Array1<T>,
}

impl<T: Scalar> ModeVector<T> {
    pub fn zeros(shape: &Arc<BlockShape>) -> Self {
        ModeVector {
            shape: shape.clone(),
            data: Array1::zeros(2 * shape.n_modes()),
        }
    }

    pub fn from_data(shape: &Arc<BlockShape>, data: Array1<T>) -> Result<Self> {
        if data.len() != 2 * shape.n_modes() {
            return Err(KamError::Layout(format!(
                "vector of length {} on {} modes",
                data.len(),
                shape.n_modes()
            )));
        }
        Ok(ModeVector {
            shape: shape.clone(),
            data,
        })
    }

    /// Euclidean norm of the restriction to one level.
    pub fn level_norm(&self, level: usize) -> f64 {
        level_norm(&self.shape, self.data.as_slice().unwrap(), level)
    }

    /// `sqrt(sum_a |zeta_a|^2 w_a^{2s})`.
    pub fn norm_s(&self, s: f64) -> f64 {
        norm_s(&self.shape, self.data.as_slice().unwrap(), s)
    }

    /// `sup_[a] w_a^beta |zeta_[a]|`.
    pub fn norm_l(&self, beta: f64) -> f64 {
        norm_l(&self.shape, self.data.as_slice().unwrap(), beta, false)
    }

    /// `sup_[a] w_a^{beta+1} |zeta_[a]|`.
    pub fn norm_l_plus(&self, beta: f64) -> f64 {
        norm_l(&self.shape, self.data.as_slice().unwrap(), beta, true)
    }
}

pub fn level_norm<T: Scalar>(shape: &BlockShape, v: &[T], level: usize) -> f64 {
    v[shape.range(level, 2)].iter().map(|x| x.mag2()).sum::<f64>().sqrt()
}

pub fn norm_s<T: Scalar>(shape: &BlockShape, v: &[T], s: f64) -> f64 {
    let mut acc = 0.0;
    for l in 0..shape.n_levels() {
        let w2 = shape.weights[l].powf(2.0 * s);
        acc += w2 * v[shape.range(l, 2)].iter().map(|x| x.mag2()).sum::<f64>();
    }
    acc.sqrt()
}

pub fn norm_l<T: Scalar>(shape: &BlockShape, v: &[T], beta: f64, plus: bool) -> f64 {
    let mut m = 0.0f64;
    for l in 0..shape.n_levels() {
        let e = if plus { beta + 1.0 } else { beta };
        m = m.max(shape.weights[l].powf(e) * level_norm(shape, v, l));
    }
    m
}

/// Block norm `sup w_a^beta w_b^beta |M_ab|_HS` of a dense matrix laid out
/// with `comp` components per mode; `plus` multiplies by `1 + |w_a - w_b|`.
pub fn dense_norm<T: Scalar>(shape: &BlockShape, m: ArrayView2<T>, comp: usize, beta: f64, plus: bool) -> f64 {
    let mut best = 0.0f64;
    for a in 0..shape.n_levels() {
        let ra = shape.range(a, comp);
        for b in 0..shape.n_levels() {
            let rb = shape.range(b, comp);
            let hs = m
                .slice(s![ra.clone(), rb])
                .iter()
                .map(|x| x.mag2())
                .sum::<f64>()
                .sqrt();
            if hs == 0.0 {
                continue;
            }
            let (wa, wb) = (shape.weights[a], shape.weights[b]);
            let mut v = wa.powf(beta) * wb.powf(beta) * hs;
            if plus {
                v *= 1.0 + (wa - wb).abs();
            }
            best = best.max(v);
        }
    }
    best
}

/// Block-sparse matrix over cluster pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix<T> {
    pub shape: Arc<BlockShape>,
    /// Components per mode: 2 for (p, q) or (xi, eta), 1 for scalar Q.
    pub comp: usize,
    pub blocks: BTreeMap<(usize, usize), Array2<T>>,
    pub symmetric: bool,
}

impl<T: Scalar> BlockMatrix<T> {
    pub fn zeros(shape: &Arc<BlockShape>, comp: usize) -> Self {
        BlockMatrix {
            shape: shape.clone(),
            comp,
            blocks: BTreeMap::new(),
            symmetric: false,
        }
    }

    pub fn identity(shape: &Arc<BlockShape>, comp: usize) -> Self {
        let mut m = Self::zeros(shape, comp);
        for l in 0..shape.n_levels() {
            m.blocks.insert((l, l), Array2::eye(comp * shape.sizes[l]));
        }
        m.symmetric = true;
        m
    }

    pub fn dim(&self) -> usize {
        self.comp * self.shape.n_modes()
    }

    pub fn block_dims(&self, a: usize, b: usize) -> (usize, usize) {
        (self.comp * self.shape.sizes[a], self.comp * self.shape.sizes[b])
    }

    pub fn set_block(&mut self, a: usize, b: usize, m: Array2<T>) -> Result<()> {
        if m.dim() != self.block_dims(a, b) {
            return Err(KamError::Layout(format!(
                "block ({a}, {b}) has shape {:?}, expected {:?}",
                m.dim(),
                self.block_dims(a, b)
            )));
        }
        self.blocks.insert((a, b), m);
        Ok(())
    }

    pub fn block(&self, a: usize, b: usize) -> Array2<T> {
        self.blocks
            .get(&(a, b))
            .cloned()
            .unwrap_or_else(|| Array2::zeros(self.block_dims(a, b)))
    }

    /// Keeps every block with a nonzero entry.
    pub fn from_dense(shape: &Arc<BlockShape>, comp: usize, m: ArrayView2<T>) -> Result<Self> {
        let n = comp * shape.n_modes();
        if m.dim() != (n, n) {
            return Err(KamError::Layout(format!("dense matrix {:?}, expected {n}x{n}", m.dim())));
        }
        let mut out = Self::zeros(shape, comp);
        for a in 0..shape.n_levels() {
            for b in 0..shape.n_levels() {
                let blk = m.slice(s![shape.range(a, comp), shape.range(b, comp)]);
                if blk.iter().any(|x| x.mag2() != 0.0) {
                    out.blocks.insert((a, b), blk.to_owned());
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for (&(a, b), blk) in &self.blocks {
            m.slice_mut(s![self.shape.range(a, self.comp), self.shape.range(b, self.comp)])
                .assign(blk);
        }
        m
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.comp != other.comp {
            return Err(KamError::Layout("clustering mismatch".into()));
        }
        Ok(())
    }

    pub fn hs(&self, a: usize, b: usize) -> f64 {
        self.blocks
            .get(&(a, b))
            .map(|m| m.iter().map(|x| x.mag2()).sum::<f64>().sqrt())
            .unwrap_or(0.0)
    }

    /// `|A|_beta = sup w_a^beta w_b^beta |A_ab|_HS`.
    pub fn norm_beta(&self, beta: f64) -> f64 {
        self.weighted_sup(beta, false)
    }

    /// `|A|_{beta+}`, with the extra factor `1 + |w_a - w_b|`.
    pub fn norm_beta_plus(&self, beta: f64) -> f64 {
        self.weighted_sup(beta, true)
    }

    fn weighted_sup(&self, beta: f64, plus: bool) -> f64 {
        let mut best = 0.0f64;
        for &(a, b) in self.blocks.keys() {
            let (wa, wb) = (self.shape.weights[a], self.shape.weights[b]);
            let mut v = wa.powf(beta) * wb.powf(beta) * self.hs(a, b);
            if plus {
                v *= 1.0 + (wa - wb).abs();
            }
            best = best.max(v);
        }
        best
    }

    /// Operator 2-norm upper bound by the Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.blocks
            .values()
            .map(|m| m.iter().map(|x| x.mag2()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Block product, accumulated in ascending intermediate level.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut rows: BTreeMap<usize, Vec<(usize, &Array2<T>)>> = BTreeMap::new();
        for (&(k, b), m) in &other.blocks {
            rows.entry(k).or_default().push((b, m));
        }
        let mut out = Self::zeros(&self.shape, self.comp);
        for (&(a, k), ma) in &self.blocks {
            if let Some(list) = rows.get(&k) {
                for &(b, mb) in list {
                    let p = ma.dot(mb);
                    match out.blocks.get_mut(&(a, b)) {
                        Some(acc) => acc.zip_mut_with(&p, |x, y| *x = *x + *y),
                        None => {
                            out.blocks.insert((a, b), p);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &ModeVector<T>) -> Result<ModeVector<T>> {
        if self.comp != 2 || *self.shape != *v.shape {
            return Err(KamError::Layout("clustering mismatch".into()));
        }
        let mut out = ModeVector::zeros(&self.shape);
        for (&(a, b), m) in &self.blocks {
            let x = v.data.slice(s![self.shape.range(b, 2)]);
            let y = m.dot(&x);
            let mut o = out.data.slice_mut(s![self.shape.range(a, 2)]);
            o.zip_mut_with(&y, |a, b| *a = *a + *b);
        }
        Ok(out)
    }

    /// Rank-one matrix `x y^T`.
    pub fn outer(x: &ModeVector<T>, y: &ModeVector<T>) -> Result<Self> {
        if x.shape != y.shape {
            return Err(KamError::Layout("clustering mismatch".into()));
        }
        let shape = &x.shape;
        let mut out = Self::zeros(shape, 2);
        for a in 0..shape.n_levels() {
            let xa = x.data.slice(s![shape.range(a, 2)]);
            if xa.iter().all(|v| v.mag2() == 0.0) {
                continue;
            }
            for b in 0..shape.n_levels() {
                let yb = y.data.slice(s![shape.range(b, 2)]);
                if yb.iter().all(|v| v.mag2() == 0.0) {
                    continue;
                }
                let mut m = Array2::zeros((xa.len(), yb.len()));
                for i in 0..xa.len() {
                    for j in 0..yb.len() {
                        m[[i, j]] = xa[i] * yb[j];
                    }
                }
                out.blocks.insert((a, b), m);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (k, m) in &other.blocks {
            match out.blocks.get_mut(k) {
                Some(acc) => acc.zip_mut_with(m, |x, y| *x = *x + *y),
                None => {
                    out.blocks.insert(*k, m.clone());
                }
            }
        }
        out.symmetric = self.symmetric && other.symmetric;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(T::zero() - T::one()))
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = self.clone();
        for m in out.blocks.values_mut() {
            m.mapv_inplace(|x| x * c);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(&self.shape, self.comp);
        for (&(a, b), m) in &self.blocks {
            out.blocks.insert((b, a), m.t().to_owned());
        }
        out.symmetric = self.symmetric;
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut keys: Vec<_> = self.blocks.keys().chain(other.blocks.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        let mut best = 0.0f64;
        for (a, b) in keys {
            let x = self.block(a, b);
            let y = other.block(a, b);
            for (u, v) in x.iter().zip(y.iter()) {
                best = best.max((*u - *v).mag2().sqrt());
            }
        }
        best
    }
}

/// Orthogonal projection of a 2x2 cell onto span{I, J}: coefficients (alpha, beta)
/// of `alpha I + beta J` with `J = [[0, -1], [1, 0]]`.
pub fn cell_projection(m11: f64, m12: f64, m21: f64, m22: f64) -> (f64, f64) {
    (0.5 * (m11 + m22), 0.5 * (m21 - m12))
}

impl BlockMatrix<f64> {
    /// Normal-form projection: diagonal blocks only, each cell projected onto span{I, J}.
    pub fn nf_project(&self) -> Self {
        let mut out = Self::zeros(&self.shape, 2);
        for (&(a, b), m) in &self.blocks {
            if a != b {
                continue;
            }
            let d = self.shape.sizes[a];
            let mut p = Array2::zeros((2 * d, 2 * d));
            for i in 0..d {
                for j in 0..d {
                    let (al, be) = cell_projection(
                        m[[2 * i, 2 * j]],
                        m[[2 * i, 2 * j + 1]],
                        m[[2 * i + 1, 2 * j]],
                        m[[2 * i + 1, 2 * j + 1]],
                    );
                    p[[2 * i, 2 * j]] = al;
                    p[[2 * i + 1, 2 * j + 1]] = al;
                    p[[2 * i, 2 * j + 1]] = -be;
                    p[[2 * i + 1, 2 * j]] = be;
                }
            }
            out.blocks.insert((a, a), p);
        }
        out.symmetric = self.symmetric;
        out
    }

    /// Real, symmetric, block diagonal, every cell in span{I, J}.
    pub fn is_normal_form(&self, tol: f64) -> bool {
        let scale = self.frobenius().max(1.0);
        for (&(a, b), m) in &self.blocks {
            let hs = self.hs(a, b);
            if a != b {
                if hs > tol * scale {
                    return false;
                }
                continue;
            }
            if (m - &m.t()).iter().any(|x| x.abs() > tol * scale) {
                return false;
            }
            let d = self.shape.sizes[a];
            for i in 0..d {
                for j in 0..d {
                    let (al, be) = cell_projection(
                        m[[2 * i, 2 * j]],
                        m[[2 * i, 2 * j + 1]],
                        m[[2 * i + 1, 2 * j]],
                        m[[2 * i + 1, 2 * j + 1]],
                    );
                    let r = [
                        m[[2 * i, 2 * j]] - al,
                        m[[2 * i, 2 * j + 1]] + be,
                        m[[2 * i + 1, 2 * j]] - be,
                        m[[2 * i + 1, 2 * j + 1]] - al,
                    ];
                    if r.iter().any(|x| x.abs() > tol * scale) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Symmetric part `(A + A^T) / 2`.
    pub fn symmetrize(&self) -> Self {
        let t = self.transpose();
        let mut s = self.add(&t).unwrap().scale(0.5);
        s.symmetric = true;
        s
    }

    /// Conjugation `U^T A U` with `U_a = [[1, 1], [-i, i]] / sqrt 2` per mode;
    /// the result acts on (xi, eta) pairs.
    pub fn to_complex(&self) -> BlockMatrix<C64> {
        let mut out = BlockMatrix::zeros(&self.shape, 2);
        for (&(a, b), m) in &self.blocks {
            let (da, db) = (self.shape.sizes[a], self.shape.sizes[b]);
            let mut z = Array2::zeros((2 * da, 2 * db));
            for i in 0..da {
                for j in 0..db {
                    let c = cell_to_complex(
                        m[[2 * i, 2 * j]],
                        m[[2 * i, 2 * j + 1]],
                        m[[2 * i + 1, 2 * j]],
                        m[[2 * i + 1, 2 * j + 1]],
                    );
                    z[[2 * i, 2 * j]] = c[0][0];
                    z[[2 * i, 2 * j + 1]] = c[0][1];
                    z[[2 * i + 1, 2 * j]] = c[1][0];
                    z[[2 * i + 1, 2 * j + 1]] = c[1][1];
                }
            }
            out.blocks.insert((a, b), z);
        }
        out.symmetric = self.symmetric;
        out
    }

    /// Scalar matrix Q with `q(zeta) = <xi, Q eta>`; Hermitian when `self` is
    /// symmetric. A cell `alpha I + beta J` maps to `alpha - i beta`.
    pub fn to_q(&self) -> BlockMatrix<C64> {
        let mut out = BlockMatrix::zeros(&self.shape, 1);
        for (&(a, b), m) in &self.blocks {
            let (da, db) = (self.shape.sizes[a], self.shape.sizes[b]);
            let mut q = Array2::zeros((da, db));
            for i in 0..da {
                for j in 0..db {
                    q[[i, j]] = cell_to_complex(
                        m[[2 * i, 2 * j]],
                        m[[2 * i, 2 * j + 1]],
                        m[[2 * i + 1, 2 * j]],
                        m[[2 * i + 1, 2 * j + 1]],
                    )[0][1];
                }
            }
            out.blocks.insert((a, b), q);
        }
        out
    }
}

/// `U^T M U` for one 2x2 cell.
pub fn cell_to_complex(m11: f64, m12: f64, m21: f64, m22: f64) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let h = C64::new(0.5, 0.0);
    let (m11, m12, m21, m22) = (
        C64::new(m11, 0.0),
        C64::new(m12, 0.0),
        C64::new(m21, 0.0),
        C64::new(m22, 0.0),
    );
    [
        [
            h * (m11 - i * m12 - i * m21 - m22),
            h * (m11 + i * m12 - i * m21 + m22),
        ],
        [
            h * (m11 - i * m12 + i * m21 + m22),
            h * (m11 + i * m12 + i * m21 - m22),
        ],
    ]
}

/// Inverse of `cell_to_complex`: `M = C^T Z C` with `C = U^{-1}`.
pub fn cell_from_complex(z: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let h = C64::new(0.5, 0.0);
    // C = [[1, i], [1, -i]] / sqrt 2
    let c = [[C64::new(1.0, 0.0), i], [C64::new(1.0, 0.0), -i]];
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for u in 0..2 {
                for v in 0..2 {
                    acc += c[u][r] * z[u][v] * c[v][s];
                }
            }
            out[r][s] = h * acc;
        }
    }
    out
}

impl BlockMatrix<C64> {
    /// Inverse of `to_complex`. Imaginary parts of the result are dropped
    /// after checking they vanish to `1e-12` relative.
    pub fn from_complex(&self) -> Result<BlockMatrix<f64>> {
        let mut out = BlockMatrix::zeros(&self.shape, 2);
        let scale = self.frobenius().max(1e-300);
        for (&(a, b), z) in &self.blocks {
            let (da, db) = (self.shape.sizes[a], self.shape.sizes[b]);
            let mut m = Array2::zeros((2 * da, 2 * db));
            for i in 0..da {
                for j in 0..db {
                    let c = cell_from_complex([
                        [z[[2 * i, 2 * j]], z[[2 * i, 2 * j + 1]]],
                        [z[[2 * i + 1, 2 * j]], z[[2 * i + 1, 2 * j + 1]]],
                    ]);
                    for r in 0..2 {
                        for s in 0..2 {
                            if c[r][s].im.abs() > 1e-12 * scale {
                                return Err(KamError::Domain("complex matrix is not real".into()));
                            }
                            m[[2 * i + r, 2 * j + s]] = c[r][s].re;
                        }
                    }
                }
            }
            out.blocks.insert((a, b), m);
        }
        out.symmetric = self.symmetric;
        Ok(out)
    }

    /// Real matrix with cells `Re Q I - Im Q J`, the inverse of `to_q`.
    pub fn from_q(&self) -> BlockMatrix<f64> {
        let mut out = BlockMatrix::zeros(&self.shape, 2);
        for (&(a, b), q) in &self.blocks {
            let (da, db) = (self.shape.sizes[a], self.shape.sizes[b]);
            let mut m = Array2::zeros((2 * da, 2 * db));
            for i in 0..da {
                for j in 0..db {
                    let z = q[[i, j]];
                    m[[2 * i, 2 * j]] = z.re;
                    m[[2 * i + 1, 2 * j + 1]] = z.re;
                    m[[2 * i, 2 * j + 1]] = z.im;
                    m[[2 * i + 1, 2 * j]] = -z.im;
                }
            }
            out.blocks.insert((a, b), m);
        }
        out.symmetric = true;
        out
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut acc = 0.0;
        for (&(a, b), m) in &self.blocks {
            let t = self.block(b, a);
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    acc += (m[[i, j]] - t[[j, i]].conj()).norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

/// Truncated constants of the eight product/action inequalities, computed
/// from the proof sums over the levels present.
///
/// 1. `|AB|_b, |BA|_b <= C |A|_{b+} |B|_b`
/// 2. `|AB|_{b+} <= C |A|_{b+} |B|_{b+}`
/// 3. `|A z|_b <= C |A|_{b+} ||z||_s`
/// 4. `|A z|_b <= C |A|_b |z|_{b+}`
/// 5. `|A z|_b <= C |A|_b ||z||_s` (s >= 1)
/// 6. `|A z|_{b+} <= C |A|_{b+} ||z||_s`
/// 7. `|A z|_{b+} <= C |A|_{b+} |z|_{b+}`
/// 8. `|x y^T|_b <= |x|_b |y|_b`
pub fn lemma_constants(weights: &[f64], beta: f64, s: f64) -> [f64; 8] {
    let gap = |a: f64, k: f64| 1.0 / (1.0 + (a - k).abs());
    let mut c = [0.0f64; 8];
    for &wa in weights {
        let s1: f64 = weights.iter().map(|&k| k.powf(-2.0 * beta) * gap(wa, k)).sum();
        c[0] = c[0].max(s1);
        let s3: f64 = weights.iter().map(|&k| k.powf(-beta) * gap(wa, k)).sum();
        c[2] = c[2].max(s3);
        let s6: f64 = weights.iter().map(|&k| k.powf(-s - beta) * gap(wa, k)).sum();
        c[5] = c[5].max(wa * s6);
        let s7: f64 = weights.iter().map(|&k| k.powf(-1.0 - 2.0 * beta) * gap(wa, k)).sum();
        c[6] = c[6].max(wa * s7);
        for &wb in weights {
            let s2: f64 = weights
                .iter()
                .map(|&k| k.powf(-2.0 * beta) * gap(wa, k) * gap(wb, k))
                .sum();
            c[1] = c[1].max((1.0 + (wa - wb).abs()) * s2);
        }
    }
    c[3] = weights.iter().map(|&k| k.powf(-1.0 - 2.0 * beta)).sum();
    c[4] = weights.iter().map(|&k| k.powf(-s - beta)).sum();
    c[7] = 1.0;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{Clustering, SpectralModel};
    use ndarray::array;

    fn shape(w: u32) -> Arc<BlockShape> {
        BlockShape::new(&Clustering::enumerate(&SpectralModel::qho(1), w).unwrap())
    }

    #[test]
    fn single_block_norm() {
        let sh = shape(1);
        let mut a = BlockMatrix::zeros(&sh, 2);
        a.set_block(0, 0, array![[3.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(a.norm_beta(0.7), 5.0);
        assert_eq!(a.norm_beta_plus(0.7), 5.0);
        assert_eq!(BlockMatrix::<f64>::zeros(&sh, 2).norm_beta(1.0), 0.0);
    }

    #[test]
    fn identity_block_weight() {
        let sh = shape(2);
        let mut a = BlockMatrix::zeros(&sh, 2);
        // level w = 2 has two modes; put I_2 on the first mode only
        let mut m = Array2::zeros((4, 4));
        m[[0, 0]] = 1.0;
        m[[1, 1]] = 1.0;
        a.set_block(1, 1, m).unwrap();
        assert!((a.norm_beta(0.5) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_plus_factor() {
        let sh = shape(3);
        let mut a = BlockMatrix::zeros(&sh, 2);
        let mut m = Array2::zeros((2, 6));
        m[[0, 0]] = 1.0;
        a.set_block(0, 2, m).unwrap();
        assert_eq!(a.norm_beta_plus(0.0), 3.0);
    }

    #[test]
    fn projection_example() {
        let sh = shape(1);
        let mut a = BlockMatrix::zeros(&sh, 2);
        a.set_block(0, 0, array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let p = a.nf_project();
        assert_eq!(p.block(0, 0), array![[2.5, -0.5], [0.5, 2.5]]);
        assert_eq!(p.nf_project(), p);
    }

    #[test]
    fn lambda_identity_to_q() {
        let sh = shape(1);
        let mut a = BlockMatrix::zeros(&sh, 2);
        a.set_block(0, 0, array![[2.5, 0.0], [0.0, 2.5]]).unwrap();
        let q = a.to_q();
        assert!((q.block(0, 0)[[0, 0]] - C64::new(2.5, 0.0)).norm() < 1e-15);
        let z = a.to_complex().block(0, 0);
        assert!(z[[0, 0]].norm() < 1e-15 && z[[1, 1]].norm() < 1e-15);
        assert!((z[[0, 1]] - C64::new(2.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn constants_are_finite() {
        let w: Vec<f64> = (1..=24).map(|x| x as f64).collect();
        let c = lemma_constants(&w, 0.25, 2.0);
        assert!(c.iter().all(|x| x.is_finite() && *x > 0.0));
        assert_eq!(c[7], 1.0);
    }
}
