//! Matrix-valued trigonometric polynomials on the n-torus.
//!
//! Every coefficient is a dense complex `rows x cols` array, so scalars,
//! r-vectors, mode vectors and Hessians share one type. Products are
//! computed either by direct convolution or pseudo-spectrally on a grid
//! large enough that every retained mode is alias free.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::lattice;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub coeffs: BTreeMap<Vec<i32>, Array2<C64>>,
}

/// Mass dropped by a truncating operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    /// Frobenius mass of coefficients computed and dropped.
    pub dropped: f64,
    /// Upper bound for coefficients beyond the grid that were never formed.
    pub bound: f64,
}

impl Tail {
    pub fn total(&self) -> f64 {
        self.dropped + self.bound
    }

    pub fn add(&mut self, o: Tail) {
        self.dropped += o.dropped;
        self.bound += o.bound;
    }

    pub fn scaled(self, c: f64) -> Tail {
        Tail {
            dropped: self.dropped * c,
            bound: self.bound * c,
        }
    }
}

fn frob(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Series {
    pub fn zeros(n: usize, rows: usize, cols: usize) -> Self {
        Series {
            n,
            rows,
            cols,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Array2<C64>) -> Self {
        let mut s = Series::zeros(n, c.nrows(), c.ncols());
        s.coeffs.insert(vec![0; n], c);
        s
    }

    pub fn scalar(n: usize, terms: &[(Vec<i32>, C64)]) -> Self {
        let mut s = Series::zeros(n, 1, 1);
        for (k, c) in terms {
            s.add_at(k, &Array2::from_elem((1, 1), *c));
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, k: &[i32]) -> Option<&Array2<C64>> {
        self.coeffs.get(k)
    }

    pub fn coeff(&self, k: &[i32]) -> Array2<C64> {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| Array2::zeros((self.rows, self.cols)))
    }

    pub fn add_at(&mut self, k: &[i32], c: &Array2<C64>) {
        match self.coeffs.get_mut(k) {
            Some(acc) => *acc += c,
            None => {
                self.coeffs.insert(k.to_vec(), c.clone());
            }
        }
    }

    pub fn axpy(&mut self, a: C64, other: &Series) {
        for (k, c) in &other.coeffs {
            let t = c.mapv(|z| z * a);
            self.add_at(k, &t);
        }
    }

    pub fn add(&self, other: &Series) -> Series {
        let mut s = self.clone();
        s.axpy(C64::new(1.0, 0.0), other);
        s
    }

    pub fn sub(&self, other: &Series) -> Series {
        let mut s = self.clone();
        s.axpy(C64::new(-1.0, 0.0), other);
        s
    }

    pub fn scale(&self, a: C64) -> Series {
        let mut s = self.clone();
        for c in s.coeffs.values_mut() {
            c.mapv_inplace(|z| z * a);
        }
        s
    }

    pub fn scale_re(&self, a: f64) -> Series {
        self.scale(C64::new(a, 0.0))
    }

    /// Coefficientwise map keeping the support.
    pub fn map(&self, rows: usize, cols: usize, f: impl Fn(&[i32], &Array2<C64>) -> Array2<C64>) -> Series {
        let mut s = Series::zeros(self.n, rows, cols);
        for (k, c) in &self.coeffs {
            s.coeffs.insert(k.clone(), f(k, c));
        }
        s
    }

    /// Derivative in angle `axis`: multiplication by `i k_axis`.
    pub fn deriv(&self, axis: usize) -> Series {
        let mut s = Series::zeros(self.n, self.rows, self.cols);
        for (k, c) in &self.coeffs {
            if k[axis] != 0 {
                let f = C64::new(0.0, k[axis] as f64);
                s.coeffs.insert(k.clone(), c.mapv(|z| z * f));
            }
        }
        s
    }

    /// Entry (r, c) as a scalar series.
    pub fn entry(&self, r: usize, c: usize) -> Series {
        let mut s = Series::zeros(self.n, 1, 1);
        for (k, m) in &self.coeffs {
            let z = m[[r, c]];
            if z != C64::new(0.0, 0.0) {
                s.coeffs.insert(k.clone(), Array2::from_elem((1, 1), z));
            }
        }
        s
    }

    pub fn transpose(&self) -> Series {
        self.map(self.cols, self.rows, |_, c| c.t().to_owned())
    }

    /// `M c(k)` for a fixed matrix M.
    pub fn left_mul(&self, m: &Array2<C64>) -> Series {
        self.map(m.nrows(), self.cols, |_, c| m.dot(c))
    }

    /// `c(k) M` for a fixed matrix M.
    pub fn right_mul(&self, m: &Array2<C64>) -> Series {
        self.map(self.rows, m.ncols(), |_, c| c.dot(m))
    }

    /// `k -> conj(c(-k))`; a series is real iff it equals its reflection.
    pub fn reflect(&self) -> Series {
        let mut s = Series::zeros(self.n, self.rows, self.cols);
        for (k, c) in &self.coeffs {
            s.coeffs.insert(lattice::neg(k), c.mapv(|z| z.conj()));
        }
        s
    }

    /// Real part `(f + reflect f) / 2`.
    pub fn realify(&self) -> Series {
        self.add(&self.reflect()).scale_re(0.5)
    }

    pub fn reality_defect(&self) -> f64 {
        let mut best = 0.0f64;
        let r = self.reflect();
        let mut keys: Vec<&Vec<i32>> = self.coeffs.keys().chain(r.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            let d = &self.coeff(k) - &r.coeff(k);
            best = best.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        best
    }

    pub fn eval(&self, theta: &[f64]) -> Array2<C64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (k, c) in &self.coeffs {
            let ph = lattice::dot(k, theta);
            let e = C64::new(ph.cos(), ph.sin());
            out.scaled_add(e, c);
        }
        out
    }

    /// Evaluation at a complex angle `theta + i y`.
    pub fn eval_complex(&self, theta: &[C64]) -> Array2<C64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (k, c) in &self.coeffs {
            let mut ph = C64::new(0.0, 0.0);
            for (ki, t) in k.iter().zip(theta) {
                ph += *t * *ki as f64;
            }
            let e = (C64::new(0.0, 1.0) * ph).exp();
            out.scaled_add(e, c);
        }
        out
    }

    /// Real part of the value, for real series.
    pub fn eval_re(&self, theta: &[f64]) -> Array2<f64> {
        self.eval(theta).mapv(|z| z.re)
    }

    /// Per-axis max |k_i| over the support.
    pub fn axis_degree(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for k in self.coeffs.keys() {
            for (i, v) in k.iter().enumerate() {
                d[i] = d[i].max(v.unsigned_abs());
            }
        }
        d
    }

    pub fn l1_degree(&self) -> u32 {
        self.coeffs.keys().map(|k| lattice::l1(k)).max().unwrap_or(0)
    }

    /// `sum_k nrm(c(k)) e^{sigma |k|_1}`.
    pub fn majorant(&self, sigma: f64, nrm: impl Fn(&Array2<C64>) -> f64) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, c)| nrm(c) * (sigma * lattice::l1(k) as f64).exp())
            .sum()
    }

    /// Majorant with the Frobenius norm of each coefficient.
    pub fn majorant_frob(&self, sigma: f64) -> f64 {
        self.majorant(sigma, frob)
    }

    /// Drops modes with `|k|_1 > kmax`.
    pub fn truncate(&self, kmax: u32) -> (Series, Tail) {
        let mut s = Series::zeros(self.n, self.rows, self.cols);
        let mut t = Tail::default();
        for (k, c) in &self.coeffs {
            if lattice::l1(k) <= kmax {
                s.coeffs.insert(k.clone(), c.clone());
            } else {
                t.dropped += frob(c);
            }
        }
        (s, t)
    }

    /// Part with `|k|_1 > kmax`.
    pub fn tail_part(&self, kmax: u32) -> Series {
        let mut s = Series::zeros(self.n, self.rows, self.cols);
        for (k, c) in &self.coeffs {
            if lattice::l1(k) > kmax {
                s.coeffs.insert(k.clone(), c.clone());
            }
        }
        s
    }

    /// Removes coefficients whose Frobenius norm is at most `tol`.
    pub fn prune(&mut self, tol: f64) -> Tail {
        let mut t = Tail::default();
        self.coeffs.retain(|_, c| {
            let f = frob(c);
            if f <= tol {
                t.dropped += f;
                false
            } else {
                true
            }
        });
        t
    }

    pub fn max_abs_diff(&self, other: &Series) -> f64 {
        let d = self.sub(other);
        d.coeffs
            .values()
            .map(|c| c.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .map(|c| c.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Sum of Frobenius norms over the support.
    pub fn mass(&self) -> f64 {
        self.coeffs.values().map(frob).sum()
    }
}

/// Direct convolution `sum_{k1 + k2 = k} op(a(k1), b(k2))` truncated at `kout`.
pub fn convolve(
    a: &Series,
    b: &Series,
    rows: usize,
    cols: usize,
    kout: u32,
    op: impl Fn(&Array2<C64>, &Array2<C64>) -> Array2<C64>,
) -> (Series, Tail) {
    let mut out = Series::zeros(a.n, rows, cols);
    let mut t = Tail::default();
    for (k1, x) in &a.coeffs {
        for (k2, y) in &b.coeffs {
            let k = lattice::add(k1, k2);
            if lattice::l1(&k) > kout {
                t.bound += frob(x) * frob(y);
                continue;
            }
            let p = op(x, y);
            out.add_at(&k, &p);
        }
    }
    (out, t)
}

/// Smallest 7-smooth integer at least `n`.
pub fn nice_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut x = m;
        for p in [2, 3, 5, 7] {
            while x % p == 0 {
                x /= p;
            }
        }
        if x == 1 {
            return m;
        }
        m += 1;
    }
}

/// Uniform tensor grid with `g` points per axis.
#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub g: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(n: usize, g: usize) -> Self {
        let mut planner = FftPlanner::new();
        Grid {
            n,
            g,
            fwd: planner.plan_fft_forward(g),
            inv: planner.plan_fft_inverse(g),
        }
    }

    /// Grid for a product of factors with per-axis degrees `da`, `db`:
    /// every mode with `|k|_1 <= kout` is alias free. When the product fits,
    /// the grid resolves all of it so that the spillover is measured.
    pub fn for_product(n: usize, da: &[u32], db: &[u32], kout: u32) -> (Self, bool) {
        let d = da.iter().zip(db).map(|(x, y)| x + y).max().unwrap_or(0) as usize;
        let full = 2 * d + 1;
        let partial = d + kout as usize + 1;
        let exact = full <= partial;
        let g = nice_size(if exact { full } else { partial });
        (Grid::new(n, g), exact)
    }

    pub fn points(&self) -> usize {
        self.g.pow(self.n as u32)
    }

    pub fn angle(&self, p: usize) -> Vec<f64> {
        let mut th = vec![0.0; self.n];
        let mut r = p;
        for i in (0..self.n).rev() {
            th[i] = 2.0 * std::f64::consts::PI * (r % self.g) as f64 / self.g as f64;
            r /= self.g;
        }
        th
    }

    fn flat(&self, k: &[i32]) -> usize {
        let g = self.g as i32;
        let mut idx = 0usize;
        for &v in k {
            idx = idx * self.g + v.rem_euclid(g) as usize;
        }
        idx
    }

    fn transform(&self, buf: &mut [C64], inverse: bool, scratch: &mut Vec<C64>) {
        let g = self.g;
        let fft = if inverse { &self.inv } else { &self.fwd };
        let total = buf.len();
        // last axis is contiguous
        fft.process(buf);
        let mut stride = g;
        for _ in 1..self.n {
            let outer = total / (stride * g);
            scratch.resize(g, C64::new(0.0, 0.0));
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * stride * g + inner;
                    for t in 0..g {
                        scratch[t] = buf[base + t * stride];
                    }
                    fft.process(scratch);
                    for t in 0..g {
                        buf[base + t * stride] = scratch[t];
                    }
                }
            }
            stride *= g;
        }
    }
}

/// Real values of a series on a grid, one row per point.
pub struct GridField {
    pub rows: usize,
    pub cols: usize,
    pub data: Array2<f64>,
}

impl GridField {
    pub fn zeros(grid: &Grid, rows: usize, cols: usize) -> Self {
        GridField {
            rows,
            cols,
            data: Array2::zeros((grid.points(), rows * cols)),
        }
    }

    pub fn point(&self, p: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows, self.cols), self.data.row(p).to_slice().unwrap()).unwrap()
    }

    pub fn point_mut(&mut self, p: usize) -> ArrayViewMut2<'_, f64> {
        let (r, c) = (self.rows, self.cols);
        ArrayViewMut2::from_shape((r, c), self.data.row_mut(p).into_slice().unwrap()).unwrap()
    }

    /// Samples a real series (imaginary parts of the values are discarded).
    pub fn sample(grid: &Grid, s: &Series) -> Self {
        Self::sample_with(grid, s, None)
    }

    /// Samples the derivative in `axis` of a real series.
    pub fn sample_deriv(grid: &Grid, s: &Series, axis: usize) -> Self {
        Self::sample_with(grid, s, Some(axis))
    }

    fn sample_with(grid: &Grid, s: &Series, axis: Option<usize>) -> Self {
        let e = s.rows * s.cols;
        let mut f = GridField::zeros(grid, s.rows, s.cols);
        let np = grid.points();
        let mut entries: Vec<(usize, C64, &Array2<C64>)> = Vec::with_capacity(s.coeffs.len());
        for (k, c) in &s.coeffs {
            let fac = match axis {
                Some(ax) => C64::new(0.0, k[ax] as f64),
                None => C64::new(1.0, 0.0),
            };
            if fac != C64::new(0.0, 0.0) {
                entries.push((grid.flat(k), fac, c));
            }
        }
        if entries.is_empty() {
            return f;
        }
        let mut buf = vec![C64::new(0.0, 0.0); np];
        let mut scratch = Vec::new();
        let data = f.data.as_slice_mut().unwrap();
        for idx in 0..e {
            let (r, c) = (idx / s.cols, idx % s.cols);
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            let mut any = false;
            for &(fl, fac, m) in &entries {
                let z = m[[r, c]];
                if z != C64::new(0.0, 0.0) {
                    buf[fl] += fac * z;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            grid.transform(&mut buf, true, &mut scratch);
            for p in 0..np {
                data[p * e + idx] = buf[p].re;
            }
        }
        f
    }

    /// Fourier coefficients with `|k|_1 <= kout`. The returned tail holds the
    /// mass of resolved modes beyond `kout`, meaningful when the grid resolves
    /// the whole product.
    pub fn to_series(&self, grid: &Grid, kout: u32) -> (Series, Tail) {
        let e = self.rows * self.cols;
        let np = grid.points();
        let half = (grid.g as i32 - 1) / 2;
        let kept = lattice::l1_ball(grid.n, kout.min((half as u32) * grid.n as u32));
        let kept: Vec<Vec<i32>> = kept
            .into_iter()
            .filter(|k| k.iter().all(|v| v.abs() <= half))
            .collect();
        let flats: Vec<usize> = kept.iter().map(|k| grid.flat(k)).collect();
        let mut is_kept = vec![false; np];
        for &f in &flats {
            is_kept[f] = true;
        }
        let mut coeffs: Vec<Array2<C64>> = kept.iter().map(|_| Array2::zeros((self.rows, self.cols))).collect();
        let mut dropped2 = vec![0.0f64; np];
        let mut buf = vec![C64::new(0.0, 0.0); np];
        let mut scratch = Vec::new();
        let scale = 1.0 / np as f64;
        let data = self.data.as_slice().unwrap();
        for idx in 0..e {
            let mut any = false;
            for p in 0..np {
                let v = data[p * e + idx];
                buf[p] = C64::new(v, 0.0);
                any |= v != 0.0;
            }
            if !any {
                continue;
            }
            grid.transform(&mut buf, false, &mut scratch);
            let (r, c) = (idx / self.cols, idx % self.cols);
            for (ci, &f) in flats.iter().enumerate() {
                coeffs[ci][[r, c]] = buf[f] * scale;
            }
            for p in 0..np {
                if !is_kept[p] {
                    dropped2[p] += (buf[p] * scale).norm_sqr();
                }
            }
        }
        let mut s = Series::zeros(grid.n, self.rows, self.cols);
        for (k, c) in kept.into_iter().zip(coeffs) {
            if c.iter().any(|z| *z != C64::new(0.0, 0.0)) {
                s.coeffs.insert(k, c);
            }
        }
        let tail = Tail {
            dropped: dropped2.iter().map(|x| x.sqrt()).sum(),
            bound: 0.0,
        };
        (s, tail)
    }
}

/// Frobenius-mass bound for product modes beyond `kout` that a
/// retained-exact grid cannot see.
pub fn spill_bound(a: &Series, b: &Series, kout: u32) -> f64 {
    let na: Vec<(&Vec<i32>, f64)> = a.coeffs.iter().map(|(k, c)| (k, frob(c))).collect();
    let nb: Vec<(&Vec<i32>, f64)> = b.coeffs.iter().map(|(k, c)| (k, frob(c))).collect();
    let mut t = 0.0;
    for (k1, x) in &na {
        for (k2, y) in &nb {
            let l: u32 = k1.iter().zip(k2.iter()).map(|(u, v)| (u + v).unsigned_abs()).sum();
            if l > kout {
                t += x * y;
            }
        }
    }
    t
}

/// Pointwise product of two real series on a grid: `op(a(theta), b(theta), out)`
/// at every grid point, expanded back to modes with `|k|_1 <= kout`.
pub fn grid_product(
    a: &Series,
    b: &Series,
    rows: usize,
    cols: usize,
    kout: u32,
    op: impl Fn(ArrayView2<f64>, ArrayView2<f64>, ArrayViewMut2<f64>),
) -> (Series, Tail) {
    let n = a.n;
    if a.is_empty() || b.is_empty() {
        return (Series::zeros(n, rows, cols), Tail::default());
    }
    let (grid, exact) = Grid::for_product(n, &a.axis_degree(), &b.axis_degree(), kout);
    let fa = GridField::sample(&grid, a);
    let fb = GridField::sample(&grid, b);
    let mut out = GridField::zeros(&grid, rows, cols);
    for p in 0..grid.points() {
        op(fa.point(p), fb.point(p), out.point_mut(p));
    }
    let (s, mut t) = out.to_series(&grid, kout);
    if !exact {
        t = Tail {
            dropped: 0.0,
            bound: spill_bound(a, b, kout),
        };
    }
    (s, t)
}
