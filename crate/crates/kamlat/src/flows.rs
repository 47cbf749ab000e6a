//! Time-t flows of jet generators and pullbacks along them.
//!
//! For a generator S the flow solves `d/dt g(x(t)) = {g, S}(x(t))`, i.e.
//!
//! ```text
//! theta' = -S_r(theta)
//! zeta'  = -J (S_z + S_zz zeta)
//! r'     = d_theta [S_theta + <S_r, r> + <S_z, zeta> + 1/2 <S_zz zeta, zeta>]
//! ```
//!
//! so the map at time one has the form `theta = K(theta0)`,
//! `zeta = T(theta0) + U(theta0) zeta0` and
//! `r = Smat(theta0) r0 + l0 + l1 zeta0 + 1/2 <l2 zeta0, zeta0>`.
//! The structure functions are integrated by Gauss collocation whose stage
//! equations are solved by Picard iteration.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::fourier::{Series, Tail};
use crate::jets::{jet_norm, poisson_jet, BracketOpts, Jet, NormParams};
use crate::poly::PolyHamiltonian;
use crate::quad::gauss_legendre_on;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOpts {
    /// Collocation nodes per step.
    pub nodes: usize,
    /// Steps on [0, t].
    pub steps: usize,
    /// Picard stopping tolerance, relative to the state size.
    pub tol: f64,
    /// Picard iteration cap per step.
    pub max_iter: usize,
}

impl Default for FlowOpts {
    fn default() -> Self {
        FlowOpts { nodes: 8, steps: 2, tol: 1e-15, max_iter: 200 }
    }
}

/// Gauss collocation tableau on [0, 1].
#[derive(Debug, Clone)]
struct Tableau {
    a: Array2<f64>,
    b: Vec<f64>,
}

impl Tableau {
    fn new(m: usize) -> Self {
        let (c, b) = gauss_legendre_on(m, 0.0, 1.0);
        let lag = |j: usize, x: f64| -> f64 {
            let mut p = 1.0;
            for (l, cl) in c.iter().enumerate() {
                if l != j {
                    p *= (x - cl) / (c[j] - cl);
                }
            }
            p
        };
        let mut a = Array2::zeros((m, m));
        for i in 0..m {
            let (x, w) = gauss_legendre_on(m, 0.0, c[i]);
            for j in 0..m {
                a[[i, j]] = x.iter().zip(&w).map(|(x, w)| w * lag(j, *x)).sum();
            }
        }
        Tableau { a, b }
    }
}

/// Integrates the autonomous system `x' = f(x)` over [0, t]. Returns the
/// end state and the largest Picard iteration count.
pub fn integrate(x0: &[f64], t: f64, opts: &FlowOpts, f: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let tab = Tableau::new(opts.nodes);
    let m = opts.nodes;
    let dim = x0.len();
    let h = t / opts.steps as f64;
    let mut x = x0.to_vec();
    let mut worst = 0;
    for _ in 0..opts.steps {
        let mut fs: Vec<Vec<f64>> = vec![f(&x); m];
        let mut stages: Vec<Vec<f64>> = vec![x.clone(); m];
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut iter = 0;
        let mut prev = f64::INFINITY;
        loop {
            iter += 1;
            let mut delta = 0.0f64;
            for i in 0..m {
                let mut y = x.clone();
                for j in 0..m {
                    let aij = h * tab.a[[i, j]];
                    for (yk, fk) in y.iter_mut().zip(&fs[j]) {
                        *yk += aij * fk;
                    }
                }
                for k in 0..dim {
                    delta = delta.max((y[k] - stages[i][k]).abs());
                }
                stages[i] = y;
            }
            for i in 0..m {
                fs[i] = f(&stages[i]);
            }
            if delta <= opts.tol * scale || (delta < 1e3 * opts.tol * scale && delta >= prev) {
                break;
            }
            if iter >= opts.max_iter || !delta.is_finite() {
                return Err(KamError::SeriesTail(iter));
            }
            prev = delta;
        }
        worst = worst.max(iter);
        for j in 0..m {
            let bj = h * tab.b[j];
            for (xk, fk) in x.iter_mut().zip(&fs[j]) {
                *xk += bj * fk;
            }
        }
    }
    Ok((x, worst))
}

/// Structure functions of the time-one map at one base angle.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAt {
    pub theta0: Vec<f64>,
    pub k: Vec<f64>,
    pub u: Array2<f64>,
    pub t: Array1<f64>,
    pub smat: Array2<f64>,
    pub l0: Array1<f64>,
    pub l1: Array2<f64>,
    pub l2: Vec<Array2<f64>>,
    pub iterations: usize,
}

impl FlowAt {
    /// Image of `(r0, theta0, zeta0)` as `(r, theta, zeta)`.
    pub fn apply(&self, r0: &[f64], zeta0: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let z0 = ArrayView1::from(zeta0);
        let zeta = &self.t + &self.u.dot(&z0);
        let r0 = ArrayView1::from(r0);
        let mut r = self.smat.dot(&r0) + &self.l0 + self.l1.dot(&z0);
        for (i, l2) in self.l2.iter().enumerate() {
            r[i] += 0.5 * z0.dot(&l2.dot(&z0));
        }
        (r.to_vec(), self.k.clone(), zeta.to_vec())
    }

    /// Singular value range of U.
    pub fn u_singular_range(&self) -> (f64, f64) {
        let g = self.u.t().dot(&self.u);
        let ev = crate::eig::symmetric_eig(&g).map(|e| e.0).unwrap_or_default();
        let lo = ev.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt();
        let hi = ev.iter().copied().fold(0.0, f64::max).sqrt();
        (lo, hi)
    }
}

/// Generator derivatives precomputed for repeated evaluation.
#[derive(Debug, Clone)]
pub struct FlowMap {
    pub s: Jet,
    pub time: f64,
    pub opts: FlowOpts,
    /// Added to U after integration; used to test the symplecticity check.
    pub u_perturbation: Option<Array2<f64>>,
    d_theta: Vec<Series>,
    d_r: Vec<Series>,
    d_z: Vec<Series>,
    d_zz: Vec<Series>,
}

struct Local {
    sr: Vec<f64>,
    bm: Array2<f64>,
    sz: Array1<f64>,
    szz: Array2<f64>,
    dth: Vec<f64>,
    dsz: Vec<Array1<f64>>,
    dszz: Vec<Array2<f64>>,
}

fn col(m: Array2<f64>) -> Array1<f64> {
    m.column(0).to_owned()
}

impl FlowMap {
    pub fn new(s: &Jet, time: f64, opts: FlowOpts) -> Self {
        let n = s.n;
        FlowMap {
            s: s.clone(),
            time,
            opts,
            u_perturbation: None,
            d_theta: (0..n).map(|i| s.theta.deriv(i)).collect(),
            d_r: (0..n).map(|i| s.r.deriv(i)).collect(),
            d_z: (0..n).map(|i| s.z.deriv(i)).collect(),
            d_zz: (0..n).map(|i| s.zz.deriv(i)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.s.n
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    fn local(&self, theta: &[f64], quad: bool) -> Local {
        let n = self.n();
        let d = self.dim();
        let sr = col(self.s.r.eval_re(theta)).to_vec();
        let mut bm = Array2::zeros((n, n));
        for i in 0..n {
            let v = self.d_r[i].eval_re(theta);
            for l in 0..n {
                bm[[i, l]] = v[[l, 0]];
            }
        }
        let zz = |s: &Series| if s.is_empty() { Array2::zeros((d, d)) } else { s.eval_re(theta) };
        Local {
            sr,
            bm,
            sz: col(self.s.z.eval_re(theta)),
            szz: zz(&self.s.zz),
            dth: (0..n).map(|i| self.d_theta[i].eval_re(theta)[[0, 0]]).collect(),
            dsz: (0..n).map(|i| col(self.d_z[i].eval_re(theta))).collect(),
            dszz: if quad { (0..n).map(|i| zz(&self.d_zz[i])).collect() } else { Vec::new() },
        }
    }

    /// Structure functions at base angle `theta0`.
    pub fn at(&self, theta0: &[f64]) -> Result<FlowAt> {
        let n = self.n();
        let d = self.dim();
        // layout: theta | U | T | Smat | l0 | l1 | l2
        let o_u = n;
        let o_t = o_u + d * d;
        let o_s = o_t + d;
        let o_l0 = o_s + n * n;
        let o_l1 = o_l0 + n;
        let o_l2 = o_l1 + n * d;
        let len = o_l2 + n * d * d;
        let mut x0 = vec![0.0; len];
        x0[..n].copy_from_slice(theta0);
        for a in 0..d {
            x0[o_u + a * d + a] = 1.0;
        }
        for i in 0..n {
            x0[o_s + i * n + i] = 1.0;
        }
        let rhs = |x: &[f64]| -> Vec<f64> {
            let th = &x[..n];
            let loc = self.local(th, true);
            let u = ArrayView1::from(&x[o_u..o_t]).into_shape_with_order((d, d)).unwrap();
            let t = ArrayView1::from(&x[o_t..o_s]);
            let sm = ArrayView1::from(&x[o_s..o_l0]).into_shape_with_order((n, n)).unwrap();
            let l0 = ArrayView1::from(&x[o_l0..o_l1]);
            let l1 = ArrayView1::from(&x[o_l1..o_l2]).into_shape_with_order((n, d)).unwrap();
            let l2 = ArrayView1::from(&x[o_l2..]).into_shape_with_order((n, d * d)).unwrap();
            let mut out = vec![0.0; len];
            for i in 0..n {
                out[i] = -loc.sr[i];
            }
            let szu = loc.szz.dot(&u);
            let du = jmul_rows(&szu).mapv(|v| -v);
            out[o_u..o_t].copy_from_slice(du.as_slice().unwrap());
            let g = &loc.sz + &loc.szz.dot(&t);
            let dt = jmul_vec(&g).mapv(|v| -v);
            out[o_t..o_s].copy_from_slice(dt.as_slice().unwrap());
            let dsm = loc.bm.dot(&sm);
            out[o_s..o_l0].copy_from_slice(dsm.as_standard_layout().as_slice().unwrap());
            let bl0 = loc.bm.dot(&l0);
            let bl1 = loc.bm.dot(&l1);
            let bl2 = loc.bm.dot(&l2);
            for i in 0..n {
                let ht = loc.dszz[i].dot(&t);
                out[o_l0 + i] = loc.dth[i] + bl0[i] + loc.dsz[i].dot(&t) + 0.5 * t.dot(&ht);
                let v = u.t().dot(&(&loc.dsz[i] + &ht));
                for a in 0..d {
                    out[o_l1 + i * d + a] = bl1[[i, a]] + v[a];
                }
                let q = u.t().dot(&loc.dszz[i].dot(&u));
                for (e, qv) in q.iter().enumerate() {
                    out[o_l2 + i * d * d + e] = bl2[[i, e]] + qv;
                }
            }
            out
        };
        let (x, iterations) = integrate(&x0, self.time, &self.opts, &rhs)?;
        let mut u = Array2::from_shape_vec((d, d), x[o_u..o_t].to_vec()).unwrap();
        if let Some(p) = &self.u_perturbation {
            u = u + p;
        }
        Ok(FlowAt {
            theta0: theta0.to_vec(),
            k: x[..n].to_vec(),
            u,
            t: Array1::from(x[o_t..o_s].to_vec()),
            smat: Array2::from_shape_vec((n, n), x[o_s..o_l0].to_vec()).unwrap(),
            l0: Array1::from(x[o_l0..o_l1].to_vec()),
            l1: Array2::from_shape_vec((n, d), x[o_l1..o_l2].to_vec()).unwrap(),
            l2: (0..n)
                .map(|i| Array2::from_shape_vec((d, d), x[o_l2 + i * d * d..o_l2 + (i + 1) * d * d].to_vec()).unwrap())
                .collect(),
            iterations,
        })
    }

    /// Image of one point, through the structure functions.
    pub fn transport(&self, r: &[f64], theta: &[f64], zeta: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        Ok(self.at(theta)?.apply(r, zeta))
    }

    /// Transport with the check that the image stays in
    /// `|r_i| <= mu'^2, ||zeta||_s <= mu'`.
    pub fn transport_in(&self, r: &[f64], theta: &[f64], zeta: &[f64], s: f64, mu_prime: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let out = self.transport(r, theta, zeta)?;
        let rmax = out.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rmax > mu_prime * mu_prime {
            return Err(KamError::DomainEscape(format!("|r| = {rmax:.3e} > {:.3e}", mu_prime * mu_prime)));
        }
        let zn = crate::blockmat::norm_s(&self.s.shape, &out.2, s);
        if zn > mu_prime {
            return Err(KamError::DomainEscape(format!("||zeta||_s = {zn:.3e} > {mu_prime:.3e}")));
        }
        Ok(out)
    }

    /// Image of one point by integrating its trajectory directly. Cheaper
    /// than [`FlowMap::transport`] when only a few points are needed.
    pub fn transport_point(&self, r: &[f64], theta: &[f64], zeta: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let d = self.dim();
        let mut x0 = Vec::with_capacity(2 * n + d);
        x0.extend_from_slice(theta);
        x0.extend_from_slice(zeta);
        x0.extend_from_slice(r);
        let rhs = |x: &[f64]| -> Vec<f64> {
            let th = &x[..n];
            let z = ArrayView1::from(&x[n..n + d]);
            let r = ArrayView1::from(&x[n + d..]);
            let loc = self.local(th, true);
            let mut out = vec![0.0; 2 * n + d];
            for i in 0..n {
                out[i] = -loc.sr[i];
            }
            let g = &loc.sz + &loc.szz.dot(&z);
            let dz = jmul_vec(&g);
            for a in 0..d {
                out[n + a] = -dz[a];
            }
            let br = loc.bm.dot(&r);
            for i in 0..n {
                out[n + d + i] = loc.dth[i] + br[i] + loc.dsz[i].dot(&z) + 0.5 * z.dot(&loc.dszz[i].dot(&z));
            }
            out
        };
        let (x, _) = integrate(&x0, self.time, &self.opts, &rhs)?;
        Ok((x[n + d..].to_vec(), x[..n].to_vec(), x[n..n + d].to_vec()))
    }

    /// `|| DPhi^T Omega DPhi - Omega ||_HS` at `r = 0, zeta = 0`, with
    /// `Omega` the symplectic form of the bracket in `(r, theta, zeta)`
    /// order. Angle derivatives use five-point differences.
    pub fn symplecticity_defect(&self, theta0: &[f64]) -> Result<f64> {
        let n = self.n();
        let d = self.dim();
        let base = self.at(theta0)?;
        let h = 1e-3;
        let mut dk = Array2::<f64>::zeros((n, n));
        let mut dt = Array2::<f64>::zeros((d, n));
        let mut dl0 = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut vals = Vec::new();
            for s in [-2.0, -1.0, 1.0, 2.0] {
                let mut th = theta0.to_vec();
                th[j] += s * h;
                vals.push(self.at(&th)?);
            }
            let fd = |f: &dyn Fn(&FlowAt) -> f64| {
                (f(&vals[0]) - 8.0 * f(&vals[1]) + 8.0 * f(&vals[2]) - f(&vals[3])) / (12.0 * h)
            };
            for i in 0..n {
                dk[[i, j]] = fd(&|a: &FlowAt| a.k[i] - a.theta0[i]) + if i == j { 1.0 } else { 0.0 };
                dl0[[i, j]] = fd(&|a: &FlowAt| a.l0[i]);
            }
            for a in 0..d {
                dt[[a, j]] = fd(&|x: &FlowAt| x.t[a]);
            }
        }
        let dim = 2 * n + d;
        let mut jac = Array2::<f64>::zeros((dim, dim));
        // rows and columns ordered (r, theta, zeta)
        for i in 0..n {
            for j in 0..n {
                jac[[i, j]] = base.smat[[i, j]];
                jac[[i, n + j]] = dl0[[i, j]];
                jac[[n + i, n + j]] = dk[[i, j]];
            }
            for a in 0..d {
                jac[[i, 2 * n + a]] = base.l1[[i, a]];
            }
        }
        for a in 0..d {
            for j in 0..n {
                jac[[2 * n + a, n + j]] = dt[[a, j]];
            }
            for b in 0..d {
                jac[[2 * n + a, 2 * n + b]] = base.u[[a, b]];
            }
        }
        let om = poisson_tensor(n, d).mapv(|v| -v);
        let lhs = jac.t().dot(&om).dot(&jac);
        Ok((&lhs - &om).iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// `J v` with `J = [[0, -1], [1, 0]]` on each mode pair.
fn jmul_vec(v: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.len());
    for m in 0..v.len() / 2 {
        out[2 * m] = -v[2 * m + 1];
        out[2 * m + 1] = v[2 * m];
    }
    out
}

fn jmul_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for m in 0..a.nrows() / 2 {
        for c in 0..a.ncols() {
            out[[2 * m, c]] = -a[[2 * m + 1, c]];
            out[[2 * m + 1, c]] = a[[2 * m, c]];
        }
    }
    out
}

/// Poisson tensor of the bracket in `(r, theta, zeta)` order; its inverse
/// is its negative.
pub fn poisson_tensor(n: usize, d: usize) -> Array2<f64> {
    let dim = 2 * n + d;
    let mut p = Array2::zeros((dim, dim));
    for i in 0..n {
        p[[i, n + i]] = 1.0;
        p[[n + i, i]] = -1.0;
    }
    for m in 0..d / 2 {
        let o = 2 * n + 2 * m;
        p[[o, o + 1]] = 1.0;
        p[[o + 1, o]] = -1.0;
    }
    p
}

/// Checks `[S]^{s,beta+}_{sigma,mu} <= nu^2 eta / 2` and builds the time-t flow.
pub fn build_flow(s: &Jet, t: f64, p: &NormParams, eta: f64, nu: f64, opts: FlowOpts) -> Result<FlowMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(KamError::Domain(format!("flow time {t} outside [0, 1]")));
    }
    if eta.is_nan() || nu.is_nan() || eta <= 0.0 || nu <= 0.0 {
        return Err(KamError::Domain(format!("flow margins must be positive, got eta={eta}, nu={nu}")));
    }
    let v = jet_norm(s, p, true);
    let bound = 0.5 * nu * nu * eta;
    if v > bound {
        return Err(KamError::Smallness { what: "generator".into(), value: v, bound });
    }
    Ok(FlowMap::new(s, t, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieOpts {
    pub kmax: u32,
    pub max_terms: usize,
    /// Stop once a term falls below `tol` times the first.
    pub tol: f64,
}

impl LieOpts {
    pub fn new(kmax: u32) -> Self {
        LieOpts { kmax, max_terms: 60, tol: 1e-17 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LieReport {
    pub terms: usize,
    /// Size of the last term kept, relative to the first.
    pub last_ratio: f64,
    pub tail: Tail,
}

/// `X_0 = x`, `X_{m+1} = {X_m, S}`; stops when the terms become negligible.
pub fn lie_terms(x: &Jet, s: &Jet, opts: &LieOpts) -> Result<(Vec<Jet>, LieReport)> {
    let bo = BracketOpts::new(opts.kmax);
    let first = x.max_abs();
    let mut out = vec![x.clone()];
    let mut rep = LieReport { terms: 1, last_ratio: 1.0, tail: Tail::default() };
    if first == 0.0 {
        rep.last_ratio = 0.0;
        return Ok((out, rep));
    }
    let mut fact = 1.0;
    loop {
        let m = out.len();
        if m > opts.max_terms {
            return Err(KamError::SeriesTail(opts.max_terms));
        }
        let (next, t) = poisson_jet(out.last().unwrap(), s, &bo)?;
        rep.tail.add(t);
        fact *= m as f64;
        let ratio = next.max_abs() / fact / first;
        rep.last_ratio = ratio;
        out.push(next);
        rep.terms = out.len();
        if ratio <= opts.tol {
            break;
        }
    }
    Ok((out, rep))
}

/// `sum_m w(m) X_m` for each weight `w`, without storing the terms.
pub fn lie_sums(x: &Jet, s: &Jet, opts: &LieOpts, weights: &[&dyn Fn(usize) -> f64]) -> Result<(Vec<Jet>, LieReport)> {
    let bo = BracketOpts::new(opts.kmax);
    let first = x.max_abs();
    let mut sums: Vec<Jet> = weights.iter().map(|w| x.scale(w(0))).collect();
    let mut rep = LieReport { terms: 1, last_ratio: 1.0, tail: Tail::default() };
    if first == 0.0 || s.is_zero() {
        rep.last_ratio = 0.0;
        return Ok((sums, rep));
    }
    let mut cur = x.clone();
    let mut fact = 1.0;
    let mut m = 0;
    loop {
        m += 1;
        if m > opts.max_terms {
            return Err(KamError::SeriesTail(opts.max_terms));
        }
        let (next, t) = poisson_jet(&cur, s, &bo)?;
        rep.tail.add(t);
        fact *= m as f64;
        for (acc, w) in sums.iter_mut().zip(weights) {
            acc.axpy(w(m), &next);
        }
        rep.last_ratio = next.max_abs() / fact / first;
        rep.terms = m + 1;
        cur = next;
        if rep.last_ratio <= opts.tol {
            break;
        }
    }
    Ok((sums, rep))
}

/// `sum_m c_m X_m` for Lie terms `X_m`.
pub fn lie_sum(terms: &[Jet], c: impl Fn(usize) -> f64) -> Jet {
    let mut out = Jet::zeros(terms[0].n, &terms[0].shape);
    for (m, t) in terms.iter().enumerate() {
        let cm = c(m);
        if cm != 0.0 {
            out.axpy(cm, t);
        }
    }
    out
}

pub fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub jet: LieReport,
    pub lowered: LieReport,
}

/// `h o Phi^t` for the flow of S. The jet part is exact up to the Fourier
/// cap; the higher-order terms are kept and contribute their first-order
/// lowering `jet {h - h^T, S}` and its iterates.
pub fn pullback(h: &PolyHamiltonian, s: &Jet, t: f64, opts: &LieOpts) -> Result<(PolyHamiltonian, PullbackReport)> {
    let st = s.scale(t);
    let exp_w = |m: usize| 1.0 / factorial(m);
    let (mut sums, rj) = lie_sums(&h.jet, &st, opts, &[&exp_w])?;
    let mut jet = sums.pop().unwrap();
    let mut rep = PullbackReport { jet: rj, lowered: LieReport::default() };
    if !h.is_jet() {
        let (low, tl) = h.lower_bracket(&st, opts.kmax)?;
        let low_w = |m: usize| 1.0 / factorial(m + 1);
        let (ls, mut rl) = lie_sums(&low, &st, opts, &[&low_w])?;
        rl.tail.add(tl);
        jet.axpy(1.0, &ls[0]);
        rep.lowered = rl;
    }
    Ok((h.with_jet(jet), rep))
}

/// Pullback with the domain check `[S]^{s,beta+} <= (mu - mu')^2 (sigma - sigma') / 2`.
pub fn pullback_checked(
    h: &PolyHamiltonian,
    s: &Jet,
    p: &NormParams,
    sigma_prime: f64,
    mu_prime: f64,
    opts: &LieOpts,
) -> Result<(PolyHamiltonian, PullbackReport)> {
    build_flow(s, 1.0, p, p.sigma - sigma_prime, p.mu - mu_prime, FlowOpts::default())?;
    pullback(h, s, 1.0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collocation_exact_for_linear() {
        // x' = A x with A a rotation: exact solution is a rotation by t
        let f = |x: &[f64]| vec![-x[1], x[0]];
        let (x, _) = integrate(&[1.0, 0.0], 0.7, &FlowOpts::default(), &f).unwrap();
        assert!((x[0] - 0.7f64.cos()).abs() < 1e-14);
        assert!((x[1] - 0.7f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn collocation_nonlinear() {
        let f = |x: &[f64]| vec![x[0] * x[0]];
        let (x, _) = integrate(&[0.5], 1.0, &FlowOpts::default(), &f).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn tensor_is_antisymmetric() {
        let p = poisson_tensor(2, 4);
        assert_eq!(p.t().mapv(|v| -v), p);
    }
}
