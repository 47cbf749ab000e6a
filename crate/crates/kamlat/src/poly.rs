//! Degree-capped polynomial Hamiltonians.
//!
//! A `PolyHamiltonian` is a jet plus higher-order terms. The higher-order
//! terms are stored in node form: a family of quadrature nodes `x`, each
//! carrying a few linear forms `l_{x,c}(zeta) = <v_{x,c}, zeta>`, and terms
//! `r^alpha sum_x c_x(theta) prod_c l_{x,c}^{beta_c}`. Integrals of local
//! nonlinearities land in this form without ever building dense tensors.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::blockmat::{self, BlockShape};
use crate::error::{KamError, Result};
use crate::fourier::{grid_product, Series, Tail};
use crate::jets::{self, j_vec, BracketOpts, Jet, NormParams};
use crate::lattice;
use crate::C64;

pub const D_MAX: u32 = 4;
pub const K_MAX: u32 = 12;

/// Monomials `r^alpha l^beta` of weighted degree `2|alpha| + |beta| <= dmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoTable {
    pub n: usize,
    pub f: usize,
    pub dmax: u32,
    pub monos: Vec<(Vec<u8>, Vec<u8>)>,
    index: HashMap<(Vec<u8>, Vec<u8>), usize>,
    mul: Vec<(u32, u32, u32)>,
}

fn exps(len: usize, total: u32) -> Vec<Vec<u8>> {
    if len == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in exps(len - 1, total - first) {
            let mut e = vec![first as u8];
            e.append(&mut rest);
            out.push(e);
        }
    }
    out
}

pub fn weighted_degree(alpha: &[u8], beta: &[u8]) -> u32 {
    2 * alpha.iter().map(|&x| x as u32).sum::<u32>() + beta.iter().map(|&x| x as u32).sum::<u32>()
}

impl MonoTable {
    pub fn new(n: usize, f: usize, dmax: u32) -> Arc<Self> {
        let mut monos = Vec::new();
        for deg in 0..=dmax {
            for ra in 0..=deg / 2 {
                for alpha in exps(n, ra) {
                    for beta in exps(f, deg - 2 * ra) {
                        monos.push((alpha.clone(), beta));
                    }
                }
            }
        }
        let index: HashMap<_, _> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut mul = Vec::new();
        for (i, (a1, b1)) in monos.iter().enumerate() {
            for (j, (a2, b2)) in monos.iter().enumerate() {
                let a: Vec<u8> = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b: Vec<u8> = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                if weighted_degree(&a, &b) <= dmax {
                    mul.push((i as u32, j as u32, index[&(a, b)] as u32));
                }
            }
        }
        Arc::new(MonoTable { n, f, dmax, monos, index, mul })
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn find(&self, alpha: &[u8], beta: &[u8]) -> Option<usize> {
        self.index.get(&(alpha.to_vec(), beta.to_vec())).copied()
    }

    pub fn degree(&self, i: usize) -> u32 {
        weighted_degree(&self.monos[i].0, &self.monos[i].1)
    }
}

/// Truncated Taylor polynomial over a `MonoTable`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    pub table: Arc<MonoTable>,
    pub c: Vec<f64>,
}

impl Taylor {
    pub fn zero(t: &Arc<MonoTable>) -> Self {
        Taylor { table: t.clone(), c: vec![0.0; t.len()] }
    }

    pub fn constant(t: &Arc<MonoTable>, x: f64) -> Self {
        let mut p = Self::zero(t);
        p.c[0] = x;
        p
    }

    pub fn var_r(t: &Arc<MonoTable>, i: usize) -> Self {
        let mut p = Self::zero(t);
        let mut a = vec![0u8; t.n];
        a[i] = 1;
        if let Some(k) = t.find(&a, &vec![0u8; t.f]) {
            p.c[k] = 1.0;
        }
        p
    }

    pub fn var_l(t: &Arc<MonoTable>, c: usize) -> Self {
        let mut p = Self::zero(t);
        let mut b = vec![0u8; t.f];
        b[c] = 1;
        if let Some(k) = t.find(&vec![0u8; t.n], &b) {
            p.c[k] = 1.0;
        }
        p
    }

    pub fn add(&self, o: &Taylor) -> Taylor {
        Taylor { table: self.table.clone(), c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Taylor) -> Taylor {
        Taylor { table: self.table.clone(), c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, x: f64) -> Taylor {
        Taylor { table: self.table.clone(), c: self.c.iter().map(|a| a * x).collect() }
    }

    pub fn mul(&self, o: &Taylor) -> Taylor {
        let mut out = vec![0.0; self.c.len()];
        for &(i, j, k) in &self.table.mul {
            let (a, b) = (self.c[i as usize], o.c[j as usize]);
            if a != 0.0 && b != 0.0 {
                out[k as usize] += a * b;
            }
        }
        Taylor { table: self.table.clone(), c: out }
    }

    /// `G(p)` from the derivatives `G^(m)(p(0))`, `m = 0..=dmax`.
    pub fn compose(&self, derivs: &[f64]) -> Taylor {
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = Taylor::constant(&self.table, derivs[0]);
        let mut pow = Taylor::constant(&self.table, 1.0);
        let mut fact = 1.0;
        for (m, &d) in derivs.iter().enumerate().skip(1) {
            if m as u32 > self.table.dmax {
                break;
            }
            pow = pow.mul(&delta);
            fact *= m as f64;
            if d != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&pow.c) {
                    *o += d / fact * p;
                }
            }
        }
        out
    }
}

/// Derivatives of `sqrt` at `x`, orders `0..=m`.
pub fn sqrt_derivs(x: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    let mut coef = 1.0;
    let mut e = 0.5;
    for _ in 0..=m {
        out.push(coef * x.powf(e));
        coef *= e;
        e -= 1.0;
    }
    out
}

/// Linear forms attached to quadrature nodes; row `x * per_node + c` is `v_{x,c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeForms {
    pub per_node: usize,
    pub v: Array2<f64>,
}

impl NodeForms {
    pub fn nodes(&self) -> usize {
        self.v.nrows() / self.per_node.max(1)
    }

    pub fn form(&self, x: usize, c: usize) -> ArrayView1<'_, f64> {
        self.v.row(x * self.per_node + c)
    }

    /// Rows `J v_{x,c}`.
    pub fn j_rows(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.v.raw_dim());
        let d = self.v.ncols();
        let mut buf = vec![0.0; d];
        for (mut o, r) in out.rows_mut().into_iter().zip(self.v.rows()) {
            j_vec(r.as_slice().unwrap(), &mut buf);
            o.assign(&ArrayView1::from(&buf[..]));
        }
        out
    }
}

/// `r^alpha sum_x c_x(theta) prod_c l_{x,c}^{beta_c}`; `coef` has one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTerm {
    pub alpha: Vec<u8>,
    pub beta: Vec<u8>,
    pub coef: Series,
}

impl NodeTerm {
    pub fn degree(&self) -> u32 {
        weighted_degree(&self.alpha, &self.beta)
    }

    fn r_order(&self) -> u32 {
        self.alpha.iter().map(|&a| a as u32).sum()
    }

    fn l_order(&self) -> u32 {
        self.beta.iter().map(|&a| a as u32).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyHamiltonian {
    pub jet: Jet,
    pub forms: Option<Arc<NodeForms>>,
    pub terms: Vec<NodeTerm>,
    pub d_max: u32,
}

/// Component majorants of a polynomial Hamiltonian on the domain
/// `|r_i| <= mu^2, ||zeta||_s <= mu, |Im theta| < sigma`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyNorm {
    pub value: f64,
    pub grad_r: f64,
    pub grad_s: f64,
    pub grad_beta: f64,
    pub hess_beta: f64,
}

impl PolyNorm {
    pub fn total(&self) -> f64 {
        [self.value, self.grad_r, self.grad_s, self.grad_beta, self.hess_beta]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn add(&mut self, o: &PolyNorm) {
        self.value += o.value;
        self.grad_r += o.grad_r;
        self.grad_s += o.grad_s;
        self.grad_beta += o.grad_beta;
        self.hess_beta += o.hess_beta;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub mu: f64,
    pub mu_prime: f64,
    pub full: f64,
    pub remainder: f64,
    pub bound: f64,
    pub ok: bool,
}

fn frob_c(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn weighted_entries(shape: &BlockShape, dim: usize) -> Vec<f64> {
    let mut w = vec![1.0; dim];
    for l in 0..shape.n_levels() {
        for i in shape.range(l, 2) {
            w[i] = shape.weights[l];
        }
    }
    w
}

/// Majorants of the jet part on the same domain.
fn jet_domain_norm(f: &Jet, p: &NormParams) -> PolyNorm {
    let sh = &f.shape;
    let d = f.dim();
    let mu = p.mu;
    let w = weighted_entries(sh, d);
    let th = f.theta.majorant(p.sigma, frob_c);
    let fr = f.r.majorant(p.sigma, |c| c.iter().map(|z| z.norm()).sum());
    let zm = f.z.majorant(p.sigma, |c| {
        c.iter().zip(&w).map(|(z, w)| z.norm_sqr() * w.powf(-2.0 * p.s)).sum::<f64>().sqrt()
    });
    let zs = f.z.majorant(p.sigma, |c| blockmat::norm_s(sh, c.as_slice().unwrap(), p.s));
    let zb = f.z.majorant(p.sigma, |c| blockmat::norm_l(sh, c.as_slice().unwrap(), p.beta, false));
    let hmm = f.zz.majorant(p.sigma, |c| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += c[[i, j]].norm_sqr() * (w[i] * w[j]).powf(-2.0 * p.s);
            }
        }
        acc.sqrt()
    });
    let hsm = f.zz.majorant(p.sigma, |c| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += c[[i, j]].norm_sqr() * (w[i] / w[j]).powf(2.0 * p.s);
            }
        }
        acc.sqrt()
    });
    let hbm = f.zz.majorant(p.sigma, |c| {
        let mut best = 0.0f64;
        for l in 0..sh.n_levels() {
            let mut acc = 0.0;
            for i in sh.range(l, 2) {
                for j in 0..d {
                    acc += c[[i, j]].norm_sqr() * w[j].powf(-2.0 * p.s);
                }
            }
            best = best.max(sh.weights[l].powf(p.beta) * acc.sqrt());
        }
        best
    });
    let hb = f.zz.majorant(p.sigma, |c| blockmat::dense_norm(sh, c.view(), 2, p.beta, false));
    PolyNorm {
        value: th + mu * mu * fr + mu * zm + 0.5 * mu * mu * hmm,
        grad_r: mu * mu * fr,
        grad_s: mu * (zs + mu * hsm),
        grad_beta: mu * (zb + mu * hbm),
        hess_beta: mu * mu * hb,
    }
}

/// Hessian (in the forms) of the monomial `l^beta` with `|beta| = 2`.
fn mono_hessian(beta: &[u8]) -> Array2<f64> {
    let f = beta.len();
    let mut h = Array2::zeros((f, f));
    for c in 0..f {
        for d in 0..f {
            let mut b = beta.to_vec();
            if b[c] == 0 {
                continue;
            }
            let mut k = b[c] as f64;
            b[c] -= 1;
            if b[d] == 0 {
                continue;
            }
            k *= b[d] as f64;
            h[[c, d]] = k;
        }
    }
    h
}

impl PolyHamiltonian {
    pub fn from_jet(jet: Jet) -> Self {
        PolyHamiltonian { jet, forms: None, terms: Vec::new(), d_max: D_MAX }
    }

    pub fn n(&self) -> usize {
        self.jet.n
    }

    pub fn shape(&self) -> &Arc<BlockShape> {
        &self.jet.shape
    }

    pub fn jet_of(&self) -> Jet {
        self.jet.clone()
    }

    /// Same higher-order terms with a new jet.
    pub fn with_jet(&self, jet: Jet) -> Self {
        PolyHamiltonian { jet, forms: self.forms.clone(), terms: self.terms.clone(), d_max: self.d_max }
    }

    /// `h - h^T`.
    pub fn remainder(&self) -> Self {
        self.with_jet(Jet::zeros(self.n(), self.shape()))
    }

    pub fn is_jet(&self) -> bool {
        self.terms.iter().all(|t| t.coef.is_zero())
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.with_jet(self.jet.scale(c));
        for t in &mut out.terms {
            t.coef = t.coef.scale_re(c);
        }
        out
    }

    /// Drops terms of weighted degree above `d`.
    pub fn cap_degree(&mut self, d: u32) {
        self.terms.retain(|t| t.degree() <= d);
        self.d_max = self.d_max.min(d);
    }

    fn form_values(&self, zeta: &[f64]) -> Option<Array1<f64>> {
        self.forms.as_ref().map(|f| f.v.dot(&ArrayView1::from(zeta)))
    }

    /// Value at a real point.
    pub fn eval(&self, r: &[f64], theta: &[f64], zeta: &[f64]) -> f64 {
        let mut v = self.jet.eval(r, theta, zeta);
        if self.terms.is_empty() {
            return v;
        }
        let forms = self.forms.as_ref().expect("node terms without forms");
        let l = self.form_values(zeta).unwrap();
        let f = forms.per_node;
        for t in &self.terms {
            let c = t.coef.eval(theta);
            let mut rp = 1.0;
            for (i, &a) in t.alpha.iter().enumerate() {
                rp *= r[i].powi(a as i32);
            }
            let mut acc = 0.0;
            for x in 0..forms.nodes() {
                let mut m = c[[x, 0]].re;
                for (ci, &b) in t.beta.iter().enumerate() {
                    if b > 0 {
                        m *= l[x * f + ci].powi(b as i32);
                    }
                }
                acc += m;
            }
            v += rp * acc;
        }
        v
    }

    /// Majorants of the higher-order terms.
    pub fn nonjet_norm(&self, p: &NormParams) -> PolyNorm {
        let mut out = PolyNorm::default();
        let forms = match &self.forms {
            Some(f) => f,
            None => return out,
        };
        let sh = self.shape();
        let f = forms.per_node;
        let rows = forms.v.nrows();
        let mut dual = vec![0.0; rows];
        let mut ns = vec![0.0; rows];
        let mut nb = vec![0.0; rows];
        for i in 0..rows {
            let v = forms.v.row(i);
            let v = v.as_slice().unwrap();
            dual[i] = blockmat::norm_s(sh, v, -p.s);
            ns[i] = blockmat::norm_s(sh, v, p.s);
            nb[i] = blockmat::norm_l(sh, v, p.beta, false);
        }
        let mu = p.mu;
        for t in &self.terms {
            let ra = t.r_order() as i32;
            let rpow = mu.powi(2 * ra);
            let mut node_n = vec![0.0; forms.nodes()];
            for (k, c) in &t.coef.coeffs {
                let e = (p.sigma * lattice::l1(k) as f64).exp();
                for x in 0..forms.nodes() {
                    node_n[x] += c[[x, 0]].norm() * e;
                }
            }
            for (x, &nx) in node_n.iter().enumerate() {
                if nx == 0.0 {
                    continue;
                }
                let m: Vec<f64> = (0..f).map(|c| mu * dual[x * f + c]).collect();
                let prod_except = |skip: &[usize]| -> f64 {
                    let mut b = t.beta.clone();
                    for &c in skip {
                        if b[c] == 0 {
                            return 0.0;
                        }
                        b[c] -= 1;
                    }
                    b.iter().enumerate().map(|(c, &e)| m[c].powi(e as i32)).product()
                };
                let val = nx * rpow * prod_except(&[]);
                out.value += val;
                out.grad_r += ra as f64 * val;
                for c in 0..f {
                    let bc = t.beta[c] as f64;
                    if bc == 0.0 {
                        continue;
                    }
                    let pe = prod_except(&[c]);
                    out.grad_s += mu * nx * rpow * bc * ns[x * f + c] * pe;
                    out.grad_beta += mu * nx * rpow * bc * nb[x * f + c] * pe;
                    for d in 0..f {
                        let bd = t.beta[d] as f64 - if c == d { 1.0 } else { 0.0 };
                        if bd <= 0.0 {
                            continue;
                        }
                        out.hess_beta += mu * mu * nx * rpow * bc * bd * nb[x * f + c] * nb[x * f + d] * prod_except(&[c, d]);
                    }
                }
            }
        }
        out
    }

    pub fn norm_parts(&self, p: &NormParams) -> PolyNorm {
        let mut n = jet_domain_norm(&self.jet, p);
        n.add(&self.nonjet_norm(p));
        n
    }

    /// `[h]_{sigma, mu}`: the largest component majorant.
    pub fn poly_norm(&self, p: &NormParams) -> f64 {
        self.norm_parts(p).total()
    }

    /// The jet of `h` and the size of `h - h^T` on the smaller domain `mu'`.
    pub fn split_remainder(&self, p: &NormParams, mu_prime: f64) -> Result<(Jet, RemainderReport)> {
        if !(mu_prime > 0.0 && mu_prime < p.mu) {
            return Err(KamError::Domain(format!("need 0 < mu' < mu, got mu' = {mu_prime}, mu = {}", p.mu)));
        }
        let full = self.poly_norm(p);
        let q = NormParams { mu: mu_prime, ..*p };
        let rem = self.nonjet_norm(&q).total();
        let bound = 2.0 * (mu_prime / p.mu).powi(3) * full;
        let ok = mu_prime > p.mu / 2.0 || rem <= bound * (1.0 + 1e-12);
        Ok((
            self.jet_of(),
            RemainderReport { mu: p.mu, mu_prime, full, remainder: rem, bound, ok },
        ))
    }

    /// Jet part of `{h - h^T, s}` for a jet `s`, to first order in the
    /// higher-order terms of `h`.
    pub fn lower_bracket(&self, sj: &Jet, kmax: u32) -> Result<(Jet, Tail)> {
        let n = self.n();
        let mut out = Jet::zeros(n, self.shape());
        let mut tail = Tail::default();
        let forms = match &self.forms {
            Some(f) if !self.terms.is_empty() => f.clone(),
            _ => return Ok((out, tail)),
        };
        let d = out.dim();
        let f = forms.per_node;
        let nodes = forms.nodes();
        let dth: Vec<Series> = (0..n).map(|i| sj.theta.deriv(i)).collect();
        let dz: Vec<Series> = (0..n).map(|i| sj.z.deriv(i)).collect();
        let jrows = forms.j_rows();
        // s_{x,c}(theta) = <J v_{x,c}, S_z(theta)>
        let jrows_c = jrows.mapv(|x| C64::new(x, 0.0));
        let sform = sj.z.left_mul(&jrows_c);
        // per-node quadratic coefficients, rows = node, cols = f * f
        let mut quad = Series::zeros(n, nodes, f * f);
        for t in &self.terms {
            let (ra, la) = (t.r_order(), t.l_order());
            if t.coef.is_zero() {
                continue;
            }
            match (ra, la) {
                (1, 1) => {
                    let i = t.alpha.iter().position(|&a| a == 1).unwrap();
                    let c = t.beta.iter().position(|&b| b == 1).unwrap();
                    let b = node_vector(&forms, &t.coef, c);
                    let (p1, t1) = grid_product(&b, &dth[i], d, 1, kmax, |x, y, mut o| {
                        o.assign(&(&x * y[[0, 0]]));
                    });
                    out.z = out.z.add(&p1);
                    tail.add(t1);
                    let (p2, t2) = grid_product(&b, &dz[i], d, d, kmax, |x, y, mut o| {
                        for a in 0..d {
                            for e in 0..d {
                                o[[a, e]] = x[[a, 0]] * y[[e, 0]] + y[[a, 0]] * x[[e, 0]];
                            }
                        }
                    });
                    out.zz = out.zz.add(&p2);
                    tail.add(t2);
                    let (p3, t3) = grid_product(&b, &sj.z, n, 1, kmax, |x, y, mut o| {
                        let mut v = 0.0;
                        for m in 0..d / 2 {
                            v += -x[[2 * m + 1, 0]] * y[[2 * m, 0]] + x[[2 * m, 0]] * y[[2 * m + 1, 0]];
                        }
                        o[[i, 0]] = v;
                    });
                    out.r = out.r.add(&p3);
                    tail.add(t3);
                }
                (1, 2) => {
                    let i = t.alpha.iter().position(|&a| a == 1).unwrap();
                    let hm = mono_hessian(&t.beta);
                    let (p, tt) = grid_product(&t.coef, &dth[i], nodes, 1, kmax, |x, y, mut o| {
                        o.assign(&(&x * y[[0, 0]]));
                    });
                    tail.add(tt);
                    add_quad(&mut quad, &p, &hm);
                }
                (2, 0) => {
                    let c = t.coef.map(1, 1, |_, m| Array2::from_elem((1, 1), m.sum()));
                    for mm in 0..n {
                        if t.alpha[mm] == 0 {
                            continue;
                        }
                        let mut rest = t.alpha.clone();
                        rest[mm] -= 1;
                        let l = rest.iter().position(|&a| a == 1).unwrap();
                        let am = t.alpha[mm] as f64;
                        let (p, tt) = grid_product(&c, &dth[mm], n, 1, kmax, |x, y, mut o| {
                            o[[l, 0]] = am * x[[0, 0]] * y[[0, 0]];
                        });
                        out.r = out.r.add(&p);
                        tail.add(tt);
                    }
                }
                (0, 3) => {
                    for c in 0..f {
                        if t.beta[c] == 0 {
                            continue;
                        }
                        let mut b2 = t.beta.clone();
                        b2[c] -= 1;
                        let hm = mono_hessian(&b2) * t.beta[c] as f64;
                        let sc = row_slice(&sform, c, f, nodes);
                        let (p, tt) = grid_product(&t.coef, &sc, nodes, 1, kmax, |x, y, mut o| {
                            o.assign(&(&x * &y));
                        });
                        tail.add(tt);
                        add_quad(&mut quad, &p, &hm);
                    }
                }
                _ => {}
            }
        }
        if !quad.is_empty() {
            let h = node_hessian(&forms, &quad);
            out.zz = out.zz.add(&h);
        }
        let out = out.realify();
        Ok((out, tail))
    }
}

/// Rows `x * f + c` of a node-form series, one per node.
fn row_slice(s: &Series, c: usize, f: usize, nodes: usize) -> Series {
    s.map(nodes, 1, |_, m| Array2::from_shape_fn((nodes, 1), |(x, _)| m[[x * f + c, 0]]))
}

/// `sum_x c_x(theta) v_{x,c}` as a vector series.
fn node_vector(forms: &NodeForms, coef: &Series, c: usize) -> Series {
    let f = forms.per_node;
    let nodes = forms.nodes();
    let d = forms.v.ncols();
    let vc = Array2::from_shape_fn((nodes, d), |(x, j)| forms.v[[x * f + c, j]]);
    let vct = vc.t().mapv(|x| C64::new(x, 0.0));
    coef.map(d, 1, |_, m| vct.dot(m))
}

fn add_quad(quad: &mut Series, p: &Series, hm: &Array2<f64>) {
    let f = hm.nrows();
    let nodes = quad.rows;
    for (k, c) in &p.coeffs {
        let mut m = Array2::<C64>::zeros((nodes, f * f));
        for x in 0..nodes {
            let z = c[[x, 0]];
            for a in 0..f {
                for b in 0..f {
                    if hm[[a, b]] != 0.0 {
                        m[[x, a * f + b]] = z * hm[[a, b]];
                    }
                }
            }
        }
        quad.add_at(k, &m);
    }
}

fn is_positive(k: &[i32]) -> bool {
    match k.iter().find(|&&v| v != 0) {
        Some(&v) => v > 0,
        None => true,
    }
}

/// `H(theta) = sum_x sum_{c,d} D_{x,cd}(theta) v_{x,c} v_{x,d}^T` for a real
/// series `D` (rows = nodes, cols = f * f).
pub fn node_hessian(forms: &NodeForms, quad: &Series) -> Series {
    let f = forms.per_node;
    let nodes = forms.nodes();
    let d = forms.v.ncols();
    let rows = nodes * f;
    let mut out = Series::zeros(quad.n, d, d);
    let mut yr = Array2::<f64>::zeros((rows, d));
    let mut yi = Array2::<f64>::zeros((rows, d));
    let mut hr = Array2::<f64>::zeros((d, d));
    let mut hi = Array2::<f64>::zeros((d, d));
    let vt = forms.v.t();
    for (k, dm) in &quad.coeffs {
        if !is_positive(k) {
            continue;
        }
        yr.fill(0.0);
        yi.fill(0.0);
        for x in 0..nodes {
            for a in 0..f {
                let mut rr = yr.slice_mut(s![x * f + a, ..]);
                let mut ri = yi.slice_mut(s![x * f + a, ..]);
                for b in 0..f {
                    let z = dm[[x, a * f + b]];
                    if z == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let v = forms.v.row(x * f + b);
                    rr.scaled_add(z.re, &v);
                    ri.scaled_add(z.im, &v);
                }
            }
        }
        general_mat_mul(1.0, &vt, &yr, 0.0, &mut hr);
        general_mat_mul(1.0, &vt, &yi, 0.0, &mut hi);
        let h = Array2::from_shape_fn((d, d), |(i, j)| C64::new(0.5 * (hr[[i, j]] + hr[[j, i]]), 0.5 * (hi[[i, j]] + hi[[j, i]])));
        if k.iter().all(|&v| v == 0) {
            out.add_at(k, &h.mapv(|z| C64::new(z.re, 0.0)));
        } else {
            out.add_at(&lattice::neg(k), &h.mapv(|z| z.conj()));
            out.add_at(k, &h);
        }
    }
    out
}

/// `{f, g}` of two jets as a polynomial Hamiltonian.
pub fn poisson(f: &Jet, g: &Jet, opts: &BracketOpts) -> Result<(PolyHamiltonian, Tail)> {
    let (j, t) = jets::poisson_jet(f, g, opts)?;
    Ok((PolyHamiltonian::from_jet(j), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{Clustering, SpectralModel};

    fn shape() -> Arc<BlockShape> {
        BlockShape::new(&Clustering::enumerate(&SpectralModel::qho(2), 3).unwrap())
    }

    #[test]
    fn mono_table_counts() {
        // n = 1, f = 1, degree <= 4: 1, l, l^2, r, l^3, r l, l^4, r l^2, r^2
        let t = MonoTable::new(1, 1, 4);
        assert_eq!(t.len(), 9);
        assert_eq!(t.degree(0), 0);
    }

    #[test]
    fn compose_exp() {
        let t = MonoTable::new(0, 1, 4);
        let x = Taylor::var_l(&t, 0);
        let e = x.compose(&[1.0; 5]);
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (a, b) in e.c.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_taylor() {
        let d = sqrt_derivs(4.0, 2);
        assert!((d[0] - 2.0).abs() < 1e-15);
        assert!((d[1] - 0.25).abs() < 1e-15);
        assert!((d[2] + 1.0 / 32.0).abs() < 1e-15);
    }

    fn cubic() -> PolyHamiltonian {
        let sh = shape();
        let d = 2 * sh.n_modes();
        let mut v = Array2::zeros((1, d));
        v[[0, 0]] = 1.0;
        let mut p = PolyHamiltonian::from_jet(Jet::zeros(2, &sh));
        p.forms = Some(Arc::new(NodeForms { per_node: 1, v }));
        p.terms.push(NodeTerm {
            alpha: vec![0, 0],
            beta: vec![3],
            coef: Series::constant(2, Array2::from_elem((1, 1), C64::new(1.0, 0.0))),
        });
        p
    }

    #[test]
    fn cubic_remainder() {
        let p = cubic();
        let np = NormParams { sigma: 0.3, mu: 0.5, s: 1.0, beta: 0.25 };
        let (j, rep) = p.split_remainder(&np, 0.25).unwrap();
        assert!(j.is_zero());
        assert!(rep.ok);
        assert!((rep.remainder / rep.full - 0.125).abs() < 1e-12);
        assert!((p.eval(&[0.0, 0.0], &[0.1, 0.2], &{
            let mut z = vec![0.0; 2 * p.shape().n_modes()];
            z[0] = 0.5;
            z
        }) - 0.125)
            .abs()
            < 1e-15);
    }
}
