//! Builders for Klein-Gordon on the sphere and the regularized quantum
//! harmonic oscillator on the plane.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::blockmat::BlockShape;
use crate::error::{KamError, Result};
use crate::fourier::{nice_size, Grid, GridField, Series, Tail};
use crate::homo::NormalFormHam;
use crate::jets::Jet;
use crate::modes::{AdmissibleSet, Clustering, ModeIndex, SpectralModel};
use crate::poly::{self, MonoTable, NodeForms, NodeTerm, PolyHamiltonian, Taylor};
use crate::quad;
use crate::C64;

/// Normalized associated Legendre values `p[j][m]` for `0 <= m <= j <= jmax`
/// such that `p[j][m] e^{i m phi}` is an orthonormal harmonic.
pub fn legendre_table(jmax: usize, x: f64) -> Vec<Vec<f64>> {
    let mut p: Vec<Vec<f64>> = (0..=jmax).map(|j| vec![0.0; j + 1]).collect();
    let sx = (1.0 - x * x).max(0.0).sqrt();
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=jmax {
        p[m][m] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sx * p[m - 1][m - 1];
    }
    for m in 0..jmax {
        p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * p[m][m];
    }
    for m in 0..=jmax {
        for j in m + 2..=jmax {
            let a = |j: usize| (((4 * j * j) as f64 - 1.0) / ((j * j - m * m) as f64)).sqrt();
            p[j][m] = a(j) * (x * p[j - 1][m] - p[j - 2][m] / a(j - 1));
        }
    }
    p
}

fn real_harmonic(p: &[Vec<f64>], j: usize, l: i32, phi: f64) -> f64 {
    let m = l.unsigned_abs() as usize;
    let v = p[j][m];
    match l.cmp(&0) {
        std::cmp::Ordering::Equal => v,
        std::cmp::Ordering::Greater => 2f64.sqrt() * v * (m as f64 * phi).cos(),
        std::cmp::Ordering::Less => 2f64.sqrt() * v * (m as f64 * phi).sin(),
    }
}

/// Real orthonormal spherical harmonic of degree `j`, order `l`, at polar
/// angle `polar` and azimuth `azimuth`.
pub fn sph_harmonic(j: u32, l: i32, polar: f64, azimuth: f64) -> Result<f64> {
    if l.unsigned_abs() > j {
        return Err(KamError::Domain(format!("order {l} out of range for degree {j}")));
    }
    let p = legendre_table(j as usize, polar.cos());
    Ok(real_harmonic(&p, j as usize, l, azimuth))
}

/// Product rule on the sphere: Gauss-Legendre in `cos(polar)` times a
/// uniform azimuthal grid. Points are `(cos polar, azimuth)`.
#[derive(Debug, Clone)]
pub struct SphereQuad {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl SphereQuad {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Self {
        let (x, w) = quad::gauss_legendre(n_polar);
        let mut points = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (xi, wi) in x.iter().zip(&w) {
            for k in 0..n_azimuth {
                points.push((*xi, k as f64 * dphi));
                weights.push(wi * dphi);
            }
        }
        SphereQuad { points, weights }
    }

    /// Default resolution for a truncation weight.
    pub fn for_weight(w_max: u32) -> Self {
        let w = w_max as usize;
        Self::new(2 * w + 4, 4 * w + 4)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Values of `Psi_a` for the listed modes, one row per point.
    pub fn basis(&self, modes: &[ModeIndex]) -> Array2<f64> {
        let jmax = modes.iter().map(|a| a.j).max().unwrap_or(0) as usize;
        let mut out = Array2::zeros((self.len(), modes.len()));
        for (q, &(x, phi)) in self.points.iter().enumerate() {
            let p = legendre_table(jmax, x);
            for (c, a) in modes.iter().enumerate() {
                out[[q, c]] = real_harmonic(&p, a.j as usize, a.l, phi);
            }
        }
        out
    }
}

/// Largest argument accepted by the Hermite evaluators.
pub const HERMITE_RANGE: f64 = 37.0;

/// Hermite function `phi_i` in the odd-index convention: `phi_i` is the
/// normalized eigenfunction of `-d^2 + x^2` with eigenvalue `i`.
pub fn hermite(i: u32, x: f64) -> Result<f64> {
    if i % 2 == 0 {
        return Err(KamError::Domain(format!("Hermite index {i} must be odd")));
    }
    Ok(hermite_all(((i - 1) / 2) as usize, x)?[((i - 1) / 2) as usize])
}

/// `h_0(x), ..., h_nmax(x)` (standard indexing).
pub fn hermite_all(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !(x.abs() <= HERMITE_RANGE) {
        return Err(KamError::Domain(format!("Hermite argument {x} beyond range guard")));
    }
    let mut h = vec![0.0; nmax + 1];
    h[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if nmax >= 1 {
        h[1] = 2f64.sqrt() * x * h[0];
    }
    for k in 1..nmax {
        h[k + 1] = (2.0 / (k + 1) as f64).sqrt() * x * h[k] - (k as f64 / (k + 1) as f64).sqrt() * h[k - 1];
    }
    Ok(h)
}

/// `Phi_{j,l}(x) = phi_{2l-1}(x_1) phi_{2j-2l+1}(x_2)`.
pub fn qho_basis(a: ModeIndex, x: [f64; 2]) -> Result<f64> {
    let n1 = (a.l - 1) as usize;
    let n2 = (a.j as i32 - a.l) as usize;
    let h1 = hermite_all(n1, x[0])?;
    let h2 = hermite_all(n2, x[1])?;
    Ok(h1[n1] * h2[n2])
}

/// Diagonal of the projection kernel onto the level `j`.
pub fn qho_kernel(j: u32, x: [f64; 2]) -> Result<f64> {
    let n = j as usize;
    let h1 = hermite_all(n, x[0])?;
    let h2 = hermite_all(n, x[1])?;
    Ok((1..=j as usize).map(|l| (h1[l - 1] * h2[n - l]).powi(2)).sum())
}

/// Tensor Gauss-Hermite rule exact for `poly * exp(-2|x|^2)` up to degree
/// `2q - 1` per axis.
pub fn plane_quad(q: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (y, w) = quad::gauss_hermite(q);
    let s = 2f64.sqrt();
    let xs: Vec<f64> = y.iter().map(|v| v / s).collect();
    let ws: Vec<f64> = y.iter().zip(&w).map(|(v, w)| w * (v * v).exp() / s).collect();
    let mut pts = Vec::with_capacity(q * q);
    let mut wts = Vec::with_capacity(q * q);
    for i in 0..q {
        for k in 0..q {
            pts.push([xs[i], xs[k]]);
            wts.push(ws[i] * ws[k]);
        }
    }
    (pts, wts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KgNonlinearity {
    #[serde(rename = "u2")]
    U2,
    #[serde(rename = "u3")]
    U3,
    #[serde(rename = "sin")]
    SinU,
    #[serde(rename = "zero")]
    Zero,
    /// `g(u) = u`, for checks.
    #[serde(rename = "linear")]
    Linear,
}

impl KgNonlinearity {
    /// `G, g, g', g'', g'''` at `u`, with `G' = g`.
    pub fn derivs(&self, u: f64) -> [f64; 5] {
        match self {
            KgNonlinearity::U2 => [u * u * u / 3.0, u * u, 2.0 * u, 2.0, 0.0],
            KgNonlinearity::U3 => [u.powi(4) / 4.0, u.powi(3), 3.0 * u * u, 6.0 * u, 6.0],
            KgNonlinearity::SinU => [1.0 - u.cos(), u.sin(), u.cos(), -u.sin(), -u.cos()],
            KgNonlinearity::Zero => [0.0; 5],
            KgNonlinearity::Linear => [0.5 * u * u, u, 1.0, 0.0, 0.0],
        }
    }

    /// Degree in `u` of `G`, when polynomial.
    fn degree(&self) -> Option<usize> {
        match self {
            KgNonlinearity::U2 => Some(3),
            KgNonlinearity::U3 => Some(4),
            KgNonlinearity::Zero => Some(0),
            KgNonlinearity::Linear => Some(2),
            KgNonlinearity::SinU => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KgProblem {
    pub model: SpectralModel,
    pub adm: AdmissibleSet,
    pub g: KgNonlinearity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub nodes: usize,
    pub tail: Tail,
    /// Max deviation of the Hessian from a finer quadrature at a test angle.
    pub hessian_check: f64,
    pub hessian_scale: f64,
}

/// Samples `eval(node, theta)` on a uniform angle grid and sorts the Taylor
/// coefficients into a jet plus node terms.
fn assemble(
    table: &Arc<MonoTable>,
    forms: Arc<NodeForms>,
    shape: &Arc<BlockShape>,
    g: usize,
    kmax: u32,
    eval: impl Fn(usize, &[f64]) -> Taylor,
) -> Result<(PolyHamiltonian, Tail)> {
    let n = table.n;
    let f = table.f;
    let nodes = forms.nodes();
    let grid = Grid::new(n, g);
    let np = grid.points();
    let mut fields: Vec<Option<Array2<f64>>> = vec![None; table.len()];
    for p in 0..np {
        let th = grid.angle(p);
        for x in 0..nodes {
            let t = eval(x, &th);
            for (i, &c) in t.c.iter().enumerate() {
                if c != 0.0 {
                    fields[i].get_or_insert_with(|| Array2::zeros((np, nodes)))[[p, x]] = c;
                }
            }
        }
    }
    let mut jet = Jet::zeros(n, shape);
    let d = jet.dim();
    let mut quad = Series::zeros(n, nodes, f * f);
    let mut terms = Vec::new();
    let mut tail = Tail::default();
    for (i, data) in fields.into_iter().enumerate() {
        let data = match data {
            Some(d) => d,
            None => continue,
        };
        let gf = GridField { rows: nodes, cols: 1, data };
        let (coef, t) = gf.to_series(&grid, kmax);
        tail.add(t);
        let (alpha, beta) = &table.monos[i];
        let ra: u32 = alpha.iter().map(|&a| a as u32).sum();
        let la: u32 = beta.iter().map(|&b| b as u32).sum();
        match (ra, la) {
            (0, 0) => jet.theta = jet.theta.add(&coef.map(1, 1, |_, m| Array2::from_elem((1, 1), m.sum()))),
            (1, 0) => {
                let r = alpha.iter().position(|&a| a == 1).unwrap();
                jet.r = jet.r.add(&coef.map(n, 1, |_, m| {
                    let mut v = Array2::zeros((n, 1));
                    v[[r, 0]] = m.sum();
                    v
                }));
            }
            (0, 1) => {
                let c = beta.iter().position(|&b| b == 1).unwrap();
                let vc = Array2::from_shape_fn((d, nodes), |(j, x)| C64::new(forms.v[[x * f + c, j]], 0.0));
                jet.z = jet.z.add(&coef.map(d, 1, |_, m| vc.dot(m)));
            }
            (0, 2) => {
                let hm = mono_hessian(beta);
                for (k, c) in &coef.coeffs {
                    let mut m = Array2::<C64>::zeros((nodes, f * f));
                    for x in 0..nodes {
                        for a in 0..f {
                            for b in 0..f {
                                m[[x, a * f + b]] = c[[x, 0]] * hm[[a, b]];
                            }
                        }
                    }
                    quad.add_at(k, &m);
                }
            }
            _ => terms.push(NodeTerm { alpha: alpha.clone(), beta: beta.clone(), coef }),
        }
    }
    if !quad.is_empty() {
        jet.zz = poly::node_hessian(&forms, &quad);
    }
    let mut ph = PolyHamiltonian::from_jet(jet.realify());
    ph.d_max = table.dmax;
    for t in &mut terms {
        t.coef = t.coef.realify();
    }
    ph.terms = terms;
    ph.forms = Some(forms);
    Ok((ph, tail))
}

fn mono_hessian(beta: &[u8]) -> Array2<f64> {
    let f = beta.len();
    Array2::from_shape_fn((f, f), |(c, d)| {
        let mut b = beta.to_vec();
        if b[c] == 0 {
            return 0.0;
        }
        let mut k = b[c] as f64;
        b[c] -= 1;
        if b[d] == 0 {
            return 0.0;
        }
        k *= b[d] as f64;
        k
    })
}

fn angle_grid(kmax: u32, degree: Option<usize>) -> usize {
    let full = nice_size(2 * kmax as usize + 1);
    match degree {
        Some(d) => nice_size(2 * d + 1).min(full),
        None => full,
    }
}

fn sqrt_taylors(table: &Arc<MonoTable>, actions: &[f64]) -> Vec<Taylor> {
    actions
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let base = Taylor::constant(table, a).add(&Taylor::var_r(table, i));
            base.compose(&poly::sqrt_derivs(a, table.dmax as usize))
        })
        .collect()
}

fn kg_lambda(model: &SpectralModel, j: u32) -> f64 {
    model.normal_eigenvalue(j)
}

/// Klein-Gordon on the sphere: `h_0` at `rho` and `f = int G(x, u_hat)`.
pub fn kg_build(
    prob: &KgProblem,
    clus: &Clustering,
    rho: &[f64],
    d_max: u32,
    k_max: u32,
) -> Result<(NormalFormHam, PolyHamiltonian, BuildReport)> {
    kg_build_with(prob, clus, rho, d_max, k_max, &SphereQuad::for_weight(clus.w_max))
}

pub fn kg_build_with(
    prob: &KgProblem,
    clus: &Clustering,
    rho: &[f64],
    d_max: u32,
    k_max: u32,
    sq: &SphereQuad,
) -> Result<(NormalFormHam, PolyHamiltonian, BuildReport)> {
    let model = &prob.model;
    let adm = &prob.adm;
    let n = adm.n();
    let shape = BlockShape::new(clus);
    let h0 = NormalFormHam::from_model(model, adm, clus, rho)?;
    let normal: Vec<ModeIndex> = clus.modes().collect();
    let d = 2 * normal.len();
    let psi_n = sq.basis(&normal);
    let psi_t = sq.basis(&adm.modes);
    let lam_n: Vec<f64> = normal.iter().map(|a| kg_lambda(model, a.j)).collect();
    let lam_t: Vec<f64> = adm.modes.iter().map(|a| kg_lambda(model, a.j)).collect();
    let nodes = sq.len();
    let mut v = Array2::zeros((nodes, d));
    for x in 0..nodes {
        for (c, lam) in lam_n.iter().enumerate() {
            v[[x, 2 * c]] = psi_n[[x, c]] / lam.sqrt();
        }
    }
    let forms = Arc::new(NodeForms { per_node: 1, v });
    let table = MonoTable::new(n, 1, d_max);
    let sqs = sqrt_taylors(&table, &adm.actions);
    let ell = Taylor::var_l(&table, 0);
    let amp: Array2<f64> = Array2::from_shape_fn((nodes, n), |(x, i)| psi_t[[x, i]] / lam_t[i].sqrt());
    let g = prob.g;
    let grid_g = angle_grid(k_max, g.degree());
    let (ph, tail) = assemble(&table, forms.clone(), &shape, grid_g, k_max, |x, th| {
        let mut u = ell.clone();
        for i in 0..n {
            u = u.add(&sqs[i].scale(th[i].cos() * amp[[x, i]]));
        }
        let dv = g.derivs(u.c[0]);
        u.compose(&dv).scale(sq.weights[x])
    })?;
    // Hessian against a finer rule at a generic angle
    let th: Vec<f64> = (0..n).map(|i| 0.37 + 0.91 * i as f64).collect();
    let fine = SphereQuad::new(
        (sq.len() as f64).sqrt() as usize + 8,
        2 * ((sq.len() as f64).sqrt() as usize) + 8,
    );
    let direct = kg_hessian_direct(prob, clus, &fine, &th);
    let built = if ph.jet.zz.is_empty() { Array2::zeros((d, d)) } else { ph.jet.zz.eval_re(&th) };
    let diff = (&built - &direct).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = direct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let report = BuildReport { nodes, tail, hessian_check: diff, hessian_scale: scale };
    if diff > 1e-8 * scale.max(1.0) {
        return Err(KamError::Quadrature(diff));
    }
    Ok((h0, ph, report))
}

/// `d^2 f / d zeta d zeta` at `r = 0`, `zeta = 0` by direct quadrature:
/// only the first component of each mode couples, with
/// `int g'(u_1) Psi_a Psi_b / sqrt(lambda_a lambda_b)`.
pub fn kg_hessian_direct(prob: &KgProblem, clus: &Clustering, sq: &SphereQuad, theta: &[f64]) -> Array2<f64> {
    let model = &prob.model;
    let adm = &prob.adm;
    let normal: Vec<ModeIndex> = clus.modes().collect();
    let d = 2 * normal.len();
    let psi_n = sq.basis(&normal);
    let psi_t = sq.basis(&adm.modes);
    let lam_n: Vec<f64> = normal.iter().map(|a| kg_lambda(model, a.j)).collect();
    let mut h = Array2::zeros((d, d));
    for x in 0..sq.len() {
        let mut u = 0.0;
        for (i, a) in adm.modes.iter().enumerate() {
            u += adm.actions[i].sqrt() * theta[i].cos() * psi_t[[x, i]] / kg_lambda(model, a.j).sqrt();
        }
        let gp = prob.g.derivs(u)[2] * sq.weights[x];
        if gp == 0.0 {
            continue;
        }
        for a in 0..normal.len() {
            let va = psi_n[[x, a]] / lam_n[a].sqrt();
            for b in 0..normal.len() {
                h[[2 * a, 2 * b]] += gp * va * psi_n[[x, b]] / lam_n[b].sqrt();
            }
        }
    }
    h
}

/// Block table `w_a^beta w_b^beta |M_ab|_HS` of the xi-xi Hessian
/// `M = 1/2 (d^2 f / d zeta_1 d zeta_1)` at a fixed angle.
pub fn hessian_block_table(shape: &BlockShape, h: &Array2<f64>, beta: f64) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::new();
    for a in 0..shape.n_levels() {
        for b in 0..shape.n_levels() {
            let ra = shape.range(a, 2);
            let rb = shape.range(b, 2);
            let mut acc = 0.0;
            for i in ra.clone().step_by(2) {
                for j in rb.clone().step_by(2) {
                    acc += (0.5 * h[[i, j]]).powi(2);
                }
            }
            let v = shape.weights[a].powf(beta) * shape.weights[b].powf(beta) * acc.sqrt();
            out.push((shape.level_w[a], shape.level_w[b], v));
        }
    }
    out
}

/// Block-wise supremum of [`hessian_block_table`] over a uniform
/// `grid x grid` angle lattice (n = 2) or `grid` points per axis.
pub fn kg_hessian_sup_table(prob: &KgProblem, clus: &Clustering, sq: &SphereQuad, beta: f64, grid: usize) -> Vec<(u32, u32, f64)> {
    let shape = BlockShape::new(clus);
    let n = prob.adm.n();
    let total = grid.pow(n as u32);
    let mut out: Vec<(u32, u32, f64)> = Vec::new();
    let mut theta = vec![0.0; n];
    for idx in 0..total {
        let mut rest = idx;
        for t in theta.iter_mut() {
            *t = 2.0 * PI * (rest % grid) as f64 / grid as f64;
            rest /= grid;
        }
        let h = kg_hessian_direct(prob, clus, sq, &theta);
        let tab = hessian_block_table(&shape, &h, beta);
        if out.is_empty() {
            out = tab;
        } else {
            for (o, t) in out.iter_mut().zip(tab) {
                o.2 = o.2.max(t.2);
            }
        }
    }
    out
}

/// Complex-frame block table of a real Hessian: `w_a^beta w_b^beta |H~_ab|_HS`
/// over all (xi, eta) components.
pub fn complex_block_table(shape: &Arc<BlockShape>, h: &Array2<f64>, beta: f64) -> Vec<(u32, u32, f64)> {
    let bm = crate::blockmat::BlockMatrix::from_dense(shape, 2, h.view()).unwrap();
    let z = bm.to_complex();
    let mut out = Vec::new();
    for a in 0..shape.n_levels() {
        for b in 0..shape.n_levels() {
            let v = shape.weights[a].powf(beta) * shape.weights[b].powf(beta) * z.hs(a, b);
            out.push((shape.level_w[a], shape.level_w[b], v));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QhoNonlinearity {
    /// `sign / 4 |u|^4`.
    Nls { sign: f64 },
    /// `int |u(x)|^2 |u(y)|^2 phi(x - y)`, Gaussian `phi` of the given width.
    Hartree { width: f64 },
    Zero,
}

#[derive(Debug, Clone)]
pub struct QhoProblem {
    pub model: SpectralModel,
    pub adm: AdmissibleSet,
    pub beta: f64,
    pub f: QhoNonlinearity,
    /// Gauss-Hermite order per axis; default exact for quartic products.
    pub quad_order: Option<usize>,
}

pub fn gaussian_kernel(width: f64, z: [f64; 2]) -> f64 {
    let r2 = z[0] * z[0] + z[1] * z[1];
    (-r2 / (2.0 * width * width)).exp() / (2.0 * PI * width * width)
}

/// Harmonic oscillator: `h_0` at `rho` and `f = P(T^{-beta} u)`.
pub fn qho_build(
    prob: &QhoProblem,
    clus: &Clustering,
    rho: &[f64],
    d_max: u32,
    k_max: u32,
) -> Result<(NormalFormHam, PolyHamiltonian, BuildReport)> {
    let adm = &prob.adm;
    let n = adm.n();
    let shape = BlockShape::new(clus);
    let h0 = NormalFormHam::from_model(&prob.model, adm, clus, rho)?;
    let normal: Vec<ModeIndex> = clus.modes().collect();
    let d = 2 * normal.len();
    let jmax = normal.iter().chain(&adm.modes).map(|a| a.j).max().unwrap_or(1) as usize;
    let default_q = match prob.f {
        QhoNonlinearity::Hartree { .. } => jmax + 3,
        _ => 2 * jmax + 1,
    };
    let q = prob.quad_order.unwrap_or(default_q);
    let (pts, wts) = plane_quad(q);
    let npts = pts.len();
    let wb = |a: &ModeIndex| (a.weight()).powf(-prob.beta);
    let mut phi_n = Array2::zeros((npts, normal.len()));
    let mut phi_t = Array2::zeros((npts, n));
    for (x, p) in pts.iter().enumerate() {
        for (c, a) in normal.iter().enumerate() {
            phi_n[[x, c]] = qho_basis(*a, *p)? * wb(a);
        }
        for (i, a) in adm.modes.iter().enumerate() {
            phi_t[[x, i]] = qho_basis(*a, *p)? * wb(a);
        }
    }
    // u_N = sum (zeta_1 + i zeta_2) / sqrt 2 Phi_a / w_a^beta
    let s2 = 1.0 / 2f64.sqrt();
    let mut single = Array2::zeros((2 * npts, d));
    for x in 0..npts {
        for c in 0..normal.len() {
            single[[2 * x, 2 * c]] = s2 * phi_n[[x, c]];
            single[[2 * x + 1, 2 * c + 1]] = s2 * phi_n[[x, c]];
        }
    }
    let grid_g = angle_grid(k_max, Some(4));
    let (ph, tail) = match prob.f {
        QhoNonlinearity::Zero => (PolyHamiltonian::from_jet(Jet::zeros(n, &shape)), Tail::default()),
        QhoNonlinearity::Nls { sign } => {
            let table = MonoTable::new(n, 2, d_max);
            let sqs = sqrt_taylors(&table, &adm.actions);
            let l0 = Taylor::var_l(&table, 0);
            let l1 = Taylor::var_l(&table, 1);
            let forms = Arc::new(NodeForms { per_node: 2, v: single });
            assemble(&table, forms, &shape, grid_g, k_max, |x, th| {
                let m = modulus2(&sqs, &phi_t, x, th, &l0, &l1);
                m.mul(&m).scale(0.25 * sign * wts[x])
            })?
        }
        QhoNonlinearity::Hartree { width } => {
            let table = MonoTable::new(n, 4, d_max);
            let sqs = sqrt_taylors(&table, &adm.actions);
            let ls: Vec<Taylor> = (0..4).map(|c| Taylor::var_l(&table, c)).collect();
            let kmax_g = gaussian_kernel(width, [0.0, 0.0]);
            let mut pairs = Vec::new();
            for x in 0..npts {
                for y in x..npts {
                    let z = [pts[x][0] - pts[y][0], pts[x][1] - pts[y][1]];
                    let k = gaussian_kernel(width, z);
                    let c = if x == y { 1.0 } else { 2.0 } * k * wts[x] * wts[y];
                    if k > 1e-16 * kmax_g && c != 0.0 {
                        pairs.push((x, y, c));
                    }
                }
            }
            let mut v = Array2::zeros((4 * pairs.len(), d));
            for (p, &(x, y, _)) in pairs.iter().enumerate() {
                for c in 0..2 {
                    v.row_mut(4 * p + c).assign(&single.row(2 * x + c));
                    v.row_mut(4 * p + 2 + c).assign(&single.row(2 * y + c));
                }
            }
            let forms = Arc::new(NodeForms { per_node: 4, v });
            assemble(&table, forms, &shape, grid_g, k_max, |p, th| {
                let (x, y, c) = pairs[p];
                let mx = modulus2(&sqs, &phi_t, x, th, &ls[0], &ls[1]);
                let my = modulus2(&sqs, &phi_t, y, th, &ls[2], &ls[3]);
                mx.mul(&my).scale(c)
            })?
        }
    };
    let nodes = ph.forms.as_ref().map(|f| f.nodes()).unwrap_or(0);
    Ok((h0, ph, BuildReport { nodes, tail, hessian_check: 0.0, hessian_scale: 0.0 }))
}

/// `|u_T + l_re + i l_im|^2` at node `x`.
fn modulus2(sqs: &[Taylor], phi_t: &Array2<f64>, x: usize, th: &[f64], lre: &Taylor, lim: &Taylor) -> Taylor {
    let mut a = lre.clone();
    let mut b = lim.clone();
    for (i, s) in sqs.iter().enumerate() {
        a = a.add(&s.scale(th[i].cos() * phi_t[[x, i]]));
        b = b.add(&s.scale(th[i].sin() * phi_t[[x, i]]));
    }
    a.mul(&a).add(&b.mul(&b))
}

/// The `xi-eta` Hessian block table of a QHO perturbation at angle `theta`,
/// weighted by `(w_a w_b)^weight`.
pub fn qho_hessian_table(ph: &PolyHamiltonian, theta: &[f64], weight: f64) -> Vec<(u32, u32, f64)> {
    let shape = ph.shape().clone();
    let h = ph.jet.zz.eval_re(theta);
    complex_block_table(&shape, &h, weight)
}

/// Maximum over a point cloud of the level-`j` kernel diagonal.
pub fn qho_kernel_max(j: u32, points: &[[f64; 2]]) -> Result<f64> {
    let mut m = 0.0f64;
    for p in points {
        m = m.max(qho_kernel(j, *p)?);
    }
    Ok(m)
}

/// Uniform scan of `[-R, R]^2` with `R = sqrt(2 j) + 3` (the oscillator's
/// classically allowed disc plus a margin).
pub fn qho_kernel_scan(j: u32, per_axis: usize) -> Result<f64> {
    let r = (2.0 * j as f64).sqrt() + 3.0;
    let mut pts = Vec::with_capacity(per_axis * per_axis);
    for i in 0..per_axis {
        for k in 0..per_axis {
            let x = -r + 2.0 * r * i as f64 / (per_axis - 1) as f64;
            let y = -r + 2.0 * r * k as f64 / (per_axis - 1) as f64;
            pts.push([x, y]);
        }
    }
    qho_kernel_max(j, &pts)
}

/// Gram matrix defect `max |<Psi_a, Psi_b> - delta_ab|` for the modes of a clustering.
pub fn sphere_gram_defect(modes: &[ModeIndex], sq: &SphereQuad) -> f64 {
    let b = sq.basis(modes);
    let mut worst = 0.0f64;
    for a in 0..modes.len() {
        for c in 0..modes.len() {
            let mut s = 0.0;
            for x in 0..sq.len() {
                s += sq.weights[x] * b[[x, a]] * b[[x, c]];
            }
            let want = if a == c { 1.0 } else { 0.0 };
            worst = worst.max((s - want).abs());
        }
    }
    worst
}

pub fn plane_gram_defect(modes: &[ModeIndex], q: usize) -> Result<f64> {
    // products of two Hermite functions carry exp(-|x|^2): integrate with
    // the plain Gauss-Hermite rule after removing the weight
    let (y, w) = quad::gauss_hermite(q);
    let mut worst = 0.0f64;
    let mut vals = Array2::zeros((q * q, modes.len()));
    let mut wts = vec![0.0; q * q];
    for i in 0..q {
        for k in 0..q {
            let p = i * q + k;
            wts[p] = w[i] * w[k] * (y[i] * y[i] + y[k] * y[k]).exp();
            for (c, a) in modes.iter().enumerate() {
                vals[[p, c]] = qho_basis(*a, [y[i], y[k]])?;
            }
        }
    }
    for a in 0..modes.len() {
        for c in 0..modes.len() {
            let s: f64 = (0..q * q).map(|p| wts[p] * vals[[p, a]] * vals[[p, c]]).sum();
            let want = if a == c { 1.0 } else { 0.0 };
            worst = worst.max((s - want).abs());
        }
    }
    Ok(worst)
}

/// Unsold defect `max |sum_l Psi_{j,l}(x)^2 - (2j+1)/(4 pi)|` at given points.
pub fn unsold_defect(j: u32, points: &[(f64, f64)]) -> f64 {
    let mut worst = 0.0f64;
    for &(polar, az) in points {
        let p = legendre_table(j as usize, polar.cos());
        let s: f64 = (-(j as i32)..=j as i32).map(|l| real_harmonic(&p, j as usize, l, az).powi(2)).sum();
        worst = worst.max((s - (2 * j + 1) as f64 / (4.0 * PI)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_values() {
        assert!((sph_harmonic(0, 0, 0.3, 1.0).unwrap() - 0.28209479177387814).abs() < 1e-15);
        assert!((sph_harmonic(1, 0, 0.0, 0.0).unwrap() - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(sph_harmonic(1, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn unsold_small() {
        let pts = [(0.1, 0.2), (1.3, 2.0), (2.9, 5.0)];
        for j in 0..6 {
            assert!(unsold_defect(j, &pts) < 1e-13);
        }
    }

    #[test]
    fn sphere_orthonormal() {
        let model = SpectralModel::kg(1.0, 1.0, 1);
        let clus = Clustering::enumerate(&model, 4).unwrap();
        let modes: Vec<ModeIndex> = clus.modes().collect();
        assert!(sphere_gram_defect(&modes, &SphereQuad::for_weight(4)) < 1e-12);
    }

    #[test]
    fn hermite_normalized() {
        let (y, w) = quad::gauss_hermite(30);
        for i in [1u32, 3, 9] {
            let s: f64 = y.iter().zip(&w).map(|(y, w)| w * (y * y).exp() * hermite(i, *y).unwrap().powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
        assert!((hermite(1, 0.0).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
        assert!(hermite(2, 0.0).is_err());
        assert!(hermite(1, 100.0).is_err());
    }
}
