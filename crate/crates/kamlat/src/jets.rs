//! Jets `h_theta + <h_r, r> + <h_zeta, zeta> + 1/2 <h_zz zeta, zeta>`, their
//! majorant norms and Poisson brackets.

use std::sync::Arc;

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::blockmat::{self, BlockMatrix, BlockShape};
use crate::error::{KamError, Result};
use crate::fourier::{Grid, GridField, Series, Tail};
use crate::lattice;
use crate::C64;

/// Norm parameters: strip width, domain radius and regularity indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub sigma: f64,
    pub mu: f64,
    pub s: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub n: usize,
    pub shape: Arc<BlockShape>,
    pub theta: Series,
    pub r: Series,
    pub z: Series,
    pub zz: Series,
}

/// `J v` with `J = [[0, -1], [1, 0]]` on every mode.
pub fn j_vec<T: Copy + std::ops::Neg<Output = T>>(v: &[T], out: &mut [T]) {
    for m in 0..v.len() / 2 {
        out[2 * m] = -v[2 * m + 1];
        out[2 * m + 1] = v[2 * m];
    }
}

/// `J M` (row operation).
pub fn j_rows<T: Copy + std::ops::Neg<Output = T>>(m: ArrayView2<T>, mut out: ArrayViewMut2<T>) {
    for r in 0..m.nrows() / 2 {
        for c in 0..m.ncols() {
            out[[2 * r, c]] = -m[[2 * r + 1, c]];
            out[[2 * r + 1, c]] = m[[2 * r, c]];
        }
    }
}

/// The matrix J on `dim` real coordinates.
pub fn j_matrix(dim: usize) -> Array2<f64> {
    let mut j = Array2::zeros((dim, dim));
    for m in 0..dim / 2 {
        j[[2 * m, 2 * m + 1]] = -1.0;
        j[[2 * m + 1, 2 * m]] = 1.0;
    }
    j
}

pub fn j_matrix_c(dim: usize) -> Array2<C64> {
    j_matrix(dim).mapv(|x| C64::new(x, 0.0))
}

impl Jet {
    pub fn zeros(n: usize, shape: &Arc<BlockShape>) -> Self {
        let d = 2 * shape.n_modes();
        Jet {
            n,
            shape: shape.clone(),
            theta: Series::zeros(n, 1, 1),
            r: Series::zeros(n, n, 1),
            z: Series::zeros(n, d, 1),
            zz: Series::zeros(n, d, d),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.shape.n_modes()
    }

    pub fn parts(&self) -> [&Series; 4] {
        [&self.theta, &self.r, &self.z, &self.zz]
    }

    fn zip(&self, o: &Jet, f: impl Fn(&Series, &Series) -> Series) -> Jet {
        Jet {
            n: self.n,
            shape: self.shape.clone(),
            theta: f(&self.theta, &o.theta),
            r: f(&self.r, &o.r),
            z: f(&self.z, &o.z),
            zz: f(&self.zz, &o.zz),
        }
    }

    pub fn map(&self, f: impl Fn(&Series) -> Series) -> Jet {
        Jet {
            n: self.n,
            shape: self.shape.clone(),
            theta: f(&self.theta),
            r: f(&self.r),
            z: f(&self.z),
            zz: f(&self.zz),
        }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: f64) -> Jet {
        self.map(|s| s.scale_re(c))
    }

    pub fn axpy(&mut self, c: f64, o: &Jet) {
        let a = C64::new(c, 0.0);
        self.theta.axpy(a, &o.theta);
        self.r.axpy(a, &o.r);
        self.z.axpy(a, &o.z);
        self.zz.axpy(a, &o.zz);
    }

    pub fn realify(&self) -> Jet {
        self.map(|s| s.realify())
    }

    pub fn reality_defect(&self) -> f64 {
        self.parts().iter().map(|s| s.reality_defect()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.parts().iter().all(|s| s.is_zero())
    }

    pub fn truncate(&self, kmax: u32) -> (Jet, Tail) {
        let mut t = Tail::default();
        let mut cut = |s: &Series| {
            let (a, b) = s.truncate(kmax);
            t.add(b);
            a
        };
        let j = Jet {
            n: self.n,
            shape: self.shape.clone(),
            theta: cut(&self.theta),
            r: cut(&self.r),
            z: cut(&self.z),
            zz: cut(&self.zz),
        };
        (j, t)
    }

    /// Modes with `|k|_1 > kmax`.
    pub fn tail_part(&self, kmax: u32) -> Jet {
        self.map(|s| s.tail_part(kmax))
    }

    pub fn prune(&mut self, tol: f64) -> Tail {
        let mut t = Tail::default();
        t.add(self.theta.prune(tol));
        t.add(self.r.prune(tol));
        t.add(self.z.prune(tol));
        t.add(self.zz.prune(tol));
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.parts().iter().map(|s| s.max_abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, o: &Jet) -> f64 {
        self.sub(o).max_abs()
    }

    pub fn axis_degree(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n];
        for s in self.parts() {
            for (x, y) in d.iter_mut().zip(s.axis_degree()) {
                *x = (*x).max(y);
            }
        }
        d
    }

    pub fn l1_degree(&self) -> u32 {
        self.parts().iter().map(|s| s.l1_degree()).max().unwrap_or(0)
    }

    /// Sum of coefficient Frobenius norms per mode k over all components.
    pub fn mode_mass(&self) -> Series {
        let mut m = Series::zeros(self.n, 1, 1);
        for s in self.parts() {
            for (k, c) in &s.coeffs {
                let f = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                m.add_at(k, &Array2::from_elem((1, 1), C64::new(f, 0.0)));
            }
        }
        m
    }

    /// Value at a real point (real part).
    pub fn eval(&self, r: &[f64], theta: &[f64], zeta: &[f64]) -> f64 {
        let mut v = self.theta.eval(theta)[[0, 0]].re;
        let fr = self.r.eval(theta);
        for i in 0..self.n {
            v += fr[[i, 0]].re * r[i];
        }
        let fz = self.z.eval(theta);
        for (a, x) in zeta.iter().enumerate() {
            v += fz[[a, 0]].re * x;
        }
        if !self.zz.is_empty() {
            let h = self.zz.eval_re(theta);
            let z = ArrayView1::from(zeta);
            v += 0.5 * z.dot(&h.dot(&z));
        }
        v
    }

    /// Constant jet `<omega, r> + 1/2 <zeta, A zeta>`.
    pub fn normal_form(n: usize, shape: &Arc<BlockShape>, omega: &[f64], a: &BlockMatrix<f64>) -> Jet {
        let mut j = Jet::zeros(n, shape);
        let om = Array2::from_shape_fn((n, 1), |(i, _)| C64::new(omega[i], 0.0));
        j.r = Series::constant(n, om);
        if !a.blocks.is_empty() {
            j.zz = Series::constant(n, a.to_dense().mapv(|x| C64::new(x, 0.0)));
        }
        j
    }
}

fn frob_c(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// The five component majorants of a jet, in the order
/// `theta, mu^2 r, mu ||z||_s, mu |z|_beta, mu^2 |zz|_beta`, followed by
/// the two plus-regularity majorants `mu |z|_{beta+}, mu^2 |zz|_{beta+}`.
pub fn jet_components(f: &Jet, p: &NormParams) -> [f64; 7] {
    let sh = &f.shape;
    let mu = p.mu;
    let th = f.theta.majorant(p.sigma, frob_c);
    let r = f.r.majorant(p.sigma, frob_c);
    let zs = f.z.majorant(p.sigma, |c| blockmat::norm_s(sh, c.as_slice().unwrap(), p.s));
    let zb = f.z.majorant(p.sigma, |c| blockmat::norm_l(sh, c.as_slice().unwrap(), p.beta, false));
    let zbp = f.z.majorant(p.sigma, |c| blockmat::norm_l(sh, c.as_slice().unwrap(), p.beta, true));
    let hb = f.zz.majorant(p.sigma, |c| blockmat::dense_norm(sh, c.view(), 2, p.beta, false));
    let hbp = f.zz.majorant(p.sigma, |c| blockmat::dense_norm(sh, c.view(), 2, p.beta, true));
    [th, mu * mu * r, mu * zs, mu * zb, mu * mu * hb, mu * zbp, mu * mu * hbp]
}

/// `[f]^{s,beta}_{sigma,mu}` as the max of the component majorants; with
/// `plus` the plus-regularity majorants are added.
pub fn jet_norm(f: &Jet, p: &NormParams, plus: bool) -> f64 {
    let c = jet_components(f, p);
    let base = c[..5].iter().copied().fold(0.0, f64::max);
    if plus {
        base + c[5] + c[6]
    } else {
        base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketOpts {
    /// Output Fourier cap (l1).
    pub kmax: u32,
    /// Coefficients below `prune_rel` times the largest output coefficient of
    /// the same component are dropped into the tail.
    pub prune_rel: f64,
}

impl BracketOpts {
    pub fn new(kmax: u32) -> Self {
        BracketOpts { kmax, prune_rel: 1e-15 }
    }
}

fn sample_parts(grid: &Grid, s: &Series) -> GridField {
    GridField::sample(grid, s)
}

fn finish(grid: &Grid, field: &GridField, kmax: u32, exact: bool, prune_rel: f64, tail: &mut Tail) -> Series {
    let (mut s, t) = field.to_series(grid, kmax);
    if exact {
        tail.add(t);
    }
    let top = s
        .coeffs
        .values()
        .map(frob_c)
        .fold(0.0, f64::max);
    if top > 0.0 {
        tail.add(s.prune(prune_rel * top));
    }
    s
}

/// `{f, g} = grad_r f . grad_theta g - grad_theta f . grad_r g + <J grad_zeta f, grad_zeta g>`,
/// exact up to the Fourier cap.
pub fn poisson_jet(f: &Jet, g: &Jet, opts: &BracketOpts) -> Result<(Jet, Tail)> {
    if f.n != g.n || f.shape != g.shape {
        return Err(KamError::Layout("bracket of jets on different layouts".into()));
    }
    let n = f.n;
    let d = f.dim();
    let mut out = Jet::zeros(n, &f.shape);
    let mut tail = Tail::default();
    if f.is_zero() || g.is_zero() {
        return Ok((out, tail));
    }
    let (grid, exact) = Grid::for_product(n, &f.axis_degree(), &g.axis_degree(), opts.kmax);
    if !exact {
        tail.bound += crate::fourier::spill_bound(&f.mode_mass(), &g.mode_mass(), opts.kmax)
            * (1.0 + (f.l1_degree() + g.l1_degree()) as f64);
    }
    let np = grid.points();

    let fr = sample_parts(&grid, &f.r);
    let gr = sample_parts(&grid, &g.r);
    let fz = sample_parts(&grid, &f.z);
    let gz = sample_parts(&grid, &g.z);
    let dfth: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &f.theta, i)).collect();
    let dgth: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &g.theta, i)).collect();
    let dfr: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &f.r, i)).collect();
    let dgr: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &g.r, i)).collect();
    let dfz: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &f.z, i)).collect();
    let dgz: Vec<GridField> = (0..n).map(|i| GridField::sample_deriv(&grid, &g.z, i)).collect();
    let has_fzz = !f.zz.is_empty();
    let has_gzz = !g.zz.is_empty();

    // theta and r components
    let mut oth = GridField::zeros(&grid, 1, 1);
    let mut or = GridField::zeros(&grid, n, 1);
    let mut oz = GridField::zeros(&grid, d, 1);
    let mut jv = vec![0.0; d];
    for p in 0..np {
        let frp = fr.point(p);
        let grp = gr.point(p);
        let mut v = 0.0;
        for i in 0..n {
            v += frp[[i, 0]] * dgth[i].point(p)[[0, 0]] - dfth[i].point(p)[[0, 0]] * grp[[i, 0]];
        }
        let fzp = fz.data.row(p);
        let gzp = gz.data.row(p);
        j_vec(fzp.as_slice().unwrap(), &mut jv);
        v += jv.iter().zip(gzp.iter()).map(|(a, b)| a * b).sum::<f64>();
        oth.data[[p, 0]] = v;
        for jj in 0..n {
            let mut w = 0.0;
            for i in 0..n {
                w += frp[[i, 0]] * dgr[i].point(p)[[jj, 0]] - dfr[i].point(p)[[jj, 0]] * grp[[i, 0]];
            }
            or.data[[p, jj]] = w;
        }
        let mut ozp = oz.data.row_mut(p);
        for i in 0..n {
            let a = frp[[i, 0]];
            let b = grp[[i, 0]];
            let dg = dgz[i].data.row(p);
            let df = dfz[i].data.row(p);
            for t in 0..d {
                ozp[t] += a * dg[t] - b * df[t];
            }
        }
    }
    drop(dfth);
    drop(dgth);
    drop(dfr);
    drop(dgr);
    drop(dfz);
    drop(dgz);

    // zeta: - fzz J gz + gzz J fz
    let fzzf = if has_fzz { Some(sample_parts(&grid, &f.zz)) } else { None };
    let gzzf = if has_gzz { Some(sample_parts(&grid, &g.zz)) } else { None };
    let mut jw = Array1::<f64>::zeros(d);
    for p in 0..np {
        let mut ozp = oz.data.row_mut(p);
        if let Some(ff) = &fzzf {
            j_vec(gz.data.row(p).as_slice().unwrap(), jw.as_slice_mut().unwrap());
            let y = ff.point(p).dot(&jw);
            ozp -= &y;
        }
        if let Some(gf) = &gzzf {
            j_vec(fz.data.row(p).as_slice().unwrap(), jw.as_slice_mut().unwrap());
            let y = gf.point(p).dot(&jw);
            ozp += &y;
        }
    }
    out.theta = finish(&grid, &oth, opts.kmax, exact, opts.prune_rel, &mut tail);
    out.r = finish(&grid, &or, opts.kmax, exact, opts.prune_rel, &mut tail);
    out.z = finish(&grid, &oz, opts.kmax, exact, opts.prune_rel, &mut tail);
    drop(oth);
    drop(or);
    drop(oz);

    if has_fzz || has_gzz {
        let mut ozz = GridField::zeros(&grid, d, d);
        if let (Some(ff), Some(gf)) = (&fzzf, &gzzf) {
            // gzz J fzz - fzz J gzz = X + X^T with X = gzz J fzz
            let mut jf = Array2::<f64>::zeros((d, d));
            let mut x = Array2::<f64>::zeros((d, d));
            for p in 0..np {
                j_rows(ff.point(p), jf.view_mut());
                general_mat_mul(1.0, &gf.point(p), &jf, 0.0, &mut x);
                let mut o = ozz.point_mut(p);
                o.assign(&x);
                o += &x.t();
            }
        }
        drop(fzzf);
        drop(gzzf);
        for i in 0..n {
            if has_gzz {
                let dg = GridField::sample_deriv(&grid, &g.zz, i);
                for p in 0..np {
                    let a = fr.point(p)[[i, 0]];
                    if a != 0.0 {
                        ozz.point_mut(p).scaled_add(a, &dg.point(p));
                    }
                }
            }
            if has_fzz {
                let df = GridField::sample_deriv(&grid, &f.zz, i);
                for p in 0..np {
                    let b = gr.point(p)[[i, 0]];
                    if b != 0.0 {
                        ozz.point_mut(p).scaled_add(-b, &df.point(p));
                    }
                }
            }
        }
        out.zz = finish(&grid, &ozz, opts.kmax, exact, opts.prune_rel, &mut tail);
    }
    Ok((out, tail))
}

/// Bracket with a constant normal form `h = <omega, r> + 1/2 <zeta, A zeta>`
/// as the first argument, computed coefficientwise:
/// `{h, S} = omega . d_theta S + <J A zeta, grad_zeta S>`.
pub fn normal_form_bracket(omega: &[f64], a: &Array2<f64>, s: &Jet) -> Jet {
    let n = s.n;
    let d = s.dim();
    let ja: Array2<C64> = {
        let mut m = Array2::zeros((d, d));
        j_rows(a.view(), m.view_mut());
        m.mapv(|x| C64::new(x, 0.0))
    };
    let om_dot = |k: &[i32]| C64::new(0.0, lattice::dot(k, omega));
    let mut out = Jet::zeros(n, &s.shape);
    out.theta = s.theta.map(1, 1, |k, c| c.mapv(|z| z * om_dot(k)));
    out.r = s.r.map(n, 1, |k, c| c.mapv(|z| z * om_dot(k)));
    // <J A zeta, S_z> = <zeta, (J A)^T S_z> = -<zeta, A J S_z>
    let aj = ja.t().mapv(|z| z);
    out.z = s.z.map(d, 1, |k, c| {
        let mut v = c.mapv(|z| z * om_dot(k));
        v += &aj.dot(c);
        v
    });
    // <J A zeta, S_zz zeta> gives Hessian (JA)^T S + S (JA)
    out.zz = s.zz.map(d, d, |k, c| {
        let mut m = c.mapv(|z| z * om_dot(k));
        let x = aj.dot(c);
        m += &x;
        m += &x.t();
        m
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{Clustering, SpectralModel};

    fn shape() -> Arc<BlockShape> {
        BlockShape::new(&Clustering::enumerate(&SpectralModel::qho(1), 2).unwrap())
    }

    #[test]
    fn single_mode_norm() {
        let sh = shape();
        let mut f = Jet::zeros(2, &sh);
        f.theta = Series::scalar(2, &[(vec![1, 0], C64::new(1e-3, 0.0))]);
        let p = NormParams { sigma: 0.4, mu: 0.3, s: 2.0, beta: 0.25 };
        assert!((jet_norm(&f, &p, false) - 1e-3 * 0.4f64.exp()).abs() < 1e-18);
        assert!((jet_norm(&f.scale(2.0), &p, false) - 2e-3 * 0.4f64.exp()).abs() < 1e-18);
        assert_eq!(jet_norm(&Jet::zeros(2, &sh), &p, true), 0.0);
    }

    #[test]
    fn r_against_scalar() {
        let sh = shape();
        let mut f = Jet::zeros(2, &sh);
        let mut e1 = Array2::zeros((2, 1));
        e1[[0, 0]] = C64::new(1.0, 0.0);
        f.r = Series::constant(2, e1);
        let mut g = Jet::zeros(2, &sh);
        g.theta = Series::scalar(2, &[(vec![1, 0], C64::new(0.0, -0.5)), (vec![-1, 0], C64::new(0.0, 0.5))]);
        let (b, _) = poisson_jet(&f, &g, &BracketOpts::new(4)).unwrap();
        let want = g.theta.deriv(0);
        assert!(b.theta.max_abs_diff(&want) < 1e-15);
        assert!(b.r.is_empty() && b.z.is_empty() && b.zz.is_empty());
    }
}
