//! Homological equation `{h, S} + f^T = h_hat + R` for a normal form `h`.

use std::sync::Arc;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::blockmat::{BlockMatrix, BlockShape};
use crate::eig;
use crate::error::{KamError, Result};
use crate::fourier::Series;
use crate::jets::{j_rows, Jet};
use crate::lattice;
use crate::modes::{self, AdmissibleSet, Clustering, ExclusionReport, Family, SpectralModel};
use crate::C64;

/// `h = <omega, r> + 1/2 <zeta, A zeta>` with `A` on normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormHam {
    pub omega: Vec<f64>,
    pub a: BlockMatrix<f64>,
    /// Unperturbed eigenvalue of each level.
    pub lambda: Vec<f64>,
}

impl NormalFormHam {
    pub fn from_model(model: &SpectralModel, adm: &AdmissibleSet, clus: &Clustering, rho: &[f64]) -> Result<Self> {
        if rho.len() != adm.n() {
            return Err(KamError::Config(format!("rho has {} entries, expected {}", rho.len(), adm.n())));
        }
        let mut omega = Vec::with_capacity(adm.n());
        for a in &adm.modes {
            omega.push(modes::eigenvalue(model, adm, *a, rho, true)?);
        }
        let shape = BlockShape::new(clus);
        let lambda: Vec<f64> = clus.levels.iter().map(|l| model.normal_eigenvalue(l.w)).collect();
        let mut a = BlockMatrix::zeros(&shape, 2);
        for (l, lam) in lambda.iter().enumerate() {
            a.set_block(l, l, Array2::eye(2 * shape.sizes[l]) * *lam)?;
        }
        a.symmetric = true;
        Ok(NormalFormHam { omega, a, lambda })
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn shape(&self) -> &Arc<BlockShape> {
        &self.a.shape
    }

    pub fn jet(&self) -> Jet {
        Jet::normal_form(self.n(), self.shape(), &self.omega, &self.a)
    }

    pub fn eval(&self, r: &[f64], zeta: &[f64]) -> f64 {
        let mut v: f64 = self.omega.iter().zip(r).map(|(a, b)| a * b).sum();
        let sh = self.shape();
        for (&(a, b), m) in &self.a.blocks {
            let za = &zeta[sh.range(a, 2)];
            let zb = &zeta[sh.range(b, 2)];
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    v += 0.5 * za[i] * m[[i, j]] * zb[j];
                }
            }
        }
        v
    }

    /// `h + h_hat` without the constant.
    pub fn corrected(&self, hhat: &NormalFormCorrection) -> Result<Self> {
        Ok(NormalFormHam {
            omega: self.omega.iter().zip(&hhat.chi).map(|(a, b)| a + b).collect(),
            a: self.a.add(&hhat.b)?,
            lambda: self.lambda.clone(),
        })
    }

    /// Eigenframes of `A J` per level.
    pub fn frames(&self) -> Result<Vec<LevelFrame>> {
        let q = self.a.to_q();
        let sh = self.shape();
        (0..sh.n_levels())
            .map(|l| {
                let mut qb = q.block(l, l);
                let h = (&qb + &qb.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
                qb.assign(&h);
                LevelFrame::new(&qb)
            })
            .collect()
    }

    /// Eigenvalues of each level's `Q` block.
    pub fn spectrum(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.frames()?.into_iter().map(|f| f.d).collect())
    }
}

/// Diagonalizing frame of `A_a J` on one level: columns `d` of the form
/// `conj(P e_i) (x) (1, -i) / sqrt 2` with eigenvalue `+i d_i`, then
/// `P e_i (x) (1, i) / sqrt 2` with `-i d_i`, where `Q = P D P*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFrame {
    pub d: Vec<f64>,
    pub v: Array2<C64>,
    /// Signed frequencies `nu` with eigenvalue `i nu`.
    pub nu: Vec<f64>,
}

impl LevelFrame {
    pub fn new(q: &Array2<C64>) -> Result<Self> {
        let m = q.nrows();
        let (d, p) = eig::hermitian_eig(q)?;
        let h = 1.0 / 2f64.sqrt();
        let mut v = Array2::zeros((2 * m, 2 * m));
        let i = C64::new(0.0, 1.0);
        for c in 0..m {
            for r in 0..m {
                let pc = p[[r, c]];
                v[[2 * r, c]] = pc.conj() * h;
                v[[2 * r + 1, c]] = -i * pc.conj() * h;
                v[[2 * r, m + c]] = pc * h;
                v[[2 * r + 1, m + c]] = i * pc * h;
            }
        }
        let mut nu = d.clone();
        nu.extend(d.iter().map(|x| -x));
        Ok(LevelFrame { d, v, nu })
    }

    fn plus(&self, i: usize) -> bool {
        i < self.d.len()
    }
}

/// Normal-form correction `c + <chi, r> + 1/2 <zeta, B zeta>`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormCorrection {
    pub c: f64,
    pub chi: Vec<f64>,
    pub b: BlockMatrix<f64>,
}

impl NormalFormCorrection {
    pub fn jet(&self, n: usize) -> Jet {
        let mut j = Jet::normal_form(n, &self.b.shape, &self.chi, &self.b);
        j.theta = Series::constant(n, Array2::from_elem((1, 1), C64::new(self.c, 0.0)));
        j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAudit {
    pub family: String,
    /// `min |divisor| / weight` over the divisors used.
    pub min_divisor: f64,
    pub k: Vec<i32>,
    pub a: u32,
    pub b: u32,
    pub excluded: bool,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorAudit {
    pub kappa: f64,
    pub n_trunc: u32,
    pub families: Vec<FamilyAudit>,
}

impl DivisorAudit {
    pub fn new(kappa: f64, n_trunc: u32) -> Self {
        DivisorAudit {
            kappa,
            n_trunc,
            families: Family::ALL
                .iter()
                .map(|f| FamilyAudit {
                    family: f.name().to_string(),
                    min_divisor: f64::INFINITY,
                    k: Vec::new(),
                    a: 0,
                    b: 0,
                    excluded: false,
                    count: 0,
                })
                .collect(),
        }
    }

    fn record(&mut self, fam: Family, k: &[i32], a: u32, b: u32, div: f64, weight: f64) {
        let idx = Family::ALL.iter().position(|f| *f == fam).unwrap();
        let e = &mut self.families[idx];
        let x = div.abs() / weight;
        e.count += 1;
        if x < e.min_divisor {
            e.min_divisor = x;
            e.k = k.to_vec();
            e.a = a;
            e.b = b;
        }
        if x < self.kappa {
            e.excluded = true;
        }
    }

    pub fn excluded(&self) -> bool {
        self.families.iter().any(|f| f.excluded)
    }

    pub fn merge(&mut self, o: &DivisorAudit) {
        for (a, b) in self.families.iter_mut().zip(&o.families) {
            a.count += b.count;
            a.excluded |= b.excluded;
            if b.min_divisor < a.min_divisor {
                a.min_divisor = b.min_divisor;
                a.k = b.k.clone();
                a.a = b.a;
                a.b = b.b;
            }
        }
    }

    pub fn family(&self, f: Family) -> &FamilyAudit {
        &self.families[Family::ALL.iter().position(|g| *g == f).unwrap()]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoOpts {
    pub kappa: f64,
    pub n_trunc: u32,
    /// Norm index for the regularization report.
    pub s: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomoSolution {
    pub s: Jet,
    pub hhat: NormalFormCorrection,
    pub r: Jet,
    pub audit: DivisorAudit,
    /// `N_sigma(||S_z||_{s+1}) / N_sigma(||f_z||_s)`, and `1 / kappa`.
    pub gain: f64,
    pub gain_bound: f64,
}

fn zero_divisor(k: &[i32]) -> KamError {
    KamError::ZeroDivisor { k: k.to_vec() }
}

const TINY: f64 = 1e-300;

/// `omega . grad phi = psi - tail` with `phi_hat(k) = -i psi_hat(k) / <k, omega>`
/// on `0 < |k|_1 <= N`. Returns `(phi, R)` with `R = -tail`; the mean of
/// `psi` is ignored.
pub fn solve_scalar(psi: &Series, omega: &[f64], opts: &HomoOpts, audit: &mut DivisorAudit) -> Result<(Series, Series)> {
    let mut phi = Series::zeros(psi.n, psi.rows, psi.cols);
    let mut r = Series::zeros(psi.n, psi.rows, psi.cols);
    for (k, c) in &psi.coeffs {
        if lattice::l1(k) > opts.n_trunc {
            r.add_at(k, &c.mapv(|z| -z));
            continue;
        }
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        let x = lattice::dot(k, omega);
        if x.abs() < TINY {
            return Err(zero_divisor(k));
        }
        audit.record(Family::Zeroth, k, 0, 0, x, 1.0);
        let f = C64::new(0.0, -1.0 / x);
        phi.add_at(k, &c.mapv(|z| z * f));
    }
    Ok((phi, r))
}

/// `(i <k, omega> - A J) S_z = -F_z` on `|k|_1 <= N`; returns `(S_z, R_z)`
/// with `R_z` the tail of `F_z`.
pub fn solve_linear(fz: &Series, h: &NormalFormHam, frames: &[LevelFrame], opts: &HomoOpts, audit: &mut DivisorAudit) -> Result<(Series, Series)> {
    let sh = h.shape().clone();
    let d = fz.rows;
    let mut out = Series::zeros(fz.n, d, 1);
    let mut r = Series::zeros(fz.n, d, 1);
    for (k, c) in &fz.coeffs {
        if lattice::l1(k) > opts.n_trunc {
            r.add_at(k, c);
            continue;
        }
        let x = lattice::dot(k, &h.omega);
        let mut sk = Array2::zeros((d, 1));
        for (l, fr) in frames.iter().enumerate() {
            let rg = sh.range(l, 2);
            let rhs = c.slice(s![rg.clone(), 0]);
            if rhs.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            // X = V* (-F) / (i (x - nu))
            let y: ndarray::Array1<C64> = fr.v.t().mapv(|z| z.conj()).dot(&rhs);
            let mut xv = y.clone();
            for (i, nu) in fr.nu.iter().enumerate() {
                let div = x - nu;
                if div.abs() < TINY {
                    return Err(zero_divisor(k));
                }
                audit.record(Family::First, k, sh.level_w[l], sh.level_w[l], div, sh.weights[l]);
                xv[i] = -y[i] / C64::new(0.0, div);
            }
            let sl: ndarray::Array1<C64> = fr.v.dot(&xv);
            sk.slice_mut(s![rg, 0]).assign(&sl);
        }
        out.add_at(k, &sk);
    }
    Ok((out.realify(), r))
}

/// `i <k, omega> S - A J S + S J A + F = B delta_k0 + R` on `|k|_1 <= N`.
pub fn solve_quadratic(
    fzz: &Series,
    h: &NormalFormHam,
    frames: &[LevelFrame],
    opts: &HomoOpts,
    audit: &mut DivisorAudit,
) -> Result<(Series, BlockMatrix<f64>, Series)> {
    let sh = h.shape().clone();
    let d = fzz.rows;
    let nl = sh.n_levels();
    let mut out = Series::zeros(fzz.n, d, d);
    let mut r = Series::zeros(fzz.n, d, d);
    let zero = vec![0i32; fzz.n];
    let f0 = fzz.coeff(&zero).mapv(|z| z.re);
    let b = BlockMatrix::from_dense(&sh, 2, f0.view())?.nf_project();
    let bd = b.to_dense();
    let vh: Vec<Array2<C64>> = frames.iter().map(|f| f.v.t().mapv(|z| z.conj())).collect();
    let vc: Vec<Array2<C64>> = frames.iter().map(|f| f.v.mapv(|z| z.conj())).collect();
    let vt: Vec<Array2<C64>> = frames.iter().map(|f| f.v.t().to_owned()).collect();
    for (k, c) in &fzz.coeffs {
        if lattice::l1(k) > opts.n_trunc {
            r.add_at(k, c);
            continue;
        }
        let is0 = k.iter().all(|&v| v == 0);
        let x = lattice::dot(k, &h.omega);
        let mut sk = Array2::<C64>::zeros((d, d));
        for a in 0..nl {
            for bl in a..nl {
                let (ra, rb) = (sh.range(a, 2), sh.range(bl, 2));
                let mut rhs = c.slice(s![ra.clone(), rb.clone()]).mapv(|z| -z);
                if is0 && a == bl {
                    let bb = bd.slice(s![ra.clone(), rb.clone()]);
                    rhs.zip_mut_with(&bb, |z, w| *z += C64::new(*w, 0.0));
                }
                if rhs.iter().all(|z| z.norm_sqr() == 0.0) {
                    continue;
                }
                let y = vh[a].dot(&rhs).dot(&vc[bl]);
                let (fa, fb) = (&frames[a], &frames[bl]);
                let mut xm = Array2::<C64>::zeros(y.raw_dim());
                let (wa, wb) = (sh.weights[a], sh.weights[bl]);
                let (la, lb) = (sh.level_w[a], sh.level_w[bl]);
                for i in 0..fa.nu.len() {
                    for j in 0..fb.nu.len() {
                        let same_sign = fa.plus(i) == fb.plus(j);
                        if is0 && a == bl && !same_sign {
                            continue;
                        }
                        let div = x - fa.nu[i] - fb.nu[j];
                        if div.abs() < TINY {
                            return Err(zero_divisor(k));
                        }
                        if same_sign {
                            audit.record(Family::Sum, k, la, lb, div, wa + wb);
                        } else {
                            audit.record(Family::Diff, k, la, lb, div, 1.0 + (wa - wb).abs());
                        }
                        xm[[i, j]] = y[[i, j]] / C64::new(0.0, div);
                    }
                }
                let sab = frames[a].v.dot(&xm).dot(&vt[bl]);
                if a == bl {
                    let sym = (&sab + &sab.t()).mapv(|z| z * 0.5);
                    sk.slice_mut(s![ra, rb]).assign(&sym);
                } else {
                    sk.slice_mut(s![ra.clone(), rb.clone()]).assign(&sab);
                    sk.slice_mut(s![rb, ra]).assign(&sab.t());
                }
            }
        }
        out.add_at(k, &sk);
    }
    let mut b = b;
    b.symmetric = true;
    Ok((out.realify(), b, r))
}

/// `{h, S}` for a normal form `h`, computed blockwise.
pub fn nf_bracket(h: &NormalFormHam, s: &Jet) -> Jet {
    let n = s.n;
    let d = s.dim();
    let sh = h.shape();
    // M = A J per level, so that the bracket reads i k.omega S - M S_z, ...
    let mut ms = Vec::new();
    for l in 0..sh.n_levels() {
        let a = h.a.block(l, l);
        let mut ja = Array2::zeros(a.raw_dim());
        j_rows(a.view(), ja.view_mut());
        // (J A)^T = -A J
        ms.push(ja.t().mapv(|x| C64::new(x, 0.0)));
    }
    let om = |k: &[i32]| C64::new(0.0, lattice::dot(k, &h.omega));
    let apply = |c: &Array2<C64>| {
        let mut x = Array2::zeros(c.raw_dim());
        for (l, m) in ms.iter().enumerate() {
            let rg = sh.range(l, 2);
            let blk = m.dot(&c.slice(s![rg.clone(), ..]));
            x.slice_mut(s![rg, ..]).assign(&blk);
        }
        x
    };
    let mut out = Jet::zeros(n, &s.shape);
    out.theta = s.theta.map(1, 1, |k, c| c.mapv(|z| z * om(k)));
    out.r = s.r.map(n, 1, |k, c| c.mapv(|z| z * om(k)));
    out.z = s.z.map(d, 1, |k, c| {
        let mut v = c.mapv(|z| z * om(k));
        v += &apply(c);
        v
    });
    out.zz = s.zz.map(d, d, |k, c| {
        let mut m = c.mapv(|z| z * om(k));
        let x = apply(c);
        m += &x;
        m += &x.t();
        m
    });
    out
}

fn mean_of(s: &Series) -> Array2<C64> {
    s.coeff(&vec![0; s.n])
}

fn drop_mean(s: &Series) -> Series {
    let mut o = s.clone();
    o.coeffs.remove(&vec![0; s.n]);
    o
}

/// Solves `{h, S} + f^T = h_hat + R` with `h_hat = [f_theta] + [f_r] . r + 1/2 <zeta, B zeta>`.
pub fn solve_homological(f: &Jet, h: &NormalFormHam, opts: &HomoOpts) -> Result<HomoSolution> {
    let n = f.n;
    let frames = h.frames()?;
    let mut audit = DivisorAudit::new(opts.kappa, opts.n_trunc);
    let c = mean_of(&f.theta)[[0, 0]].re;
    let chi: Vec<f64> = {
        let m = mean_of(&f.r);
        (0..n).map(|i| if m.nrows() > i { m[[i, 0]].re } else { 0.0 }).collect()
    };
    let neg = C64::new(-1.0, 0.0);
    let (st, rt) = solve_scalar(&drop_mean(&f.theta).scale(neg), &h.omega, opts, &mut audit)?;
    let (sr, rr) = solve_scalar(&drop_mean(&f.r).scale(neg), &h.omega, opts, &mut audit)?;
    let (sz, rz) = solve_linear(&f.z, h, &frames, opts, &mut audit)?;
    let (szz, b, rzz) = solve_quadratic(&f.zz, h, &frames, opts, &mut audit)?;
    let mut sj = Jet::zeros(n, &f.shape);
    sj.theta = st.realify();
    sj.r = sr.realify();
    sj.z = sz;
    sj.zz = szz;
    let mut rj = Jet::zeros(n, &f.shape);
    rj.theta = rt;
    rj.r = rr;
    rj.z = rz;
    rj.zz = rzz;
    let sh = f.shape.clone();
    let nz = |s: &Series, idx: f64| s.majorant(opts.sigma, |c| crate::blockmat::norm_s(&sh, c.as_slice().unwrap(), idx));
    let fz = nz(&f.z.truncate(opts.n_trunc).0, opts.s);
    let gain = if fz > 0.0 { nz(&sj.z, opts.s + 1.0) / fz } else { 0.0 };
    Ok(HomoSolution {
        s: sj,
        hhat: NormalFormCorrection { c, chi, b },
        r: rj,
        audit,
        gain,
        gain_bound: 1.0 / opts.kappa,
    })
}

/// `{h, S} + f - h_hat - R` on the solution.
pub fn residual(f: &Jet, h: &NormalFormHam, sol: &HomoSolution) -> Jet {
    nf_bracket(h, &sol.s).add(f).sub(&sol.hhat.jet(f.n)).sub(&sol.r)
}

/// Every divisor of the four families for `0 < |k|_1 <= N` (and `k = 0`
/// across distinct levels) at one normal form.
pub fn full_audit(h: &NormalFormHam, kappa: f64, n_trunc: u32) -> Result<DivisorAudit> {
    let frames = h.frames()?;
    Ok(full_audit_frames(h, &frames, kappa, n_trunc, &Family::ALL))
}

fn full_audit_frames(h: &NormalFormHam, frames: &[LevelFrame], kappa: f64, n_trunc: u32, fams: &[Family]) -> DivisorAudit {
    let sh = h.shape();
    let mut audit = DivisorAudit::new(kappa, n_trunc);
    let ks = lattice::l1_ball(h.n(), n_trunc);
    for k in &ks {
        let zero = k.iter().all(|&v| v == 0);
        let x = lattice::dot(k, &h.omega);
        if !zero && fams.contains(&Family::Zeroth) {
            audit.record(Family::Zeroth, k, 0, 0, x, 1.0);
        }
        for a in 0..sh.n_levels() {
            let fa = &frames[a];
            if fams.contains(&Family::First) {
                for nu in &fa.nu {
                    audit.record(Family::First, k, sh.level_w[a], sh.level_w[a], x - nu, sh.weights[a]);
                }
            }
            for b in a..sh.n_levels() {
                let fb = &frames[b];
                for i in 0..fa.d.len() {
                    for j in 0..fb.d.len() {
                        if fams.contains(&Family::Sum) {
                            let w = sh.weights[a] + sh.weights[b];
                            audit.record(Family::Sum, k, sh.level_w[a], sh.level_w[b], x + fa.d[i] + fb.d[j], w);
                            audit.record(Family::Sum, k, sh.level_w[a], sh.level_w[b], x - fa.d[i] - fb.d[j], w);
                        }
                        if fams.contains(&Family::Diff) && !(zero && a == b) {
                            let w = 1.0 + (sh.weights[a] - sh.weights[b]).abs();
                            audit.record(Family::Diff, k, sh.level_w[a], sh.level_w[b], x + fa.d[i] - fb.d[j], w);
                            audit.record(Family::Diff, k, sh.level_w[a], sh.level_w[b], x - fa.d[i] + fb.d[j], w);
                        }
                    }
                }
            }
        }
    }
    audit
}

/// Monte-Carlo fraction of the parameter box where some divisor of the
/// requested families is below threshold, for `h(rho)`.
pub fn measure_exclusion(
    model: &SpectralModel,
    family: &dyn Fn(&[f64]) -> Result<NormalFormHam>,
    kappa: f64,
    n_trunc: u32,
    samples: usize,
    seed: u64,
    fams: &[Family],
) -> Result<ExclusionReport> {
    use rand::{Rng, SeedableRng};
    let (lo, hi) = model.param_box();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0usize; 4];
    let mut any = 0usize;
    let mut rho = vec![0.0; model.p];
    for _ in 0..samples {
        for r in rho.iter_mut() {
            *r = lo + (hi - lo) * rng.random::<f64>();
        }
        if kappa <= 0.0 {
            continue;
        }
        let h = family(&rho)?;
        let frames = h.frames()?;
        let audit = full_audit_frames(&h, &frames, kappa, n_trunc, fams);
        let mut hit = false;
        for (i, f) in Family::ALL.iter().enumerate() {
            if audit.family(*f).excluded {
                counts[i] += 1;
                hit = true;
            }
        }
        if hit {
            any += 1;
        }
    }
    let m = samples.max(1) as f64;
    Ok(ExclusionReport {
        samples,
        kappa,
        n_trunc,
        seed,
        family_fractions: counts.iter().map(|&c| c as f64 / m).collect(),
        fraction: any as f64 / m,
    })
}

/// Exclusion fractions over a `kappa` grid and the log-log slope.
pub fn exclusion_sweep(
    model: &SpectralModel,
    family: &dyn Fn(&[f64]) -> Result<NormalFormHam>,
    kappas: &[f64],
    n_trunc: u32,
    samples: usize,
    seed: u64,
    fams: &[Family],
) -> Result<(Vec<ExclusionReport>, Option<f64>)> {
    let reps: Vec<ExclusionReport> = kappas
        .iter()
        .map(|&k| measure_exclusion(model, family, k, n_trunc, samples, seed, fams))
        .collect::<Result<_>>()?;
    let fr: Vec<f64> = reps.iter().map(|r| r.fraction).collect();
    Ok((reps, modes::log_slope(kappas, &fr)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::ModeIndex;

    fn kg_h(w: u32) -> NormalFormHam {
        let model = SpectralModel::kg(1.0, 1.0, 2);
        let adm = AdmissibleSet::new(&model, vec![ModeIndex::new(1, 0), ModeIndex::new(2, 1)], vec![1.0, 1.5]).unwrap();
        let clus = Clustering::enumerate(&model, w).unwrap().without(&adm.modes);
        NormalFormHam::from_model(&model, &adm, &clus, &[1.3, 1.7]).unwrap()
    }

    fn opts() -> HomoOpts {
        HomoOpts { kappa: 1e-6, n_trunc: 4, s: 2.0, sigma: 0.1 }
    }

    #[test]
    fn scalar_formula() {
        let psi = Series::scalar(2, &[(vec![1, 0], C64::new(1.0, 0.0))]);
        let mut au = DivisorAudit::new(0.0, 3);
        let (phi, r) = solve_scalar(&psi, &[1.0, 2f64.sqrt()], &opts(), &mut au).unwrap();
        assert!((phi.coeff(&[1, 0])[[0, 0]] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(r.is_empty());
    }

    #[test]
    fn one_mode_linear_at_zero() {
        let h = kg_h(1);
        let d = 2 * h.shape().n_modes();
        let mut fz = Array2::zeros((d, 1));
        fz[[0, 0]] = C64::new(1.0, 0.0);
        let frames = h.frames().unwrap();
        let mut au = DivisorAudit::new(0.0, 3);
        let (sz, _) = solve_linear(&Series::constant(2, fz), &h, &frames, &opts(), &mut au).unwrap();
        // -A J S = -F: S = (A J)^{-1} F = -J F / lambda
        let lam = h.lambda[0];
        let s0 = sz.coeff(&[0, 0]);
        assert!((s0[[0, 0]].re).abs() < 1e-14);
        assert!((s0[[1, 0]].re + 1.0 / lam).abs() < 1e-14);
    }

    #[test]
    fn blockwise_matches_dense() {
        let h = kg_h(3);
        let d = 2 * h.shape().n_modes();
        let mut s = Jet::zeros(2, h.shape());
        let zz = Array2::from_shape_fn((d, d), |(i, j)| C64::new(((i * 7 + j * 3) % 5) as f64 + ((j * 7 + i * 3) % 5) as f64, 0.0));
        s.zz = Series::constant(2, zz.clone());
        s.zz.add_at(&[1, -1], &zz.mapv(|z| z * 0.5));
        s.z = Series::constant(2, Array2::from_shape_fn((d, 1), |(i, _)| C64::new(i as f64, 0.0)));
        let a = crate::jets::normal_form_bracket(&h.omega, &h.a.to_dense(), &s);
        let b = nf_bracket(&h, &s);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}
