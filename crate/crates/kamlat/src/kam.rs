//! The KAM step, its parameter schedule and the iteration driver.
//!
//! One step solves `{h, S} + f^T = h_hat + R` and replaces `h + f` by
//! `(h + f) o Phi_S = h + h_hat + f+` with
//!
//! ```text
//! f+ = R + (f - f^T) o Phi + int_0^1 {(1 - t)(h_hat + R) + t f^T, S} o Phi^t dt.
//! ```
//!
//! The jet part of `f+` is exact up to the Fourier cap. The higher-order
//! terms of `f` are kept frozen and enter through their first-order jet
//! lowering only.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::blockmat::norm_s;
use crate::error::{KamError, Result};
use crate::flows::{factorial, lie_sums, FlowMap, FlowOpts, LieOpts};
use crate::fourier::Tail;
use crate::homo::{solve_homological, DivisorAudit, HomoOpts, NormalFormHam};
use crate::jets::{jet_norm, poisson_jet, BracketOpts, Jet, NormParams};
use crate::poly::PolyHamiltonian;
use crate::quad::gauss_legendre_on;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy {
    /// `mu_j = eps_{j-1}^{2/5} mu_0`.
    Power,
    /// `mu_j = mu_0`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaPolicy {
    /// `kappa_j = eps_j^{1/64}`.
    Power,
    /// `kappa_j = kappa_0`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KamConfig {
    pub eps: f64,
    pub sigma0: f64,
    pub mu0: f64,
    pub s: f64,
    pub beta: f64,
    pub k_max: u32,
    pub j_max: usize,
    /// Stop once `eps_j <= tol`.
    pub tol: f64,
    /// Defaults to `eps^{1/3}`.
    pub kappa0: Option<f64>,
    pub kappa_policy: KappaPolicy,
    pub mu_policy: MuPolicy,
    /// Gauss-Legendre nodes for the t-integral.
    pub gl_nodes: usize,
    pub lie_max_terms: usize,
    pub residual_points: usize,
    pub seed: u64,
    /// Constant of the predictor.
    pub c_pred: f64,
    /// Abort when the generator smallness fails instead of reporting it.
    pub strict_smallness: bool,
}

impl KamConfig {
    pub fn new(eps: f64) -> Self {
        KamConfig {
            eps,
            sigma0: 0.5,
            mu0: 0.5,
            s: 2.0,
            beta: 0.25,
            k_max: 12,
            j_max: 4,
            tol: 0.0,
            kappa0: None,
            kappa_policy: KappaPolicy::Constant,
            mu_policy: MuPolicy::Power,
            gl_nodes: 8,
            lie_max_terms: 60,
            residual_points: 32,
            seed: 0,
            c_pred: 1.0,
            strict_smallness: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eps0: f64,
    pub delta0: f64,
    pub kappa0: f64,
    pub sigma0: f64,
    pub mu0: f64,
    pub c_star: f64,
    pub n: usize,
    pub k_max: u32,
    pub mu_policy: MuPolicy,
    pub kappa_policy: KappaPolicy,
}

impl Schedule {
    pub fn new(cfg: &KamConfig, n: usize) -> Self {
        let basel: f64 = std::f64::consts::PI.powi(2) / 6.0;
        Schedule {
            eps0: cfg.eps,
            delta0: cfg.eps.powf(0.25),
            kappa0: cfg.kappa0.unwrap_or(cfg.eps.powf(1.0 / 3.0)),
            sigma0: cfg.sigma0,
            mu0: cfg.mu0,
            c_star: 1.0 / (2.0 * basel),
            n,
            k_max: cfg.k_max,
            mu_policy: cfg.mu_policy,
            kappa_policy: cfg.kappa_policy,
        }
    }

    /// `sigma_j` with `sigma_{j-1} - sigma_j = C* sigma_0 j^{-2}`.
    pub fn sigma(&self, j: usize) -> f64 {
        let s: f64 = (1..=j).map(|i| 1.0 / (i * i) as f64).sum();
        self.sigma0 * (1.0 - self.c_star * s)
    }

    /// `mu_j` given `eps_{j-1}`.
    pub fn mu(&self, j: usize, eps_prev: f64) -> f64 {
        if j == 0 || self.mu_policy == MuPolicy::Constant {
            self.mu0
        } else {
            eps_prev.powf(0.4) * self.mu0
        }
    }

    /// Truncation of step `j -> j + 1`: `(sigma_j - sigma_{j+1})^{-1} ln(1/eps_j)`,
    /// capped at `K_max`.
    pub fn n_trunc(&self, j: usize, eps: f64) -> u32 {
        let ds = self.sigma(j) - self.sigma(j + 1);
        let raw = if eps > 0.0 { (1.0 / eps).ln() / ds } else { f64::INFINITY };
        (raw.floor().max(1.0) as u64).min(self.k_max as u64) as u32
    }

    /// Uncapped truncation from the formula.
    pub fn n_formula(&self, j: usize, eps: f64) -> f64 {
        (1.0 / eps).ln() / (self.sigma(j) - self.sigma(j + 1))
    }

    pub fn kappa(&self, eps: f64) -> f64 {
        match self.kappa_policy {
            KappaPolicy::Power => eps.powf(1.0 / 64.0),
            KappaPolicy::Constant => self.kappa0,
        }
    }
}

/// The predictor
/// `C (eps_j (j+1)^{2n} sigma_0^{-n} / 2 + (eps_j / eps_{j-1})^{6/5}
///  + (j+1)^{2(n+1)} sigma_0^{-n-1} mu_0^{-2} eps_j^{1/5 - 1/32}) eps_j`.
pub fn predicted_epsilon(eps_prev: f64, eps: f64, sched: &Schedule, j: usize, c: f64) -> f64 {
    if eps == 0.0 {
        return 0.0;
    }
    let n = sched.n as i32;
    let jp = (j + 1) as f64;
    let s0 = sched.sigma0;
    let a = 0.5 * eps * jp.powi(2 * n) * s0.powi(-n);
    let b = (eps / eps_prev).powf(1.2);
    let e = jp.powi(2 * (n + 1)) * s0.powi(-n - 1) * sched.mu0.powi(-2) * eps.powf(0.2 - 1.0 / 32.0);
    c * (a + b + e) * eps
}

/// `eps_0^{(7/6)^j}`.
pub fn contraction_bound(eps0: f64, j: i32) -> f64 {
    eps0.powf((7.0f64 / 6.0).powi(j))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub step: usize,
    pub s_norm: f64,
    pub displacement: f64,
    pub lie_terms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KamState {
    pub j: usize,
    pub h: NormalFormHam,
    pub f: PolyHamiltonian,
    pub eps: f64,
    pub eps_prev: f64,
    pub mu: f64,
    pub flows: Vec<FlowSummary>,
    pub exclusions: Vec<DivisorAudit>,
}

impl KamState {
    pub fn new(h: NormalFormHam, f: PolyHamiltonian, sched: &Schedule, beta: f64, s: f64) -> Self {
        let p = NormParams { sigma: sched.sigma(0), mu: sched.mu0, s, beta };
        let eps = jet_norm(&f.jet, &p, false);
        KamState { j: 0, h, f, eps, eps_prev: f64::NAN, mu: sched.mu0, flows: Vec::new(), exclusions: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub j: usize,
    pub kappa: f64,
    pub n_trunc: u32,
    pub n_formula: f64,
    pub sigma: f64,
    pub sigma_next: f64,
    pub mu: f64,
    pub mu_next: f64,
    pub eps: f64,
    pub eps_next: f64,
    pub predicted: Option<f64>,
    pub prediction_ok: bool,
    pub excluded: bool,
    pub min_divisor: f64,
    pub s_norm: f64,
    pub smallness_bound: f64,
    pub smallness_ok: bool,
    pub lie_terms: Vec<usize>,
    pub tail: Tail,
    pub conj_residual: f64,
    pub conj_budget: f64,
    pub conj_ok: bool,
    pub full_residual: f64,
    pub phi_disp: f64,
    pub omega_drift: f64,
    pub a_drift: f64,
    pub normal_form_ok: bool,
}

/// Weights `int_0^1 t^m (1 - t) dt / m!` and `int_0^1 t^{m+1} dt / m!` by
/// Gauss-Legendre quadrature.
pub fn t_weights(m: usize, nodes: usize) -> (f64, f64) {
    let (x, w) = gauss_legendre_on(nodes, 0.0, 1.0);
    let f = factorial(m);
    let a: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(m as i32) * (1.0 - t)).sum();
    let b: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(m as i32 + 1)).sum();
    (a / f, b / f)
}

type Point = (Vec<f64>, Vec<f64>, Vec<f64>);

fn sample_points(rng: &mut rand_chacha::ChaCha8Rng, h: &NormalFormHam, mu: f64, s: f64, count: usize) -> Vec<Point> {
    let n = h.n();
    let sh = h.shape();
    let d = 2 * sh.n_modes();
    (0..count)
        .map(|_| {
            let r: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * mu * mu).collect();
            let th: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            let mut z: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let nz = norm_s(sh, &z, s);
            let scale = if nz > 0.0 { mu * rng.random::<f64>() / nz } else { 0.0 };
            z.iter_mut().for_each(|v| *v *= scale);
            (r, th, z)
        })
        .collect()
}

/// One KAM step. Exclusion is reported, not raised; on exclusion the
/// returned state is the input state.
pub fn kam_step(state: &KamState, sched: &Schedule, cfg: &KamConfig, h0: &NormalFormHam) -> Result<(KamState, StepReport)> {
    let j = state.j;
    let eps = state.eps;
    let sigma = sched.sigma(j);
    let sigma_next = sched.sigma(j + 1);
    let mu = state.mu;
    let mu_next = sched.mu(j + 1, eps);
    let kappa = sched.kappa(eps);
    let n_trunc = sched.n_trunc(j, eps);
    let p = NormParams { sigma, mu, s: cfg.s, beta: cfg.beta };
    let p_next = NormParams { sigma: sigma_next, mu: mu_next, ..p };
    let mut rep = StepReport {
        j,
        kappa,
        n_trunc,
        n_formula: sched.n_formula(j, eps),
        sigma,
        sigma_next,
        mu,
        mu_next,
        eps,
        smallness_bound: mu * mu * (sigma - sigma_next) / 16.0,
        min_divisor: f64::INFINITY,
        ..Default::default()
    };
    let mut next = state.clone();
    next.j = j + 1;
    next.eps_prev = eps;
    next.mu = mu_next;
    let ft = &state.f.jet;
    if ft.is_zero() {
        rep.smallness_ok = true;
        rep.conj_ok = true;
        rep.prediction_ok = true;
        rep.normal_form_ok = true;
        rep.omega_drift = drift(&state.h.omega, &h0.omega);
        rep.a_drift = state.h.a.sub(&h0.a)?.norm_beta(cfg.beta);
        return Ok((next, rep));
    }
    let sol = solve_homological(ft, &state.h, &HomoOpts { kappa, n_trunc, s: cfg.s, sigma })?;
    rep.min_divisor = sol.audit.families.iter().map(|f| f.min_divisor).fold(f64::INFINITY, f64::min);
    if sol.audit.excluded() {
        rep.excluded = true;
        let mut same = state.clone();
        same.exclusions.push(sol.audit);
        return Ok((same, rep));
    }
    let s = &sol.s;
    rep.s_norm = jet_norm(s, &p, true);
    rep.smallness_ok = rep.s_norm <= rep.smallness_bound;
    if cfg.strict_smallness && !rep.smallness_ok {
        return Err(KamError::Smallness { what: "generator".into(), value: rep.s_norm, bound: rep.smallness_bound });
    }
    let lie = LieOpts { kmax: cfg.k_max, max_terms: cfg.lie_max_terms, tol: 1e-17 };
    let bo = BracketOpts::new(cfg.k_max);
    let n = state.h.n();
    let hhat = sol.hhat.jet(n);
    let mut tail = Tail::default();

    let (g0, t0) = poisson_jet(&hhat.add(&sol.r), s, &bo)?;
    let (g1, t1) = poisson_jet(ft, s, &bo)?;
    tail.add(t0);
    tail.add(t1);
    let nodes = cfg.gl_nodes;
    let w0 = move |m: usize| t_weights(m, nodes).0;
    let w1 = move |m: usize| t_weights(m, nodes).1;
    let (i0, r0) = lie_sums(&g0, s, &lie, &[&w0])?;
    let (i1, r1) = lie_sums(&g1, s, &lie, &[&w1])?;
    tail.add(r0.tail);
    tail.add(r1.tail);
    let mut lie_terms = vec![r0.terms, r1.terms];
    let mut jet = sol.r.add(&i0[0]).add(&i1[0]);
    let mut lowered = Jet::zeros(n, &ft.shape);
    if !state.f.is_jet() {
        let (low, tl) = state.f.lower_bracket(s, cfg.k_max)?;
        tail.add(tl);
        let wl = |m: usize| 1.0 / factorial(m + 1);
        let (ls, rl) = lie_sums(&low, s, &lie, &[&wl])?;
        tail.add(rl.tail);
        lie_terms.push(rl.terms);
        lowered = ls.into_iter().next().unwrap();
        jet = jet.add(&lowered);
    }
    let jet = jet.realify();
    rep.lie_terms = lie_terms.clone();
    let fplus = state.f.with_jet(jet);
    let hplus = state.h.corrected(&sol.hhat)?;
    rep.eps_next = jet_norm(&fplus.jet, &p_next, false);
    rep.tail = tail;
    rep.normal_form_ok = hplus.a.is_normal_form(1e-12);
    rep.omega_drift = drift(&hplus.omega, &h0.omega);
    rep.a_drift = hplus.a.sub(&h0.a)?.norm_beta(cfg.beta);
    if j >= 1 {
        let pr = predicted_epsilon(state.eps_prev, eps, sched, j, cfg.c_pred);
        rep.predicted = Some(pr);
        rep.prediction_ok = rep.eps_next <= 10.0 * pr;
    } else {
        rep.prediction_ok = true;
    }

    // conjugacy on sampled points of the shrunk domain
    let fm = FlowMap::new(s, 1.0, FlowOpts { steps: 1, ..FlowOpts::default() });
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(j as u64 + 1)));
    let pts = sample_points(&mut rng, &state.h, mu_next, cfg.s, cfg.residual_points);
    let jet_only = fplus.jet.sub(&lowered);
    let c = sol.hhat.c;
    let mut res = 0.0f64;
    let mut full = 0.0f64;
    let mut size = 0.0f64;
    let mut disp = 0.0f64;
    for (r, th, z) in &pts {
        let (r1, t1, z1) = fm.transport_point(r, th, z)?;
        let lhs = state.h.eval(&r1, &z1) + ft.eval(&r1, &t1, &z1);
        let rhs = hplus.eval(r, z) + c + jet_only.eval(r, th, z);
        res = res.max((lhs - rhs).abs());
        let lf = state.h.eval(&r1, &z1) + state.f.eval(&r1, &t1, &z1);
        let rf = hplus.eval(r, z) + c + fplus.eval(r, th, z);
        full = full.max((lf - rf).abs());
        size = size.max(lhs.abs());
        let dz: Vec<f64> = z1.iter().zip(z).map(|(a, b)| a - b).collect();
        let dth = t1.iter().zip(th).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dr = r1.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        disp = disp.max(dth.max(dr).max(norm_s(state.h.shape(), &dz, cfg.s)));
    }
    rep.conj_residual = res;
    rep.conj_budget = 1e-8 * eps + tail.total() + 1e-13 * size;
    rep.conj_ok = res <= rep.conj_budget;
    rep.full_residual = full;
    rep.phi_disp = disp;

    next.h = hplus;
    next.f = fplus;
    next.eps = rep.eps_next;
    next.flows.push(FlowSummary { step: j, s_norm: rep.s_norm, displacement: disp, lie_terms: lie_terms.iter().copied().max().unwrap_or(0) });
    next.exclusions.push(sol.audit);
    Ok((next, rep))
}

fn drift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Excluded,
    Budget,
    Maxiter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub status: Status,
    pub steps_completed: usize,
    pub excluded_at: Option<usize>,
    pub message: Option<String>,
    pub eps: Vec<f64>,
    pub omega_drift: Vec<f64>,
    #[serde(rename = "A_drift")]
    pub a_drift: Vec<f64>,
    pub phi_disp: Vec<f64>,
    pub exponents: Vec<f64>,
    /// `eps <= delta_0^4`.
    pub threshold_ok: bool,
    pub final_omega: Vec<f64>,
    pub final_spectrum: Vec<Vec<f64>>,
    /// Hermitian defect of the complex form of `A`; zero means the
    /// spectrum of `J A` is purely imaginary.
    pub spectrum_defect: f64,
    pub schedule: Schedule,
    pub steps: Vec<StepReport>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// `j, eps_j, eps_{j+1}, exponent` per completed step.
    pub fn eps_csv(&self) -> String {
        let mut s = String::from("j,eps,eps_next,exponent,omega_drift,A_drift,phi_disp\n");
        for (i, st) in self.steps.iter().enumerate().filter(|(_, st)| !st.excluded) {
            s += &format!(
                "{},{:e},{:e},{},{:e},{:e},{:e}\n",
                st.j,
                st.eps,
                st.eps_next,
                self.exponents.get(i).copied().unwrap_or(f64::NAN),
                st.omega_drift,
                st.a_drift,
                st.phi_disp
            );
        }
        s
    }
}

/// Scales `f` so that the jet norm at `(sigma_0, mu_0)` equals `eps`.
pub fn normalize(f: &PolyHamiltonian, eps: f64, p: &NormParams) -> PolyHamiltonian {
    let e = jet_norm(&f.jet, p, false);
    if e == 0.0 {
        f.clone()
    } else {
        f.scale(eps / e)
    }
}

/// Point `i` of a two-axis golden-ratio sequence in `[lo, hi]^p`.
pub fn parameter_point(i: usize, p: usize, lo: f64, hi: f64) -> Vec<f64> {
    const STEPS: [(f64, f64); 4] = [(0.618034, 0.0), (0.414214, 0.3), (0.732051, 0.6), (0.236068, 0.9)];
    (0..p)
        .map(|c| {
            let (a, b) = STEPS[c % STEPS.len()];
            lo + (hi - lo) * ((a * i as f64 + b) % 1.0)
        })
        .collect()
}

/// First point of the sequence, out of `tries`, whose normal form passes
/// a full divisor audit at `kappa`.
pub fn select_parameter(
    p: usize,
    bounds: (f64, f64),
    tries: usize,
    kappa: f64,
    n_trunc: u32,
    family: &dyn Fn(&[f64]) -> Result<NormalFormHam>,
) -> Result<Option<Vec<f64>>> {
    for i in 0..tries {
        let rho = parameter_point(i, p, bounds.0, bounds.1);
        let h = family(&rho)?;
        if !crate::homo::full_audit(&h, kappa, n_trunc)?.excluded() {
            return Ok(Some(rho));
        }
    }
    Ok(None)
}

/// Iterates until `eps_j <= tol`, `J_max` steps, exclusion or a budget failure.
pub fn run(h0: &NormalFormHam, f0: &PolyHamiltonian, cfg: &KamConfig) -> ConvergenceReport {
    let sched = Schedule::new(cfg, h0.n());
    let mut state = KamState::new(h0.clone(), f0.clone(), &sched, cfg.beta, cfg.s);
    let mut rep = ConvergenceReport {
        status: Status::Maxiter,
        steps_completed: 0,
        excluded_at: None,
        message: None,
        eps: vec![state.eps],
        omega_drift: vec![0.0],
        a_drift: vec![0.0],
        phi_disp: Vec::new(),
        exponents: Vec::new(),
        threshold_ok: state.eps <= sched.delta0.powi(4) * (1.0 + 1e-12),
        final_omega: h0.omega.clone(),
        final_spectrum: Vec::new(),
        spectrum_defect: 0.0,
        schedule: sched,
        steps: Vec::new(),
    };
    loop {
        if state.eps <= cfg.tol {
            rep.status = Status::Converged;
            break;
        }
        if state.j >= cfg.j_max {
            let dec = rep.eps.windows(2).skip(1).all(|w| w[1] < w[0]);
            rep.status = if dec && state.eps < rep.eps[0] { Status::Converged } else { Status::Maxiter };
            break;
        }
        match kam_step(&state, &sched, cfg, h0) {
            Ok((next, st)) => {
                if st.excluded {
                    rep.status = Status::Excluded;
                    rep.excluded_at = Some(st.j);
                    rep.message = Some(format!("excluded at step {}", st.j));
                    rep.steps.push(st);
                    break;
                }
                rep.eps.push(st.eps_next);
                rep.omega_drift.push(st.omega_drift);
                rep.a_drift.push(st.a_drift);
                rep.phi_disp.push(st.phi_disp);
                rep.exponents.push(st.eps_next.ln() / st.eps.ln());
                let over = st.omega_drift > sched.delta0 || st.a_drift > sched.delta0 / 4.0;
                rep.steps.push(st);
                rep.steps_completed += 1;
                state = next;
                if over {
                    rep.status = Status::Budget;
                    rep.message = Some("normal-form drift left the admissible range".into());
                    break;
                }
            }
            Err(e) => {
                rep.status = Status::Budget;
                rep.message = Some(e.to_string());
                break;
            }
        }
    }
    rep.final_omega = state.h.omega.clone();
    rep.final_spectrum = state.h.spectrum().unwrap_or_default();
    rep.spectrum_defect = state.h.a.to_q().hermitian_defect();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_identities() {
        let cfg = KamConfig::new(1e-6);
        let s = Schedule::new(&cfg, 2);
        assert!((s.c_star - 3.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
        assert!((s.delta0 - 1e-6f64.powf(0.25)).abs() < 1e-18);
        assert!((s.kappa0 - 1e-2).abs() < 1e-15);
        for j in 1..20 {
            let d = s.sigma(j - 1) - s.sigma(j);
            assert!((d - s.c_star * s.sigma0 / (j * j) as f64).abs() < 1e-15);
        }
        assert!((s.sigma(100_000) - 0.25).abs() < 1e-5);
        assert!((s.mu(3, 1e-5) - 1e-5f64.powf(0.4) * 0.5).abs() < 1e-18);
        assert_eq!(s.n_trunc(0, 1e-6), 12);
    }

    #[test]
    fn predictor() {
        let s = Schedule::new(&KamConfig::new(1e-4), 2);
        assert_eq!(predicted_epsilon(1e-4, 0.0, &s, 1, 1.0), 0.0);
        let a = predicted_epsilon(1e-4, 1e-6, &s, 1, 1.0);
        let b = predicted_epsilon(1e-4, 2e-6, &s, 1, 1.0);
        assert!(b > 2.0 * a);
        assert!((contraction_bound(1e-4, 2) - 3.59e-6).abs() < 0.01e-6);
    }

    #[test]
    fn parameter_sequence() {
        assert_eq!(parameter_point(0, 2, 1.0, 2.0), vec![1.0, 1.3]);
        let p = parameter_point(4, 2, 1.0, 2.0);
        assert!((p[0] - 1.472136).abs() < 1e-12 && (p[1] - 1.956856).abs() < 1e-12);
    }

    #[test]
    fn t_weights_exact() {
        for m in 0..10 {
            let (a, b) = t_weights(m, 8);
            let f = factorial(m);
            assert!((a - 1.0 / ((m + 1) * (m + 2)) as f64 / f).abs() < 1e-15);
            assert!((b - 1.0 / (m + 2) as f64 / f).abs() < 1e-15);
        }
    }
}
