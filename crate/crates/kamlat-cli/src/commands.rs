use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use kamlat::apps::{
    kg_build, kg_hessian_sup_table, plane_gram_defect, qho_build, qho_hessian_table, qho_kernel_scan, sphere_gram_defect,
    unsold_defect, BuildReport, KgNonlinearity, KgProblem, QhoNonlinearity, QhoProblem, SphereQuad,
};
use kamlat::fixtures::JetFixture;
use kamlat::homo::{exclusion_sweep, full_audit, residual, solve_homological, DivisorAudit, HomoOpts, NormalFormHam};
use kamlat::jets::{jet_norm, NormParams};
use kamlat::kam::{normalize, parameter_point, run, select_parameter, KamConfig, Status};
use kamlat::modes::{check_a1, check_kg_gaps, log_slope, A1Report, Family, GapReport, ModelKind, SpectralModel};
use kamlat::poly::PolyHamiltonian;
use kamlat::{KamError, Result};

use crate::{Outputs, Scenario, EXIT_ASSERT, EXIT_EXCLUDED, EXIT_OK};

const NORM: NormParams = NormParams { sigma: 0.5, mu: 0.5, s: 2.0, beta: 0.25 };

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap() + "\n"
}

fn kg_nonlinearity(name: Option<&str>) -> KgNonlinearity {
    match name {
        Some("u2") => KgNonlinearity::U2,
        Some("sin") => KgNonlinearity::SinU,
        Some("zero") => KgNonlinearity::Zero,
        _ => KgNonlinearity::U3,
    }
}

fn qho_nonlinearity(name: Option<&str>) -> QhoNonlinearity {
    match name {
        Some("nls-") => QhoNonlinearity::Nls { sign: -1.0 },
        Some("hartree") => QhoNonlinearity::Hartree { width: 1.0 },
        Some("zero") => QhoNonlinearity::Zero,
        _ => QhoNonlinearity::Nls { sign: 1.0 },
    }
}

/// Builds `(h_0, f)` for the scenario model at `rho`; `beta` is the QHO regularization.
pub fn build(sc: &Scenario, rho: &[f64], beta: f64) -> Result<(NormalFormHam, PolyHamiltonian, BuildReport)> {
    let mf = &sc.model;
    let clus = mf.clustering()?;
    let adm = mf.admissible_set()?;
    match mf.kind {
        ModelKind::KgS2 => {
            let prob = KgProblem { model: mf.model(), adm, g: kg_nonlinearity(mf.nonlinearity.as_deref()) };
            kg_build(&prob, &clus, rho, sc.d_max, sc.k_max)
        }
        ModelKind::QhoR2 => {
            let prob = QhoProblem {
                model: mf.model(),
                adm,
                beta,
                f: qho_nonlinearity(mf.nonlinearity.as_deref()),
                quad_order: None,
            };
            qho_build(&prob, &clus, rho, sc.d_max, sc.k_max)
        }
    }
}

fn family(sc: &Scenario) -> Result<impl Fn(&[f64]) -> Result<NormalFormHam>> {
    let model = sc.model.model();
    let adm = sc.model.admissible_set()?;
    let clus = sc.model.clustering()?;
    Ok(move |r: &[f64]| NormalFormHam::from_model(&model, &adm, &clus, r))
}

fn default_rho(sc: &Scenario) -> Vec<f64> {
    let (lo, hi) = sc.model.model().param_box();
    sc.rho.clone().unwrap_or_else(|| parameter_point(0, sc.model.n, lo, hi))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: f64,
    asserted: bool,
    pass: bool,
}

#[derive(Serialize)]
struct Hypotheses {
    a1: A1Report,
    kg_gaps: Vec<GapReport>,
    checks: Vec<Check>,
    rho: Vec<f64>,
    audit: DivisorAudit,
    pass: bool,
}

pub fn check_hypotheses(sc: &Scenario, out: &mut Outputs) -> Result<i32> {
    let model = sc.model.model();
    let clus = sc.model.clustering()?;
    let adm = sc.model.admissible_set()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let a1 = check_a1(&model, 200);
    let mut checks = vec![Check {
        name: "A1 growth and separation".into(),
        value: a1.min_gap_ratio.min(a1.min_growth_ratio),
        bound: a1.c0,
        asserted: true,
        pass: a1.pass,
    }];
    let mut gaps = Vec::new();
    let modes: Vec<_> = clus.modes().chain(adm.modes.iter().copied()).collect();
    match sc.model.kind {
        ModelKind::KgS2 => {
            let g = check_kg_gaps(model.mass, 200);
            checks.push(Check {
                name: "KG gap |lambda_a - lambda_b| / |w_a - w_b|".into(),
                value: g.min_gap_ratio,
                bound: 0.5,
                asserted: true,
                pass: g.pass,
            });
            checks.push(Check {
                name: "KG drift w_a |lambda_a - lambda_b - (w_a - w_b)| / (m + 1)".into(),
                value: g.max_drift_ratio,
                bound: 1.0,
                asserted: true,
                pass: g.pass,
            });
            gaps.push(g);
            let pts: Vec<(f64, f64)> = (0..100)
                .map(|_| ((2.0 * rng.random::<f64>() - 1.0).acos(), std::f64::consts::TAU * rng.random::<f64>()))
                .collect();
            let u = (0..=10).map(|j| unsold_defect(j, &pts)).fold(0.0, f64::max);
            checks.push(Check { name: "Unsold identity, j <= 10".into(), value: u, bound: 1e-10, asserted: true, pass: u <= 1e-10 });
            let gd = sphere_gram_defect(&modes, &SphereQuad::for_weight(sc.model.w_max));
            checks.push(Check { name: "sphere basis Gram defect".into(), value: gd, bound: 1e-8, asserted: true, pass: gd <= 1e-8 });
        }
        ModelKind::QhoR2 => {
            let q = 2 * sc.model.w_max as usize + 4;
            let gd = plane_gram_defect(&modes, q)?;
            checks.push(Check { name: "plane basis Gram defect".into(), value: gd, bound: 1e-8, asserted: true, pass: gd <= 1e-8 });
            let top = sc.model.w_max.min(20);
            let k: Vec<f64> = (1..=top).map(|j| qho_kernel_scan(j, 81)).collect::<Result<_>>()?;
            let ratio = k.iter().cloned().fold(0.0, f64::max) / k.iter().cloned().fold(f64::INFINITY, f64::min);
            checks.push(Check { name: "kernel diagonal max ratio over levels".into(), value: ratio, bound: 2.0, asserted: true, pass: ratio <= 2.0 });
        }
    }
    let rho = default_rho(sc);
    let h = NormalFormHam::from_model(&model, &adm, &clus, &rho)?;
    let audit = full_audit(&h, sc.kappa[0], sc.n_trunc[0])?;
    checks.push(Check {
        name: "divisor audit at rho (A2, A3)".into(),
        value: audit.families.iter().map(|f| f.min_divisor).fold(f64::INFINITY, f64::min),
        bound: sc.kappa[0],
        asserted: false,
        pass: !audit.excluded(),
    });
    let pass = checks.iter().all(|c| !c.asserted || c.pass);
    if sc.kappa.len() > 1 {
        let fam = family(sc)?;
        let (reps, _) = exclusion_sweep(&model, &fam, &sc.kappa, sc.n_trunc[0], sc.samples, sc.seed, &Family::ALL)?;
        out.add("exclusion.csv", exclusion_csv(&reps));
    }
    let mut s = String::new();
    let _ = writeln!(s, "check_hypotheses: {}", if pass { "PASS" } else { "FAIL" });
    for c in &checks {
        let tag = if !c.asserted { "info" } else if c.pass { "pass" } else { "FAIL" };
        let _ = writeln!(s, "  [{tag}] {}: {:e} (bound {:e})", c.name, c.value, c.bound);
    }
    let rep = Hypotheses { a1, kg_gaps: gaps, checks, rho, audit, pass };
    out.add("hypotheses.json", json(&rep));
    out.add("summary.txt", s);
    Ok(if pass { EXIT_OK } else { EXIT_ASSERT })
}

fn exclusion_csv(reps: &[kamlat::modes::ExclusionReport]) -> String {
    let mut s = String::from("n_trunc,kappa,fraction");
    for f in Family::ALL {
        s += ",";
        s += f.name();
    }
    s += "\n";
    for r in reps {
        let _ = write!(s, "{},{:e},{:e}", r.n_trunc, r.kappa, r.fraction);
        for f in &r.family_fractions {
            let _ = write!(s, ",{f:e}");
        }
        s += "\n";
    }
    s
}

#[derive(Serialize)]
struct RunInfo {
    rho: Vec<f64>,
    kappa0: f64,
    selected: bool,
    build: BuildReport,
    raw_jet_norm: f64,
}

pub fn kam_run(sc: &Scenario, out: &mut Outputs) -> Result<i32> {
    let kappa0 = sc.kappa[0];
    let (rho, selected) = match &sc.rho {
        Some(r) => (r.clone(), false),
        None => {
            let fam = family(sc)?;
            match select_parameter(sc.model.n, sc.model.model().param_box(), 20, 2.0 * kappa0, sc.k_max, &fam)? {
                Some(r) => (r, true),
                None => {
                    out.add("summary.txt", format!("kam_run: no sampled rho passes the divisor audit at kappa = {:e}\n", 2.0 * kappa0));
                    return Ok(EXIT_EXCLUDED);
                }
            }
        }
    };
    let (h0, f, build) = build(sc, &rho, sc.model.beta.unwrap_or(0.25))?;
    let raw = jet_norm(&f.jet, &NORM, false);
    let f0 = normalize(&f, sc.eps, &NORM);
    let mut cfg = KamConfig::new(sc.eps);
    cfg.k_max = sc.k_max;
    cfg.j_max = sc.j_max;
    cfg.kappa0 = Some(kappa0);
    cfg.seed = sc.seed;
    cfg.residual_points = sc.residual_points;
    let rep = run(&h0, &f0, &cfg);
    let mut s = String::new();
    let _ = writeln!(s, "kam_run: status {:?}, {} steps", rep.status, rep.steps_completed);
    let _ = writeln!(s, "  rho = [{}], kappa0 = {:e}", fmt_vec(&rho), kappa0);
    for (j, e) in rep.eps.iter().enumerate() {
        let x = if j == 0 { String::new() } else { format!("  exponent {:.4}", rep.exponents[j - 1]) };
        let _ = writeln!(s, "  eps_{j} = {e:.6e}{x}");
    }
    let _ = writeln!(
        s,
        "  omega drift {:.3e}, A drift {:.3e}",
        rep.omega_drift.last().copied().unwrap_or(0.0),
        rep.a_drift.last().copied().unwrap_or(0.0)
    );
    if let Some(m) = &rep.message {
        let _ = writeln!(s, "  {m}");
    }
    out.add("kam_report.json", rep.to_json() + "\n");
    out.add("eps.csv", rep.eps_csv());
    out.add("run.json", json(&RunInfo { rho, kappa0, selected, build, raw_jet_norm: raw }));
    out.add("summary.txt", s);
    Ok(match rep.status {
        Status::Converged => EXIT_OK,
        Status::Excluded => EXIT_EXCLUDED,
        _ => EXIT_ASSERT,
    })
}

#[derive(Serialize)]
struct HomoReport {
    status: &'static str,
    rho: Vec<f64>,
    kappa: f64,
    n_trunc: u32,
    min_divisor: f64,
    residual: f64,
    scale: f64,
    normal_form: bool,
    gain: f64,
    gain_bound: f64,
    audit: DivisorAudit,
}

pub fn solve_homo(sc: &Scenario, out: &mut Outputs) -> Result<i32> {
    let rho = default_rho(sc);
    let (h, f, _) = build(sc, &rho, sc.model.beta.unwrap_or(0.25))?;
    let fj = normalize(&f, sc.eps, &NORM).jet;
    let opts = HomoOpts { kappa: sc.kappa[0], n_trunc: sc.n_trunc[0], s: 2.0, sigma: NORM.sigma };
    let sol = solve_homological(&fj, &h, &opts)?;
    let res = residual(&fj, &h, &sol).max_abs();
    let scale = jet_norm(&fj, &NORM, false);
    let excluded = sol.audit.excluded();
    let normal_form = sol.hhat.b.is_normal_form(1e-12);
    let ok = res <= 1e-10 * scale && normal_form;
    let rep = HomoReport {
        status: if excluded { "excluded" } else if ok { "solved" } else { "failed" },
        rho,
        kappa: opts.kappa,
        n_trunc: opts.n_trunc,
        min_divisor: sol.audit.families.iter().map(|f| f.min_divisor).fold(f64::INFINITY, f64::min),
        residual: res,
        scale,
        normal_form,
        gain: sol.gain,
        gain_bound: sol.gain_bound,
        audit: sol.audit.clone(),
    };
    let mut s = String::new();
    let _ = writeln!(s, "solve_homo: {}", rep.status);
    let _ = writeln!(s, "  kappa {:e}, N {}, min divisor {:e}", rep.kappa, rep.n_trunc, rep.min_divisor);
    let _ = writeln!(s, "  residual {:e} against [f] = {:e}", rep.residual, rep.scale);
    let _ = writeln!(s, "  gain {:e} (bound {:e})", rep.gain, rep.gain_bound);
    out.add("homo_report.json", json(&rep));
    out.add("generator.json", JetFixture::from_jet(&sol.s, opts.n_trunc).to_json() + "\n");
    out.add("summary.txt", s);
    Ok(if excluded {
        EXIT_EXCLUDED
    } else if ok {
        EXIT_OK
    } else {
        EXIT_ASSERT
    })
}

#[derive(Serialize)]
struct BlockTable {
    beta: f64,
    weight: f64,
    sup: f64,
    min_nonzero: f64,
    ratio: f64,
    rows: Vec<(u32, u32, f64)>,
}

fn table(beta: f64, weight: f64, rows: Vec<(u32, u32, f64)>) -> BlockTable {
    let sup = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let min_nonzero = rows.iter().map(|r| r.2).filter(|&v| v > 1e-12 * sup).fold(f64::INFINITY, f64::min);
    BlockTable { beta, weight, sup, min_nonzero, ratio: sup / min_nonzero, rows }
}

#[derive(Serialize)]
struct AppReport {
    kind: ModelKind,
    rho: Vec<f64>,
    build: Vec<BuildReport>,
    tables: Vec<BlockTable>,
    pass: bool,
}

pub fn app_demo(sc: &Scenario, out: &mut Outputs) -> Result<i32> {
    let rho = default_rho(sc);
    let mut builds = Vec::new();
    let mut tables = Vec::new();
    match sc.model.kind {
        ModelKind::KgS2 => {
            let (h0, f, rep) = build(sc, &rho, 0.25)?;
            let prob = KgProblem {
                model: sc.model.model(),
                adm: sc.model.admissible_set()?,
                g: kg_nonlinearity(sc.model.nonlinearity.as_deref()),
            };
            let clus = sc.model.clustering()?;
            let rows = kg_hessian_sup_table(&prob, &clus, &SphereQuad::for_weight(sc.model.w_max), 0.25, 8);
            tables.push(table(0.25, 0.25, rows));
            out.add("h0_fixture.json", JetFixture::from_jet(&h0.jet(), sc.k_max).to_json() + "\n");
            out.add("f_fixture.json", JetFixture::from_jet(&f.jet, sc.k_max).to_json() + "\n");
            builds.push(rep);
        }
        ModelKind::QhoR2 => {
            for beta in [0.0, 0.5, 1.0] {
                let (h0, f, rep) = build(sc, &rho, beta)?;
                let theta = vec![0.0; sc.model.n];
                tables.push(table(beta, 1.0, qho_hessian_table(&f, &theta, 1.0)));
                if beta == 0.0 {
                    out.add("h0_fixture.json", JetFixture::from_jet(&h0.jet(), sc.k_max).to_json() + "\n");
                }
                out.add(&format!("f_fixture_beta{beta}.json"), JetFixture::from_jet(&f.jet, sc.k_max).to_json() + "\n");
                builds.push(rep);
            }
        }
    }
    let build_ok = builds.iter().all(|b| b.hessian_check <= 1e-8 * b.hessian_scale.max(1.0));
    let monotone = tables.windows(2).all(|w| w[1].sup <= w[0].sup);
    let pass = build_ok && monotone;
    let mut csv = String::from("beta,w_a,w_b,hs_weighted\n");
    for t in &tables {
        for r in &t.rows {
            let _ = writeln!(csv, "{},{},{},{:e}", t.beta, r.0, r.1, r.2);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "app_demo: {}", if pass { "PASS" } else { "FAIL" });
    for t in &tables {
        let _ = writeln!(s, "  beta {}: sup {:.4e}, nonzero range ratio {:.3}", t.beta, t.sup, t.ratio);
    }
    for b in &builds {
        let _ = writeln!(s, "  quadrature cross-check {:e} on scale {:e}", b.hessian_check, b.hessian_scale);
    }
    out.add("hs_blocks.csv", csv);
    out.add("app_report.json", json(&AppReport { kind: sc.model.kind, rho, build: builds, tables, pass }));
    out.add("summary.txt", s);
    Ok(if pass { EXIT_OK } else { EXIT_ASSERT })
}

#[derive(Serialize)]
struct ExclusionSummary {
    n_trunc: u32,
    kappa: Vec<f64>,
    fraction: Vec<f64>,
    slope: Option<f64>,
    family_slopes: Vec<(String, Option<f64>)>,
}

pub fn measure_exclusion(sc: &Scenario, out: &mut Outputs) -> Result<i32> {
    let model: SpectralModel = sc.model.model();
    let fam = family(sc)?;
    let mut all = Vec::new();
    let mut summary = Vec::new();
    let mut s = String::from("measure_exclusion\n");
    for &n in &sc.n_trunc {
        let (reps, slope) = exclusion_sweep(&model, &fam, &sc.kappa, n, sc.samples, sc.seed, &Family::ALL)?;
        let family_slopes = Family::ALL
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let y: Vec<f64> = reps.iter().map(|r| r.family_fractions[i]).collect();
                (f.name().to_string(), log_slope(&sc.kappa, &y))
            })
            .collect();
        let fraction: Vec<f64> = reps.iter().map(|r| r.fraction).collect();
        let _ = writeln!(s, "  N = {n}: fractions [{}], slope {:?}", fmt_vec(&fraction), slope);
        summary.push(ExclusionSummary { n_trunc: n, kappa: sc.kappa.clone(), fraction, slope, family_slopes });
        all.extend(reps);
    }
    out.add("exclusion.csv", exclusion_csv(&all));
    out.add("exclusion.json", json(&summary));
    out.add("summary.txt", s);
    if all.is_empty() {
        return Err(KamError::Config("empty grid".into()));
    }
    Ok(EXIT_OK)
}
