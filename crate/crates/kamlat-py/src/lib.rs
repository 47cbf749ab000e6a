//! Python bindings: models, normal forms, jets, and the pipeline drivers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kamlat::blockmat::BlockShape;
use kamlat::fixtures::JetFixture;
use kamlat::homo::{full_audit, solve_homological, HomoOpts, NormalFormHam};
use kamlat::jets::{jet_norm, poisson_jet, BracketOpts, NormParams};
use kamlat::kam::{normalize, run, select_parameter, KamConfig};
use kamlat::modes::{ModelFile, ModelKind};
use kamlat_cli::{desk_model, Scenario};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario(model: &ModelFile, k_max: u32, d_max: u32) -> Scenario {
    Scenario {
        command: "python".into(),
        model: model.clone(),
        eps: 1e-6,
        k_max,
        d_max,
        j_max: 4,
        seed: 0,
        rho: None,
        kappa: vec![1e-4],
        n_trunc: vec![6],
        samples: 0,
        residual_points: 32,
    }
}

/// Lattice model: spectrum, tangential set and truncation.
#[pyclass(name = "Model", module = "kamlat_py", from_py_object)]
#[derive(Clone)]
struct Model {
    inner: ModelFile,
}

#[pymethods]
impl Model {
    /// From a model-file JSON string; without one, the Klein-Gordon desk model.
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(s) => ModelFile::from_json(s).map_err(err)?,
            None => desk_model(),
        };
        Ok(Model { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            ModelKind::KgS2 => "KG_S2",
            ModelKind::QhoR2 => "QHO_R2",
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn w_max(&self) -> u32 {
        self.inner.w_max
    }

    fn with_w_max(&self, w_max: u32) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.w_max = w_max;
        inner.validate().map_err(err)?;
        Ok(Model { inner })
    }

    fn n_modes(&self) -> PyResult<usize> {
        Ok(self.inner.clustering().map_err(err)?.n_modes())
    }

    fn param_box(&self) -> (f64, f64) {
        self.inner.model().param_box()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).unwrap()
    }

    fn normal_form(&self, rho: Vec<f64>) -> PyResult<NormalForm> {
        let m = &self.inner;
        let clus = m.clustering().map_err(err)?;
        let adm = m.admissible_set().map_err(err)?;
        let inner = NormalFormHam::from_model(&m.model(), &adm, &clus, &rho).map_err(err)?;
        Ok(NormalForm { inner })
    }

    /// `(h_0, jet of f)` at `rho`.
    #[pyo3(signature = (rho, k_max=12, d_max=4, beta=0.25))]
    fn build(&self, rho: Vec<f64>, k_max: u32, d_max: u32, beta: f64) -> PyResult<(NormalForm, Jet)> {
        let sc = scenario(&self.inner, k_max, d_max);
        let (h, f, _) = kamlat_cli::build(&sc, &rho, beta).map_err(err)?;
        Ok((NormalForm { inner: h }, Jet { inner: f.jet }))
    }

    fn jet_from_json(&self, json: &str) -> PyResult<Jet> {
        let shape = BlockShape::new(&self.inner.clustering().map_err(err)?);
        let fx = JetFixture::from_json(json).map_err(err)?;
        Ok(Jet { inner: fx.to_jet(&shape).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, n={}, W_max={})", self.kind(), self.inner.n, self.inner.w_max)
    }
}

/// Normal form `<omega, r> + 1/2 <zeta, A zeta>`.
#[pyclass(name = "NormalForm", module = "kamlat_py", from_py_object)]
#[derive(Clone)]
struct NormalForm {
    inner: NormalFormHam,
}

#[pymethods]
impl NormalForm {
    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.omega.clone()
    }

    #[getter]
    fn normal_eigenvalues(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }

    /// Per-level eigenvalues of the normal block.
    fn spectrum(&self) -> PyResult<Vec<Vec<f64>>> {
        self.inner.spectrum().map_err(err)
    }

    fn jet(&self) -> Jet {
        Jet { inner: self.inner.jet() }
    }

    fn eval(&self, r: Vec<f64>, zeta: Vec<f64>) -> f64 {
        self.inner.eval(&r, &zeta)
    }

    /// Divisor audit as JSON.
    fn audit(&self, kappa: f64, n_trunc: u32) -> PyResult<String> {
        Ok(full_audit(&self.inner, kappa, n_trunc).map_err(err)?.to_json())
    }

    /// Solves the homological equation for `f`; returns `(S, R, excluded)`.
    #[pyo3(signature = (f, kappa=1e-4, n_trunc=6))]
    fn solve(&self, f: &Jet, kappa: f64, n_trunc: u32) -> PyResult<(Jet, Jet, bool)> {
        let opts = HomoOpts { kappa, n_trunc, s: 2.0, sigma: 0.5 };
        let sol = solve_homological(&f.inner, &self.inner, &opts).map_err(err)?;
        let ex = sol.audit.excluded();
        Ok((Jet { inner: sol.s }, Jet { inner: sol.r }, ex))
    }
}

/// Jet in `(r, theta, zeta)`: Fourier coefficients of the constant, `r`-linear,
/// `zeta`-linear and `zeta`-quadratic parts.
#[pyclass(name = "Jet", module = "kamlat_py", from_py_object)]
#[derive(Clone)]
struct Jet {
    inner: kamlat::jets::Jet,
}

#[pymethods]
impl Jet {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[pyo3(signature = (sigma=0.5, mu=0.5, s=2.0, beta=0.25, plus=false))]
    fn norm(&self, sigma: f64, mu: f64, s: f64, beta: f64, plus: bool) -> f64 {
        jet_norm(&self.inner, &NormParams { sigma, mu, s, beta }, plus)
    }

    fn eval(&self, r: Vec<f64>, theta: Vec<f64>, zeta: Vec<f64>) -> PyResult<f64> {
        if r.len() != self.inner.n || theta.len() != self.inner.n || zeta.len() != self.inner.dim() {
            return Err(err("argument lengths do not match the jet"));
        }
        Ok(self.inner.eval(&r, &theta, &zeta))
    }

    /// Jet of the Poisson bracket `{self, other}`.
    #[pyo3(signature = (other, k_max=24))]
    fn bracket(&self, other: &Jet, k_max: u32) -> PyResult<Jet> {
        let (j, _) = poisson_jet(&self.inner, &other.inner, &BracketOpts::new(k_max)).map_err(err)?;
        Ok(Jet { inner: j })
    }

    fn __add__(&self, other: &Jet) -> Jet {
        Jet { inner: self.inner.add(&other.inner) }
    }

    fn __sub__(&self, other: &Jet) -> Jet {
        Jet { inner: self.inner.sub(&other.inner) }
    }

    fn scale(&self, c: f64) -> Jet {
        Jet { inner: self.inner.scale(c) }
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    #[pyo3(signature = (k_max=12))]
    fn to_json(&self, k_max: u32) -> String {
        JetFixture::from_jet(&self.inner, k_max).to_json()
    }
}

/// KAM iteration on the model; returns the convergence report as JSON.
#[pyfunction]
#[pyo3(signature = (model, eps=1e-6, rho=None, kappa0=1e-4, k_max=12, d_max=4, j_max=4, residual_points=32, seed=0))]
#[allow(clippy::too_many_arguments)]
fn kam_run(
    model: &Model,
    eps: f64,
    rho: Option<Vec<f64>>,
    kappa0: f64,
    k_max: u32,
    d_max: u32,
    j_max: usize,
    residual_points: usize,
    seed: u64,
) -> PyResult<String> {
    let mf = &model.inner;
    let sc = scenario(mf, k_max, d_max);
    let rho = match rho {
        Some(r) => r,
        None => {
            let clus = mf.clustering().map_err(err)?;
            let adm = mf.admissible_set().map_err(err)?;
            let sm = mf.model();
            let fam = |r: &[f64]| NormalFormHam::from_model(&sm, &adm, &clus, r);
            select_parameter(mf.n, sm.param_box(), 20, 2.0 * kappa0, k_max, &fam)
                .map_err(err)?
                .ok_or_else(|| err("no sampled parameter passes the divisor audit"))?
        }
    };
    let (h0, f, _) = kamlat_cli::build(&sc, &rho, mf.beta.unwrap_or(0.25)).map_err(err)?;
    let f0 = normalize(&f, eps, &NormParams { sigma: 0.5, mu: 0.5, s: 2.0, beta: 0.25 });
    let mut cfg = KamConfig::new(eps);
    cfg.k_max = k_max;
    cfg.j_max = j_max;
    cfg.kappa0 = Some(kappa0);
    cfg.residual_points = residual_points;
    cfg.seed = seed;
    Ok(run(&h0, &f0, &cfg).to_json())
}

/// Monte-Carlo exclusion fractions over a kappa grid, with the log-log slope.
#[pyfunction]
#[pyo3(signature = (model, kappas, n_trunc=3, samples=4096, seed=0))]
fn measure_exclusion(model: &Model, kappas: Vec<f64>, n_trunc: u32, samples: usize, seed: u64) -> PyResult<(Vec<f64>, Option<f64>)> {
    let mf = &model.inner;
    let clus = mf.clustering().map_err(err)?;
    let adm = mf.admissible_set().map_err(err)?;
    let sm = mf.model();
    let fam = |r: &[f64]| NormalFormHam::from_model(&sm, &adm, &clus, r);
    let (reps, slope) =
        kamlat::homo::exclusion_sweep(&sm, &fam, &kappas, n_trunc, samples, seed, &kamlat::modes::Family::ALL).map_err(err)?;
    Ok((reps.iter().map(|r| r.fraction).collect(), slope))
}

#[pyfunction]
#[pyo3(signature = (mass, w_max=200))]
fn check_kg_gaps(mass: f64, w_max: u32) -> (bool, f64, f64) {
    let g = kamlat::modes::check_kg_gaps(mass, w_max);
    (g.pass, g.min_gap_ratio, g.max_drift_ratio)
}

#[pyfunction]
fn lemma_constants(weights: Vec<f64>, beta: f64, s: f64) -> Vec<f64> {
    kamlat::blockmat::lemma_constants(&weights, beta, s).to_vec()
}

#[pyfunction]
fn unsold_defect(j: u32, points: Vec<(f64, f64)>) -> f64 {
    kamlat::apps::unsold_defect(j, &points)
}

/// Runs the command line with the given arguments; returns the exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    kamlat_cli::main_with(std::iter::once("kamlat".to_string()).chain(args))
}

#[pymodule]
fn kamlat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", kamlat::VERSION)?;
    m.add_class::<Model>()?;
    m.add_class::<NormalForm>()?;
    m.add_class::<Jet>()?;
    m.add_function(wrap_pyfunction!(kam_run, m)?)?;
    m.add_function(wrap_pyfunction!(measure_exclusion, m)?)?;
    m.add_function(wrap_pyfunction!(check_kg_gaps, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_constants, m)?)?;
    m.add_function(wrap_pyfunction!(unsold_defect, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
