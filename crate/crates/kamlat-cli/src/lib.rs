//! Scenario runner: one subcommand per pipeline, every run writes its
//! reports plus a manifest into the output directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kamlat::modes::{ModelFile, ModelKind};
use kamlat::KamError;

mod commands;

pub use commands::build;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXCLUDED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kamlat", version, about = "Block-structured KAM iteration on lattice models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral hypotheses, basis checks and a divisor audit.
    #[command(name = "check_hypotheses", alias = "check-hypotheses")]
    CheckHypotheses(Overrides),
    /// The KAM iteration on a built model.
    #[command(name = "kam_run", alias = "kam-run")]
    KamRun(Overrides),
    /// One homological solve on the model perturbation.
    #[command(name = "solve_homo", alias = "solve-homo")]
    SolveHomo(Overrides),
    /// Model assembly and Hessian block tables.
    #[command(name = "app_demo", alias = "app-demo")]
    AppDemo(Overrides),
    /// Monte-Carlo exclusion fractions over kappa and N grids.
    #[command(name = "measure_exclusion", alias = "measure-exclusion")]
    MeasureExclusion(Overrides),
    /// Replays the scenario stored in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Model file (JSON); defaults to the Klein-Gordon desk model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub wmax: Option<u32>,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long)]
    pub dmax: Option<u32>,
    #[arg(long)]
    pub jmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameter point, comma separated.
    #[arg(long)]
    pub rho: Option<String>,
    /// Kappa value or grid, comma separated.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Fourier truncation N or grid, comma separated.
    #[arg(long)]
    pub ntrunc: Option<String>,
    /// Monte-Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Points used by the conjugacy check of each KAM step.
    #[arg(long)]
    pub residual_points: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Fully resolved run configuration. Everything that affects the output
/// files is in here, so its hash identifies the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub command: String,
    pub model: ModelFile,
    pub eps: f64,
    pub k_max: u32,
    pub d_max: u32,
    pub j_max: usize,
    pub seed: u64,
    pub rho: Option<Vec<f64>>,
    pub kappa: Vec<f64>,
    pub n_trunc: Vec<u32>,
    pub samples: usize,
    pub residual_points: usize,
}

fn config(msg: impl Into<String>) -> KamError {
    KamError::Config(msg.into())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, KamError> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| config(format!("bad {what} value '{v}'"))))
        .collect()
}

/// The Klein-Gordon model used when no model file is given.
pub fn desk_model() -> ModelFile {
    ModelFile {
        kind: ModelKind::KgS2,
        m: 1.0,
        delta: 1.0,
        n: 2,
        w_max: 8,
        admissible: vec![(1, 0), (2, 1)],
        actions: vec![1.0, 1.5],
        nonlinearity: Some("u3".into()),
        beta: None,
    }
}

impl Scenario {
    pub fn resolve(command: &str, o: &Overrides) -> Result<Self, KamError> {
        let mut model = match &o.model {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| config(format!("cannot read {}: {e}", p.display())))?;
                ModelFile::from_json(&text).map_err(|e| config(format!("model file {}: {e}", p.display())))?
            }
            None => desk_model(),
        };
        if let Some(w) = o.wmax {
            model.w_max = w;
        }
        let (kappa, n_trunc, samples) = match command {
            "measure_exclusion" => (vec![1e-5, 1e-4, 1e-3, 1e-2], vec![3], 4096),
            "check_hypotheses" => (vec![1e-4], vec![3], 1024),
            "solve_homo" => (vec![1e-4], vec![6], 0),
            _ => (vec![1e-4], vec![12], 0),
        };
        let sc = Scenario {
            command: command.to_string(),
            model,
            eps: o.eps.unwrap_or(1e-6),
            k_max: o.kmax.unwrap_or(12),
            d_max: o.dmax.unwrap_or(4),
            j_max: o.jmax.unwrap_or(4),
            seed: o.seed,
            rho: o.rho.as_deref().map(|s| parse_list(s, "rho")).transpose()?,
            kappa: o.kappa.as_deref().map(|s| parse_list(s, "kappa")).transpose()?.unwrap_or(kappa),
            n_trunc: o.ntrunc.as_deref().map(|s| parse_list(s, "ntrunc")).transpose()?.unwrap_or(n_trunc),
            samples: o.samples.unwrap_or(samples),
            residual_points: o.residual_points.unwrap_or(32),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), KamError> {
        self.model.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(config("eps must lie in (0, 1)"));
        }
        if self.k_max < 1 || self.j_max < 1 {
            return Err(config("kmax and jmax must be at least 1"));
        }
        if !(2..=8).contains(&self.d_max) {
            return Err(config("dmax must lie in 2..=8"));
        }
        if self.kappa.is_empty() || self.kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(config("kappa values must be positive"));
        }
        if self.n_trunc.is_empty() || self.n_trunc.contains(&0) {
            return Err(config("ntrunc values must be at least 1"));
        }
        if self.command == "measure_exclusion" && self.samples == 0 {
            return Err(config("samples must be positive"));
        }
        if let Some(rho) = &self.rho {
            let (lo, hi) = self.model.model().param_box();
            if rho.len() != self.model.n {
                return Err(config(format!("rho needs {} values", self.model.n)));
            }
            if rho.iter().any(|&r| !(lo..=hi).contains(&r)) {
                return Err(config(format!("rho must lie in [{lo}, {hi}]")));
            }
        }
        match (self.model.kind, self.model.nonlinearity.as_deref()) {
            (_, None) => {}
            (ModelKind::KgS2, Some("u2" | "u3" | "sin" | "zero")) => {}
            (ModelKind::QhoR2, Some("nls+" | "nls-" | "hartree" | "zero")) => {}
            (_, Some(other)) => return Err(config(format!("unknown nonlinearity '{other}' for this model"))),
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(serde_json::to_vec(self).unwrap()))
    }
}

/// Files of one run, written together with the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, body: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), body.into()));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.0.as_str()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub exit_code: i32,
    pub scenario: Scenario,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Versions {
    pub kamlat: String,
    pub kamlat_cli: String,
}

pub fn write_outputs(dir: &Path, sc: &Scenario, out: &Outputs, code: i32) -> Result<(), KamError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, body) in &out.files {
        fs::write(dir.join(name), body)?;
        files.push(FileEntry { name: name.clone(), sha256: format!("{:x}", Sha256::digest(body)), bytes: body.len() });
    }
    let m = Manifest {
        command: sc.command.clone(),
        config_hash: sc.hash(),
        seed: sc.seed,
        versions: Versions { kamlat: kamlat::VERSION.into(), kamlat_cli: env!("CARGO_PKG_VERSION").into() },
        exit_code: code,
        scenario: sc.clone(),
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

/// Runs one resolved scenario and writes its files. Returns the exit code.
pub fn execute(sc: &Scenario, dir: &Path) -> i32 {
    let mut out = Outputs::default();
    let res = match sc.command.as_str() {
        "check_hypotheses" => commands::check_hypotheses(sc, &mut out),
        "kam_run" => commands::kam_run(sc, &mut out),
        "solve_homo" => commands::solve_homo(sc, &mut out),
        "app_demo" => commands::app_demo(sc, &mut out),
        "measure_exclusion" => commands::measure_exclusion(sc, &mut out),
        other => Err(config(format!("unknown command '{other}'"))),
    };
    let code = match res {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                KamError::Config(_) => EXIT_CONFIG,
                _ => EXIT_ASSERT,
            };
            out.add("error.txt", format!("{e}\n"));
            code
        }
    };
    if let Err(e) = write_outputs(dir, sc, &out, code) {
        eprintln!("error: cannot write outputs: {e}");
        return EXIT_ASSERT;
    }
    code
}

/// Entry point for the binary and for tests.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, o) = match &cli.command {
        Command::CheckHypotheses(o) => ("check_hypotheses", o),
        Command::KamRun(o) => ("kam_run", o),
        Command::SolveHomo(o) => ("solve_homo", o),
        Command::AppDemo(o) => ("app_demo", o),
        Command::MeasureExclusion(o) => ("measure_exclusion", o),
        Command::Rerun { manifest, out } => {
            let sc = fs::read_to_string(manifest)
                .map_err(KamError::from)
                .and_then(|t| Ok(serde_json::from_str::<Manifest>(&t)?.scenario))
                .and_then(|sc| sc.validate().map(|_| sc));
            return match sc {
                Ok(sc) => execute(&sc, out),
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match Scenario::resolve(name, o) {
        Ok(sc) => execute(&sc, &o.out),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
