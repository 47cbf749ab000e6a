//! Mode sets, spectra and the hypotheses A1-A3 for the two lattice models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::lattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "KG_S2")]
    KgS2,
    #[serde(rename = "QHO_R2")]
    QhoR2,
}

/// Lattice label (j, l).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j: u32,
    pub l: i32,
}

impl ModeIndex {
    pub fn new(j: u32, l: i32) -> Self {
        ModeIndex { j, l }
    }

    /// Energy weight used in norms, `max(j, 1)`.
    pub fn weight(&self) -> f64 {
        self.j.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub kind: ModelKind,
    /// Mass (KG only).
    pub mass: f64,
    /// Parameter coupling (KG only).
    pub delta: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Cluster-dimension exponent.
    pub d: f64,
    /// Number of parameters (= number of tangential modes).
    pub p: usize,
}

impl SpectralModel {
    pub fn kg(mass: f64, delta: f64, p: usize) -> Self {
        SpectralModel {
            kind: ModelKind::KgS2,
            mass,
            delta,
            gamma: 1.0,
            c0: 0.5,
            d: 1.0,
            p,
        }
    }

    pub fn qho(p: usize) -> Self {
        SpectralModel {
            kind: ModelKind::QhoR2,
            mass: 0.0,
            delta: 1.0,
            gamma: 1.0,
            c0: 0.5,
            d: 1.0,
            p,
        }
    }

    /// Parameter box, the same interval in every coordinate.
    pub fn param_box(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::KgS2 => (1.0, 2.0),
            ModelKind::QhoR2 => (0.0, 1.0),
        }
    }

    pub fn level_size(&self, j: u32) -> usize {
        match self.kind {
            ModelKind::KgS2 => 2 * j as usize + 1,
            ModelKind::QhoR2 => j as usize,
        }
    }

    pub fn is_valid(&self, a: ModeIndex) -> bool {
        match self.kind {
            ModelKind::KgS2 => a.l.unsigned_abs() <= a.j,
            ModelKind::QhoR2 => a.j >= 1 && a.l >= 1 && a.l as u32 <= a.j,
        }
    }

    /// Modes of level j sorted by l.
    pub fn level_modes(&self, j: u32) -> Vec<ModeIndex> {
        match self.kind {
            ModelKind::KgS2 => (-(j as i32)..=j as i32).map(|l| ModeIndex::new(j, l)).collect(),
            ModelKind::QhoR2 => (1..=j as i32).map(|l| ModeIndex::new(j, l)).collect(),
        }
    }

    /// Unperturbed eigenvalue of a normal mode; depends on j only.
    pub fn normal_eigenvalue(&self, j: u32) -> f64 {
        match self.kind {
            ModelKind::KgS2 => {
                let jf = j as f64;
                (jf * (jf + 1.0) + self.mass).sqrt()
            }
            ModelKind::QhoR2 => j as f64,
        }
    }

    /// Eigenvalue of the harmonic oscillator operator itself (QHO: 2j).
    pub fn operator_eigenvalue(&self, j: u32) -> f64 {
        match self.kind {
            ModelKind::KgS2 => self.normal_eigenvalue(j),
            ModelKind::QhoR2 => 2.0 * j as f64,
        }
    }

    /// Tangential frequency of level j at parameter value `rho_i`.
    pub fn tangential_frequency(&self, j: u32, rho_i: f64) -> f64 {
        match self.kind {
            ModelKind::KgS2 => {
                let jf = j as f64;
                (jf * (jf + 1.0) + self.mass + self.delta * rho_i).sqrt()
            }
            ModelKind::QhoR2 => j as f64 + rho_i,
        }
    }
}

/// One energy cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub w: u32,
    pub modes: Vec<ModeIndex>,
    /// Index of the first mode of this level in the flat mode order.
    pub offset: usize,
}

impl Level {
    pub fn size(&self) -> usize {
        self.modes.len()
    }

    pub fn weight(&self) -> f64 {
        self.w.max(1) as f64
    }
}

/// Block partition of a finite mode set by energy weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub levels: Vec<Level>,
    pub w_max: u32,
    n_modes: usize,
}

impl Clustering {
    pub fn from_levels(levels: Vec<(u32, Vec<ModeIndex>)>, w_max: u32) -> Self {
        let mut out = Vec::new();
        let mut offset = 0;
        for (w, modes) in levels {
            if modes.is_empty() {
                continue;
            }
            let n = modes.len();
            out.push(Level { w, modes, offset });
            offset += n;
        }
        Clustering {
            levels: out,
            w_max,
            n_modes: offset,
        }
    }

    /// Every mode with 1 <= w <= w_max.
    pub fn enumerate(model: &SpectralModel, w_max: u32) -> Result<Self> {
        if w_max < 1 {
            return Err(KamError::Config("W_max must be at least 1".into()));
        }
        let levels = (1..=w_max).map(|j| (j, model.level_modes(j))).collect();
        Ok(Self::from_levels(levels, w_max))
    }

    /// The same clustering with the given modes removed.
    pub fn without(&self, removed: &[ModeIndex]) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|lv| {
                let modes = lv
                    .modes
                    .iter()
                    .copied()
                    .filter(|m| !removed.contains(m))
                    .collect();
                (lv.w, modes)
            })
            .collect();
        Self::from_levels(levels, self.w_max)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Real dimension 2 * modes.
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.levels.iter().flat_map(|l| l.modes.iter().copied())
    }

    /// Level index of each flat mode index.
    pub fn mode_levels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_modes);
        for (i, l) in self.levels.iter().enumerate() {
            out.extend(std::iter::repeat(i).take(l.size()));
        }
        out
    }

    pub fn position(&self, a: ModeIndex) -> Option<usize> {
        self.modes().position(|m| m == a)
    }

    pub fn level_weights(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.weight()).collect()
    }
}

/// The tangential set and its actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub modes: Vec<ModeIndex>,
    pub actions: Vec<f64>,
}

impl AdmissibleSet {
    pub fn new(model: &SpectralModel, modes: Vec<ModeIndex>, actions: Vec<f64>) -> Result<Self> {
        if modes.len() != actions.len() {
            return Err(KamError::Config(format!(
                "{} admissible modes but {} actions",
                modes.len(),
                actions.len()
            )));
        }
        if modes.len() != model.p {
            return Err(KamError::Config(format!(
                "model has {} parameters but {} admissible modes",
                model.p,
                modes.len()
            )));
        }
        for (i, a) in modes.iter().enumerate() {
            if !model.is_valid(*a) {
                return Err(KamError::Config(format!("invalid mode ({}, {})", a.j, a.l)));
            }
            if modes[..i].iter().any(|b| b.j == a.j) {
                return Err(KamError::Config(format!("repeated level j = {}", a.j)));
            }
        }
        for &x in &actions {
            if !(1.0..=2.0).contains(&x) {
                return Err(KamError::Config(format!("action {x} outside [1, 2]")));
            }
        }
        Ok(AdmissibleSet { modes, actions })
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    pub fn index_of(&self, a: ModeIndex) -> Option<usize> {
        self.modes.iter().position(|m| *m == a)
    }
}

/// Eigenvalue of a normal mode or frequency of a tangential one.
pub fn eigenvalue(
    model: &SpectralModel,
    adm: &AdmissibleSet,
    a: ModeIndex,
    rho: &[f64],
    tangential: bool,
) -> Result<f64> {
    if !model.is_valid(a) {
        return Err(KamError::Domain(format!("invalid mode ({}, {})", a.j, a.l)));
    }
    if !tangential {
        return Ok(model.normal_eigenvalue(a.j));
    }
    let i = adm
        .index_of(a)
        .ok_or_else(|| KamError::Domain(format!("mode ({}, {}) is not tangential", a.j, a.l)))?;
    let (lo, hi) = model.param_box();
    let r = *rho
        .get(i)
        .ok_or_else(|| KamError::Domain("parameter vector too short".into()))?;
    if r < lo - 1e-12 || r > hi + 1e-12 {
        return Err(KamError::Domain(format!("rho = {r} outside [{lo}, {hi}]")));
    }
    Ok(model.tangential_frequency(a.j, r))
}

/// Tangential frequency vector omega_0(rho).
pub fn frequencies(model: &SpectralModel, adm: &AdmissibleSet, rho: &[f64]) -> Vec<f64> {
    adm.modes
        .iter()
        .zip(rho)
        .map(|(a, &r)| model.tangential_frequency(a.j, r))
        .collect()
}

pub const H_RHO: f64 = 1e-5;

/// Central-difference Jacobian of a map on the parameter box, one-sided at
/// the boundary. Row i holds the derivatives of component i.
pub fn fd_jacobian(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    rho: &[f64],
    lo: f64,
    hi: f64,
) -> Vec<Vec<f64>> {
    let f0 = f(rho);
    let mut jac = vec![vec![0.0; rho.len()]; f0.len()];
    for p in 0..rho.len() {
        let mut a = rho.to_vec();
        let mut b = rho.to_vec();
        let up = (rho[p] + H_RHO).min(hi);
        let dn = (rho[p] - H_RHO).max(lo);
        a[p] = up;
        b[p] = dn;
        let fa = f(&a);
        let fb = f(&b);
        for i in 0..f0.len() {
            jac[i][p] = (fa[i] - fb[i]) / (up - dn);
        }
    }
    jac
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct A1Report {
    pub min_growth_ratio: f64,
    pub growth_witness: u32,
    pub min_gap_ratio: f64,
    pub gap_witness: (u32, u32),
    pub c0: f64,
    pub pass: bool,
}

/// Growth `lambda_a / w_a^gamma` and separation `|lambda_a - lambda_b| / |w_a - w_b|`.
pub fn check_a1(model: &SpectralModel, w_max: u32) -> A1Report {
    let lam: Vec<f64> = (1..=w_max).map(|j| model.normal_eigenvalue(j)).collect();
    let mut growth = f64::INFINITY;
    let mut gw = 1;
    for (i, &l) in lam.iter().enumerate() {
        let w = (i + 1) as f64;
        let r = l / w.powf(model.gamma);
        if r < growth {
            growth = r;
            gw = i as u32 + 1;
        }
    }
    let mut gap = f64::INFINITY;
    let mut gapw = (1, 1);
    for a in 0..lam.len() {
        for b in a + 1..lam.len() {
            let r = (lam[a] - lam[b]).abs() / (b - a) as f64;
            if r < gap {
                gap = r;
                gapw = (a as u32 + 1, b as u32 + 1);
            }
        }
    }
    A1Report {
        min_growth_ratio: growth,
        growth_witness: gw,
        min_gap_ratio: gap,
        gap_witness: gapw,
        c0: model.c0,
        pass: growth >= model.c0 && gap >= model.c0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub mass: f64,
    pub w_max: u32,
    /// `min |lambda_a - lambda_b| / |w_a - w_b|`, to compare with 1/2.
    pub min_gap_ratio: f64,
    pub gap_witness: (u32, u32),
    /// `max w_a |lambda_a - lambda_b - (w_a - w_b)| / (m + 1)`, to compare with 1.
    pub max_drift_ratio: f64,
    pub drift_witness: (u32, u32),
    pub pass: bool,
}

/// Klein-Gordon level separation over `1 <= w_a < w_b <= w_max`.
pub fn check_kg_gaps(mass: f64, w_max: u32) -> GapReport {
    let model = SpectralModel::kg(mass, 1.0, 1);
    let lam: Vec<f64> = (0..=w_max).map(|j| model.normal_eigenvalue(j)).collect();
    let mut rep = GapReport {
        mass,
        w_max,
        min_gap_ratio: f64::INFINITY,
        gap_witness: (0, 0),
        max_drift_ratio: 0.0,
        drift_witness: (0, 0),
        pass: true,
    };
    for a in 1..=w_max {
        for b in a + 1..=w_max {
            let (la, lb) = (lam[a as usize], lam[b as usize]);
            let dw = (b - a) as f64;
            let gap = (la - lb).abs();
            if gap / dw < rep.min_gap_ratio {
                rep.min_gap_ratio = gap / dw;
                rep.gap_witness = (a, b);
            }
            let drift = (la - lb + dw).abs();
            let bound = (mass + 1.0) / a as f64;
            if drift / bound > rep.max_drift_ratio {
                rep.max_drift_ratio = drift / bound;
                rep.drift_witness = (a, b);
            }
            if gap < 0.5 * dw || drift > bound {
                rep.pass = false;
            }
        }
    }
    rep
}

/// Divisor families of the Melnikov conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// <k, omega>
    Zeroth,
    /// <k, omega> + lambda_a
    First,
    /// <k, omega> + lambda_a + lambda_b
    Sum,
    /// <k, omega> + lambda_a - lambda_b, which over the whole truncation is
    /// also the second Melnikov condition in measure.
    Diff,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Zeroth, Family::First, Family::Sum, Family::Diff];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Zeroth => "k_omega",
            Family::First => "k_omega_plus_lambda",
            Family::Sum => "k_omega_plus_lambda_sum",
            Family::Diff => "k_omega_plus_lambda_diff",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub samples: usize,
    pub kappa: f64,
    pub n_trunc: u32,
    pub seed: u64,
    /// Excluded fraction per family, in `Family::ALL` order.
    pub family_fractions: Vec<f64>,
    /// Fraction excluded by any of the requested families.
    pub fraction: f64,
}

/// Whether one family is violated at frequency `om` given level spectra.
pub fn family_violated(
    family: Family,
    ks: &[Vec<i32>],
    om: &[f64],
    lam: &[f64],
    wts: &[f64],
    kappa: f64,
) -> bool {
    for k in ks {
        let x = lattice::dot(k, om);
        match family {
            Family::Zeroth => {
                if x.abs() < kappa {
                    return true;
                }
            }
            Family::First => {
                for (l, w) in lam.iter().zip(wts) {
                    if (x + l).abs() < kappa * w {
                        return true;
                    }
                }
            }
            Family::Sum => {
                for a in 0..lam.len() {
                    for b in a..lam.len() {
                        if (x + lam[a] + lam[b]).abs() < kappa * (wts[a] + wts[b]) {
                            return true;
                        }
                    }
                }
            }
            Family::Diff => {
                for a in 0..lam.len() {
                    for b in 0..lam.len() {
                        let thr = kappa * (1.0 + (wts[a] - wts[b]).abs());
                        if (x + lam[a] - lam[b]).abs() < thr {
                            return true;
                        }
                    }
                }
            }
        }
    }
    false
}

/// Monte-Carlo estimate of the parameter set violating the Melnikov
/// conditions for `0 < |k|_1 <= n_trunc` on the normal levels of `clus`.
pub fn sample_melnikov(
    model: &SpectralModel,
    clus: &Clustering,
    omega: &dyn Fn(&[f64]) -> Vec<f64>,
    kappa: f64,
    n_trunc: u32,
    samples: usize,
    seed: u64,
    families: &[Family],
) -> ExclusionReport {
    let (lo, hi) = model.param_box();
    let lam: Vec<f64> = clus.levels.iter().map(|l| model.normal_eigenvalue(l.w)).collect();
    let wts = clus.level_weights();
    let ks = lattice::l1_ball_nonzero(model.p, n_trunc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fam_count = [0usize; 4];
    let mut any = 0usize;
    let mut rho = vec![0.0; model.p];
    for _ in 0..samples {
        for r in rho.iter_mut() {
            *r = lo + (hi - lo) * rng.random::<f64>();
        }
        let om = omega(&rho);
        let mut hit = false;
        for (fi, fam) in Family::ALL.iter().enumerate() {
            if kappa > 0.0 && family_violated(*fam, &ks, &om, &lam, &wts, kappa) {
                fam_count[fi] += 1;
                if families.contains(fam) {
                    hit = true;
                }
            }
        }
        if hit {
            any += 1;
        }
    }
    let m = samples.max(1) as f64;
    ExclusionReport {
        samples,
        kappa,
        n_trunc,
        seed,
        family_fractions: fam_count.iter().map(|&c| c as f64 / m).collect(),
        fraction: any as f64 / m,
    }
}

/// Least-squares slope of log y against log x over the positive entries.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Model description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    #[serde(default)]
    pub m: f64,
    #[serde(default = "one")]
    pub delta: f64,
    pub n: usize,
    #[serde(rename = "W_max")]
    pub w_max: u32,
    pub admissible: Vec<(u32, i32)>,
    pub actions: Vec<f64>,
    /// Nonlinearity: "u2", "u3", "sin" (KG) or "nls+", "nls-", "hartree" (QHO).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    /// Regularization exponent (QHO only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelFile {
    pub fn from_json(s: &str) -> Result<Self> {
        let mf: ModelFile = serde_json::from_str(s)?;
        mf.validate()?;
        Ok(mf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_max < 1 {
            return Err(KamError::Config("W_max must be at least 1".into()));
        }
        if self.kind == ModelKind::KgS2 && (self.m <= 0.0 || self.delta <= 0.0) {
            return Err(KamError::Config("KG needs m > 0 and delta > 0".into()));
        }
        self.admissible_set().map(|_| ())
    }

    pub fn model(&self) -> SpectralModel {
        match self.kind {
            ModelKind::KgS2 => SpectralModel::kg(self.m, self.delta, self.n),
            ModelKind::QhoR2 => SpectralModel::qho(self.n),
        }
    }

    pub fn admissible_set(&self) -> Result<AdmissibleSet> {
        let modes = self.admissible.iter().map(|&(j, l)| ModeIndex::new(j, l)).collect();
        AdmissibleSet::new(&self.model(), modes, self.actions.clone())
    }

    /// Normal-mode clustering: 1 <= w <= W_max minus the tangential set.
    pub fn clustering(&self) -> Result<Clustering> {
        let adm = self.admissible_set()?;
        Ok(Clustering::enumerate(&self.model(), self.w_max)?.without(&adm.modes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_sizes() {
        let kg = SpectralModel::kg(1.0, 1.0, 2);
        let c = Clustering::enumerate(&kg, 3).unwrap();
        assert_eq!(c.levels[2].size(), 7);
        let q = SpectralModel::qho(2);
        let c = Clustering::enumerate(&q, 5).unwrap();
        assert_eq!(c.levels[4].size(), 5);
        let c = Clustering::enumerate(&kg, 1).unwrap();
        assert_eq!(c.n_modes(), 3);
    }

    #[test]
    fn eigenvalue_examples() {
        let kg = SpectralModel::kg(1.0, 1.0, 1);
        let adm = AdmissibleSet::new(&kg, vec![ModeIndex::new(2, 0)], vec![1.0]).unwrap();
        let v = eigenvalue(&kg, &adm, ModeIndex::new(1, 0), &[1.5], false).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(kg.normal_eigenvalue(0), 1.0);
        let q = SpectralModel::qho(1);
        assert_eq!(q.normal_eigenvalue(4), 4.0);
        assert!(eigenvalue(&kg, &adm, ModeIndex::new(1, 0), &[1.5], true).is_err());
        let t = eigenvalue(&kg, &adm, ModeIndex::new(2, 0), &[1.5], true).unwrap();
        assert!((t - 8.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn admissible_rejects_repeated_level() {
        let kg = SpectralModel::kg(1.0, 1.0, 2);
        let r = AdmissibleSet::new(&kg, vec![ModeIndex::new(2, 0), ModeIndex::new(2, 1)], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn a1_reports() {
        assert!(check_a1(&SpectralModel::kg(1.0, 1.0, 1), 200).pass);
        let q = check_a1(&SpectralModel::qho(1), 200);
        assert!(q.pass);
        assert_eq!(q.min_growth_ratio, 1.0);
        let heavy = check_a1(&SpectralModel::kg(100.0, 1.0, 1), 5);
        let l = |j: f64| (j * (j + 1.0) + 100.0f64).sqrt();
        let mut best = f64::INFINITY;
        for a in 1..=5 {
            for b in a + 1..=5 {
                best = best.min((l(a as f64) - l(b as f64)).abs() / (b - a) as f64);
            }
        }
        assert!((heavy.min_gap_ratio - best).abs() < 1e-14);
        assert!(!heavy.pass);
    }

    #[test]
    fn fd_jacobian_clamps() {
        let f = |r: &[f64]| vec![r[0] * r[0]];
        let j = fd_jacobian(&f, &[2.0], 1.0, 2.0);
        assert!((j[0][0] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn model_file_round_trip() {
        let s = r#"{"kind":"KG_S2","m":1.0,"delta":1.0,"n":2,"W_max":8,"admissible":[[1,0],[2,0]],"actions":[1.0,1.5]}"#;
        let mf = ModelFile::from_json(s).unwrap();
        let c = mf.clustering().unwrap();
        assert_eq!(c.n_modes(), 80 - 2);
        let back = ModelFile::from_json(&serde_json::to_string(&mf).unwrap()).unwrap();
        assert_eq!(back, mf);
        assert!(ModelFile::from_json(r#"{"kind":"KG_S2"}"#).is_err());
    }

    #[test]
    fn kg_gaps() {
        for m in [0.1, 1.0, 10.0] {
            let r = check_kg_gaps(m, 200);
            assert!(r.pass, "{r:?}");
            assert!(r.min_gap_ratio >= 0.5 && r.max_drift_ratio <= 1.0);
        }
        // heavy mass flattens the low levels
        let r = check_kg_gaps(400.0, 10);
        assert!(!r.pass);
        assert_eq!(r.gap_witness.0, 1);
    }
}
