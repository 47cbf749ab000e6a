use std::sync::Arc;

use kamlat::blockmat::{norm_s, BlockShape};
use kamlat::fixtures::{random_jet, random_jet_parts};
use kamlat::flows::{build_flow, lie_terms, pullback, FlowMap, FlowOpts, LieOpts};
use kamlat::fourier::Series;
use kamlat::homo::NormalFormHam;
use kamlat::jets::{j_matrix, jet_norm, poisson_jet, BracketOpts, Jet, NormParams};
use kamlat::modes::{AdmissibleSet, Clustering, ModeIndex, SpectralModel};
use kamlat::poly::PolyHamiltonian;
use kamlat::C64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kg(w: u32) -> (NormalFormHam, Arc<BlockShape>) {
    let model = SpectralModel::kg(1.0, 1.0, 2);
    let adm = AdmissibleSet::new(&model, vec![ModeIndex::new(1, 0), ModeIndex::new(2, 1)], vec![1.0, 1.5]).unwrap();
    let clus = Clustering::enumerate(&model, w).unwrap().without(&adm.modes);
    let h = NormalFormHam::from_model(&model, &adm, &clus, &[1.3, 1.7]).unwrap();
    let sh = h.shape().clone();
    (h, sh)
}

const P: NormParams = NormParams { sigma: 0.5, mu: 0.5, s: 2.0, beta: 0.25 };

/// Random generator scaled to `frac` of the bound `nu^2 eta / 2`.
fn small_generator(rng: &mut ChaCha8Rng, sh: &Arc<BlockShape>, frac: f64) -> Jet {
    let s = random_jet(rng, 2, sh, 3, 1.0, 0.7);
    let bound = 0.5 * 0.25f64.powi(2) * 0.25;
    s.scale(frac * bound / jet_norm(&s, &P, true))
}

fn random_point(rng: &mut ChaCha8Rng, sh: &BlockShape, mu: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = 2 * sh.n_modes();
    let r: Vec<f64> = (0..2).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * mu * mu).collect();
    let th: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let mut z: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let nz = norm_s(sh, &z, 2.0);
    z.iter_mut().for_each(|v| *v *= mu * rng.random::<f64>() / nz);
    (r, th, z)
}

#[test]
fn zero_generator_is_identity() {
    let (_, sh) = kg(3);
    let f = FlowMap::new(&Jet::zeros(2, &sh), 1.0, FlowOpts::default());
    let at = f.at(&[0.3, 1.1]).unwrap();
    let d = 2 * sh.n_modes();
    assert_eq!(at.k, vec![0.3, 1.1]);
    assert_eq!(at.u, Array2::<f64>::eye(d));
    assert_eq!(at.smat, Array2::<f64>::eye(2));
    assert!(at.t.iter().all(|&v| v == 0.0) && at.l0.iter().all(|&v| v == 0.0));
    assert_eq!(f.symplecticity_defect(&[0.3, 1.1]).unwrap(), 0.0);
}

#[test]
fn constant_linear_form_shifts_zeta() {
    let (_, sh) = kg(3);
    let d = 2 * sh.n_modes();
    let c: Vec<f64> = (0..d).map(|i| 1e-3 * (i as f64 + 1.0)).collect();
    let mut s = Jet::zeros(2, &sh);
    s.z = Series::constant(2, Array2::from_shape_fn((d, 1), |(i, _)| C64::new(c[i], 0.0)));
    let t = 0.6;
    let at = FlowMap::new(&s, t, FlowOpts::default()).at(&[0.2, 0.4]).unwrap();
    let jc = j_matrix(d).dot(&ndarray::Array1::from(c));
    for a in 0..d {
        assert!((at.t[a] + t * jc[a]).abs() < 1e-16);
    }
    assert!((&at.u - &Array2::<f64>::eye(d)).iter().all(|v| v.abs() < 1e-16));
    assert!(at.l0.iter().all(|v| v.abs() < 1e-16));
    assert_eq!(at.k, vec![0.2, 0.4]);
}

#[test]
fn constant_frequency_translates_angles() {
    let (_, sh) = kg(2);
    let mut s = Jet::zeros(2, &sh);
    s.r = Series::constant(2, Array2::from_shape_vec((2, 1), vec![C64::new(0.3, 0.0), C64::new(-0.7, 0.0)]).unwrap());
    let at = FlowMap::new(&s, 1.0, FlowOpts::default()).at(&[1.0, 2.0]).unwrap();
    assert!((at.k[0] - 0.7).abs() < 1e-15 && (at.k[1] - 2.7).abs() < 1e-15);
}

#[test]
fn symplectic_and_detector() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = small_generator(&mut rng, &sh, 0.9);
    let fm = build_flow(&s, 1.0, &P, 0.25, 0.25, FlowOpts::default()).unwrap();
    let th = [0.4, 2.2];
    let def = fm.symplecticity_defect(&th).unwrap();
    assert!(def <= 1e-8, "defect {def}");
    let mut bad = fm.clone();
    let d = fm.dim();
    bad.u_perturbation = Some(Array2::from_shape_fn((d, d), |_| 1e-3 * (rng.random::<f64>() * 2.0 - 1.0)));
    assert!(bad.symplecticity_defect(&th).unwrap() >= 1e-4);
}

#[test]
fn smallness_is_checked() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = small_generator(&mut rng, &sh, 2.0);
    assert!(build_flow(&s, 1.0, &P, 0.25, 0.25, FlowOpts::default()).is_err());
    assert!(build_flow(&s, 1.0, &P, 0.0, 0.25, FlowOpts::default()).is_err());
}

#[test]
fn structured_map_matches_trajectory() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let s = small_generator(&mut rng, &sh, 0.9);
    let fm = FlowMap::new(&s, 1.0, FlowOpts::default());
    for _ in 0..3 {
        let (r, th, z) = random_point(&mut rng, &sh, 0.25);
        let a = fm.transport(&r, &th, &z).unwrap();
        let b = fm.transport_point(&r, &th, &z).unwrap();
        for (x, y) in a.0.iter().chain(&a.1).chain(&a.2).zip(b.0.iter().chain(&b.1).chain(&b.2)) {
            assert!((x - y).abs() < 1e-13, "{x} vs {y}");
        }
    }
}

#[test]
fn group_property() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut s = small_generator(&mut rng, &sh, 0.9);
    s.r = Series::constant(2, s.r.coeff(&[0, 0]));
    let (r, th, z) = random_point(&mut rng, &sh, 0.25);
    let f1 = FlowMap::new(&s, 0.35, FlowOpts::default());
    let f2 = FlowMap::new(&s, 0.65, FlowOpts::default());
    let full = FlowMap::new(&s, 1.0, FlowOpts::default());
    let a = f1.transport(&r, &th, &z).unwrap();
    let b = f2.transport(&a.0, &a.1, &a.2).unwrap();
    let c = full.transport(&r, &th, &z).unwrap();
    for (x, y) in b.0.iter().chain(&b.1).chain(&b.2).zip(c.0.iter().chain(&c.1).chain(&c.2)) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn u_bounds() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let s = small_generator(&mut rng, &sh, 0.9);
    let at = FlowMap::new(&s, 1.0, FlowOpts::default()).at(&[1.0, 0.5]).unwrap();
    let (lo, hi) = at.u_singular_range();
    let e = jet_norm(&s, &P, false) / (P.mu * P.mu);
    assert!(lo >= 1.0 - e && hi <= 1.0 + e && hi <= 2.0, "{lo} {hi} {e}");
}

#[test]
fn first_lie_term_is_the_bracket() {
    let (h, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let s = small_generator(&mut rng, &sh, 0.5);
    let (terms, _) = lie_terms(&h.jet(), &s, &LieOpts::new(20)).unwrap();
    let (b, _) = poisson_jet(&h.jet(), &s, &BracketOpts::new(20)).unwrap();
    assert!(terms[1].max_abs_diff(&b) == 0.0);
    let (same, _) = pullback(&PolyHamiltonian::from_jet(h.jet()), &Jet::zeros(2, &sh), 1.0, &LieOpts::new(20)).unwrap();
    assert_eq!(same.jet, h.jet());
}

#[test]
fn pullback_matches_point_sampling() {
    let (h0, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let s = small_generator(&mut rng, &sh, 0.9);
        let h = h0.jet().add(&random_jet_parts(&mut rng, 2, &sh, 2, 0.1, [true, true, true, true]));
        let (pb, _) = pullback(&PolyHamiltonian::from_jet(h.clone()), &s, 1.0, &LieOpts::new(40)).unwrap();
        let fm = FlowMap::new(&s, 1.0, FlowOpts::default());
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for _ in 0..8 {
            let (r, th, z) = random_point(&mut rng, &sh, 0.25);
            let (r1, t1, z1) = fm.transport_point(&r, &th, &z).unwrap();
            let direct = h.eval(&r1, &t1, &z1);
            worst = worst.max((pb.jet.eval(&r, &th, &z) - direct).abs());
            scale = scale.max(direct.abs());
        }
        assert!(worst <= 1e-8 * scale, "{worst} vs {scale}");
    }
}

#[test]
fn pullback_norm_inequality() {
    let (_, sh) = kg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mu_prime = 0.25;
    let pp = NormParams { sigma: 0.25, mu: mu_prime, ..P };
    for _ in 0..10 {
        let s = small_generator(&mut rng, &sh, 0.9);
        let h = random_jet(&mut rng, 2, &sh, 2, 1.0, 0.5);
        let (pb, _) = pullback(&PolyHamiltonian::from_jet(h.clone()), &s, 1.0, &LieOpts::new(40)).unwrap();
        let ratio = jet_norm(&pb.jet, &pp, false) / jet_norm(&h, &P, false);
        assert!(ratio <= 4.0 * P.mu / (P.mu - mu_prime), "{ratio}");
    }
}
