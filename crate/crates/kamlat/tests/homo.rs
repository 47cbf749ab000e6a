use kamlat::blockmat::BlockShape;
use kamlat::fixtures::{random_jet, random_normal_form};
use kamlat::homo::{residual, solve_homological, HomoOpts, NormalFormHam};
use kamlat::jets::{jet_norm, Jet, NormParams};
use kamlat::modes::{AdmissibleSet, Clustering, ModeIndex, SpectralModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kg(w: u32) -> (NormalFormHam, std::sync::Arc<BlockShape>) {
    let model = SpectralModel::kg(1.0, 1.0, 2);
    let adm = AdmissibleSet::new(&model, vec![ModeIndex::new(1, 0), ModeIndex::new(2, 1)], vec![1.0, 1.5]).unwrap();
    let clus = Clustering::enumerate(&model, w).unwrap().without(&adm.modes);
    let h = NormalFormHam::from_model(&model, &adm, &clus, &[1.3, 1.7]).unwrap();
    let sh = h.shape().clone();
    (h, sh)
}

fn params() -> NormParams {
    NormParams { sigma: 0.1, mu: 0.5, s: 2.0, beta: 0.25 }
}

#[test]
fn residual_with_perturbed_normal_form() {
    let (mut h, sh) = kg(4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    h.a = h.a.add(&random_normal_form(&mut rng, &sh, 1e-3)).unwrap();
    assert!(h.a.is_normal_form(1e-14));
    let f = random_jet(&mut rng, 2, &sh, 5, 1e-6, 0.5);
    let opts = HomoOpts { kappa: 1e-9, n_trunc: 3, s: 2.0, sigma: 0.1 };
    let sol = solve_homological(&f, &h, &opts).unwrap();
    let res = residual(&f, &h, &sol);
    let scale = jet_norm(&f, &params(), false);
    assert!(res.max_abs() <= 1e-10 * scale, "{} vs {}", res.max_abs(), scale);
    assert!(sol.hhat.b.is_normal_form(1e-12));
    assert!(sol.s.reality_defect() < 1e-20);
    assert!(!sol.r.is_zero());
}

#[test]
fn mean_only_and_linearity() {
    let (h, sh) = kg(3);
    let mut f = Jet::zeros(2, &sh);
    f.theta = kamlat::fourier::Series::scalar(2, &[(vec![0, 0], kamlat::C64::new(0.5, 0.0))]);
    let opts = HomoOpts { kappa: 1e-9, n_trunc: 3, s: 2.0, sigma: 0.1 };
    let sol = solve_homological(&f, &h, &opts).unwrap();
    assert!(sol.s.is_zero());
    assert_eq!(sol.hhat.c, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f1 = random_jet(&mut rng, 2, &sh, 3, 1.0, 0.5);
    let f2 = random_jet(&mut rng, 2, &sh, 3, 1.0, 0.5);
    let s1 = solve_homological(&f1, &h, &opts).unwrap().s;
    let s2 = solve_homological(&f2, &h, &opts).unwrap().s;
    let s12 = solve_homological(&f1.scale(2.0).add(&f2), &h, &opts).unwrap().s;
    assert!(s12.max_abs_diff(&s1.scale(2.0).add(&s2)) < 1e-10 * s12.max_abs());
}
