use std::sync::Arc;

use kamlat::blockmat::{lemma_constants, BlockMatrix, BlockShape, ModeVector};
use kamlat::fixtures::{random_blockmat, random_jet, JetFixture};
use kamlat::homo::{solve_homological, HomoOpts, NormalFormHam};
use kamlat::jets::{jet_norm, poisson_jet, BracketOpts, NormParams};
use kamlat::kam::parameter_point;
use kamlat::modes::{check_kg_gaps, sample_melnikov, AdmissibleSet, Clustering, Family, ModeIndex, SpectralModel};
use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qho_shape(w: u32) -> Arc<BlockShape> {
    BlockShape::new(&Clustering::enumerate(&SpectralModel::qho(1), w).unwrap())
}

fn kg_h(w: u32, rho: &[f64]) -> NormalFormHam {
    let model = SpectralModel::kg(1.0, 1.0, 2);
    let adm = AdmissibleSet::new(&model, vec![ModeIndex::new(1, 0), ModeIndex::new(2, 1)], vec![1.0, 1.5]).unwrap();
    let clus = Clustering::enumerate(&model, w).unwrap().without(&adm.modes);
    NormalFormHam::from_model(&model, &adm, &clus, rho).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, sh: &Arc<BlockShape>) -> ModeVector<f64> {
    let d = 2 * sh.n_modes();
    ModeVector::from_data(sh, Array1::from_shape_fn(d, |_| rng.random::<f64>() * 2.0 - 1.0)).unwrap()
}

const REL: f64 = 1.0 + 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn block_product_matches_dense(seed in any::<u64>(), w in 1u32..7) {
        let sh = qho_shape(w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_blockmat(&mut rng, &sh, 1.0);
        let b = random_blockmat(&mut rng, &sh, 1.0);
        let ab = a.mul(&b).unwrap().to_dense();
        let dense = a.to_dense().dot(&b.to_dense());
        let err = (&ab - &dense).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(err < 1e-12, "{}", err);
        let z = random_vec(&mut rng, &sh);
        let az = a.apply(&z).unwrap().data;
        let dz = a.to_dense().dot(&z.data);
        prop_assert!((&az - &dz).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn algebra_inequalities(seed in any::<u64>(), beta in 0.05f64..0.5) {
        let w = 10;
        let s = 2.0;
        let sh = qho_shape(w);
        let weights: Vec<f64> = (1..=w).map(f64::from).collect();
        let c = lemma_constants(&weights, beta, s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_blockmat(&mut rng, &sh, 1.0);
        let b = random_blockmat(&mut rng, &sh, 1.0);
        let (x, y) = (random_vec(&mut rng, &sh), random_vec(&mut rng, &sh));
        let ap = a.norm_beta_plus(beta);
        let ab = a.mul(&b).unwrap();
        let ba = b.mul(&a).unwrap();
        prop_assert!(ab.norm_beta(beta) <= REL * c[0] * ap * b.norm_beta(beta));
        prop_assert!(ba.norm_beta(beta) <= REL * c[0] * ap * b.norm_beta(beta));
        prop_assert!(ab.norm_beta_plus(beta) <= REL * c[1] * ap * b.norm_beta_plus(beta));
        let ax = a.apply(&x).unwrap();
        prop_assert!(ax.norm_l(beta) <= REL * c[2] * ap * x.norm_s(s));
        prop_assert!(ax.norm_l(beta) <= REL * c[3] * a.norm_beta(beta) * x.norm_l_plus(beta));
        prop_assert!(ax.norm_l(beta) <= REL * c[4] * a.norm_beta(beta) * x.norm_s(s));
        prop_assert!(ax.norm_l_plus(beta) <= REL * c[5] * ap * x.norm_s(s));
        prop_assert!(ax.norm_l_plus(beta) <= REL * c[6] * ap * x.norm_l_plus(beta));
        let xy = BlockMatrix::outer(&x, &y).unwrap();
        prop_assert!(xy.norm_beta(beta) <= REL * x.norm_l(beta) * y.norm_l(beta));
        prop_assert!(x.norm_s(s) >= (1.0 - 1e-12) * x.norm_l(beta));
    }

    #[test]
    fn projection_is_idempotent_and_contractive(seed in any::<u64>(), w in 1u32..7, beta in 0.0f64..1.0) {
        let sh = qho_shape(w);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_blockmat(&mut rng, &sh, 1.0);
        let p = a.nf_project();
        prop_assert!(p.is_normal_form(1e-14));
        prop_assert!(p.nf_project().max_abs_diff(&p) < 1e-15);
        prop_assert!(p.norm_beta(beta) <= REL * a.norm_beta(beta));
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(seed in any::<u64>(), c in -3.0f64..3.0) {
        let h = kg_h(3, &[1.3, 1.7]);
        let sh = h.shape().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_jet(&mut rng, 2, &sh, 3, 1.0, 0.5);
        let g = random_jet(&mut rng, 2, &sh, 3, 1.0, 0.5);
        let k = random_jet(&mut rng, 2, &sh, 3, 1.0, 0.5);
        let opts = BracketOpts::new(8);
        let (fg, _) = poisson_jet(&f, &g, &opts).unwrap();
        let (gf, _) = poisson_jet(&g, &f, &opts).unwrap();
        let scale = fg.max_abs().max(1.0);
        prop_assert!(fg.add(&gf).max_abs() <= 1e-13 * scale);
        let (lhs, _) = poisson_jet(&f.scale(c).add(&k), &g, &opts).unwrap();
        let (kg, _) = poisson_jet(&k, &g, &opts).unwrap();
        let rhs = fg.scale(c).add(&kg);
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * scale);
    }

    #[test]
    fn plus_norm_dominates(seed in any::<u64>(), sigma in 0.01f64..0.5) {
        let h = kg_h(4, &[1.1, 1.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_jet(&mut rng, 2, h.shape(), 4, 1.0, 0.5);
        let p = NormParams { sigma, mu: 0.5, s: 2.0, beta: 0.25 };
        prop_assert!(jet_norm(&f, &p, true) >= jet_norm(&f, &p, false));
    }

    #[test]
    fn jet_fixture_round_trip(seed in any::<u64>(), kmax in 0u32..5) {
        let h = kg_h(3, &[1.2, 1.4]);
        let sh = h.shape().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_jet(&mut rng, 2, &sh, kmax, 1.0, 0.7);
        let json = JetFixture::from_jet(&f, kmax).to_json();
        let back = JetFixture::from_json(&json).unwrap().to_jet(&sh).unwrap();
        prop_assert_eq!(back.max_abs_diff(&f), 0.0);
    }

    #[test]
    fn homological_solve_is_linear(seed in any::<u64>(), alpha in -2.0f64..2.0) {
        let h = kg_h(3, &[1.3, 1.7]);
        let sh = h.shape().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f1 = random_jet(&mut rng, 2, &sh, 4, 1e-6, 0.5);
        let f2 = random_jet(&mut rng, 2, &sh, 4, 1e-6, 0.5);
        let opts = HomoOpts { kappa: 1e-9, n_trunc: 4, s: 2.0, sigma: 0.1 };
        let s1 = solve_homological(&f1, &h, &opts).unwrap();
        let s2 = solve_homological(&f2, &h, &opts).unwrap();
        let s12 = solve_homological(&f1.scale(alpha).add(&f2), &h, &opts).unwrap();
        let lin = s1.s.scale(alpha).add(&s2.s);
        prop_assert!(s12.s.max_abs_diff(&lin) <= 1e-9 * lin.max_abs().max(1e-30));
        let rl = s1.r.scale(alpha).add(&s2.r);
        prop_assert!(s12.r.max_abs_diff(&rl) <= 1e-9 * rl.max_abs().max(1e-12));
    }

    #[test]
    fn kg_level_gaps(mass in 0.05f64..12.0) {
        let rep = check_kg_gaps(mass, 60);
        prop_assert!(rep.pass, "{:?}", rep);
    }

    #[test]
    fn cluster_sizes(w in 1u32..40) {
        let kg = Clustering::enumerate(&SpectralModel::kg(1.0, 1.0, 2), w).unwrap();
        let qho = Clustering::enumerate(&SpectralModel::qho(2), w).unwrap();
        for l in &kg.levels {
            prop_assert_eq!(l.size(), 2 * l.w as usize + 1);
        }
        for l in &qho.levels {
            prop_assert_eq!(l.size(), l.w as usize);
        }
        let m = SpectralModel::qho(2);
        for a in 1..=w {
            let d = m.normal_eigenvalue(a) - m.normal_eigenvalue(1);
            prop_assert_eq!(d, d.round());
        }
    }

    #[test]
    fn parameter_points_are_deterministic(i in 0usize..1000, p in 1usize..6, lo in -2.0f64..2.0, len in 0.1f64..3.0) {
        let x = parameter_point(i, p, lo, lo + len);
        prop_assert_eq!(x.len(), p);
        prop_assert_eq!(&x, &parameter_point(i, p, lo, lo + len));
        prop_assert!(x.iter().all(|&v| v >= lo && v < lo + len));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn melnikov_sampling_is_reproducible(seed in any::<u64>(), kappa in 1e-5f64..1e-2) {
        let model = SpectralModel::kg(1.0, 1.0, 2);
        let adm = AdmissibleSet::new(&model, vec![ModeIndex::new(1, 0), ModeIndex::new(2, 1)], vec![1.0, 1.5]).unwrap();
        let clus = Clustering::enumerate(&model, 4).unwrap().without(&adm.modes);
        let om = |r: &[f64]| kamlat::modes::frequencies(&model, &adm, r);
        let a = sample_melnikov(&model, &clus, &om, kappa, 2, 128, seed, &Family::ALL);
        let b = sample_melnikov(&model, &clus, &om, kappa, 2, 128, seed, &Family::ALL);
        prop_assert_eq!(format!("{:?}", a), format!("{:?}", b));
    }
}
