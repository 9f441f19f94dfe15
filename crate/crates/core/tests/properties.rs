use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stathyper::deformation::{
    affine_shift, best_pivot, classify, complete_reversible, correlation_matrix, delta_entropy, delta_weights, Class,
    EntropyHalfSpace,
};
use stathyper::dynamics::{replicator_step, WeightedGraph};
use stathyper::geometry::{entropy_at, geometry_at, hessian_f};
use stathyper::model::{gibbs_weights, log_sum_exp, shannon_entropy};
use stathyper::potential::{closed_form_weights, cocycle_residual, log_ratio_offsets, PotentialParams};
use stathyper::testkit::{random_affine, random_model, random_point, uniform_vector};
use stathyper::{parse_model, Evaluation, StatisticalModel};

fn instance(seed: u64) -> (ChaCha8Rng, StatisticalModel, Vec<f64>, Evaluation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=5));
    let model = random_model(&mut rng, n, m);
    let x = random_point(&mut rng, n);
    let eval = model.evaluate(&x).unwrap();
    (rng, model, x, eval)
}

fn symmetric_min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn weights_lie_on_simplex_and_entropy_is_bounded(seed in any::<u64>()) {
        let (_, model, _, eval) = instance(seed);
        let m = model.m() as f64;
        prop_assert!(eval.w.iter().all(|&w| w > 0.0));
        prop_assert!((eval.w.sum() - 1.0).abs() <= 1e-14);
        prop_assert!(eval.entropy >= -1e-15 && eval.entropy <= m.ln() + 1e-12);
        prop_assert!(eval.free_energy >= eval.f().max() - 1e-15);
        prop_assert!((eval.entropy - shannon_entropy(eval.w.as_slice())).abs() <= 1e-12);
        prop_assert!((eval.entropy - (eval.free_energy - eval.fbar)).abs() <= 1e-12 * eval.f().amax().max(1.0));
    }

    #[test]
    fn correlation_matrix_annihilates_constants(seed in any::<u64>()) {
        let (_, _, _, eval) = instance(seed);
        let h = correlation_matrix(&eval.w);
        let ones = DVector::from_element(eval.m(), 1.0);
        prop_assert!((&h * ones).amax() <= 1e-15);
        prop_assert!(symmetric_min_eigenvalue(&h) >= -1e-15);
    }

    #[test]
    fn metric_and_hessian_are_consistent(seed in any::<u64>()) {
        let (_, _, _, eval) = instance(seed);
        let geo = geometry_at(&eval);
        let p = hessian_f(&eval);
        let grad = &eval.fbar_i;
        prop_assert!((geo.det_g - (1.0 + grad.norm_squared())).abs() <= 1e-12 * geo.det_g);
        prop_assert!((geo.g.determinant() - geo.det_g).abs() <= 1e-10 * geo.det_g);
        prop_assert!((geo.normal.norm() - 1.0).abs() <= 1e-14);
        prop_assert!((&p - p.transpose()).amax() == 0.0);
        let omega = &p / geo.det_g.sqrt();
        prop_assert!((&geo.omega - omega).amax() <= 1e-13 * p.amax().max(1.0));
    }

    #[test]
    fn riemann_symmetries(seed in any::<u64>()) {
        let (_, _, _, eval) = instance(seed);
        let geo = geometry_at(&eval);
        let r = &geo.riemann;
        let n = r.dim();
        let scale = r.max_abs().max(1.0);
        for i in 0..n { for k in 0..n { for l in 0..n { for j in 0..n {
            prop_assert!((r.get(i, k, l, j) + r.get(k, i, l, j)).abs() <= 1e-14 * scale);
            prop_assert!((r.get(i, k, l, j) + r.get(i, k, j, l)).abs() <= 1e-14 * scale);
            prop_assert!((r.get(i, k, l, j) - r.get(l, j, i, k)).abs() <= 1e-14 * scale);
        }}}}
    }

    #[test]
    fn shape_operator_determinant_is_gauss_kronecker(seed in any::<u64>()) {
        let (_, model, _, eval) = instance(seed);
        let geo = geometry_at(&eval);
        prop_assert!(geo.weingarten_residual <= 1e-10 * geo.weingarten.amax().max(1.0));
        prop_assert!((geo.det_weingarten - geo.gauss_kronecker).abs() <= 1e-8 * geo.gauss_kronecker.abs().max(1e-6));
        // F is convex for affine exponents
        if model.affine_parts().is_some() {
            prop_assert!(geo.principal_curvatures.iter().all(|&k| k >= -1e-12));
        }
    }

    #[test]
    fn geometric_entropy_matches_free_energy_form(seed in any::<u64>()) {
        let (_, model, _, eval) = instance(seed);
        let parts = entropy_at(&eval);
        let scale = eval.f().amax().max(eval.x.amax()).max(1.0);
        prop_assert!((parts.entropy - parts.entropy_geometric).abs() <= 1e-11 * scale);
        if model.is_linear() {
            prop_assert!(parts.correction.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn weight_variation_is_tangent_and_shift_invariant(seed in any::<u64>(), c in -3.0f64..3.0) {
        let (mut rng, model, _, eval) = instance(seed);
        let df = DVector::from_vec(uniform_vector(&mut rng, model.m(), -1.0, 1.0));
        let dw = delta_weights(&eval, &df).unwrap();
        prop_assert!(dw.sum().abs() <= 1e-15);
        let shifted = delta_weights(&eval, &df.add_scalar(c)).unwrap();
        prop_assert!((&dw - shifted).amax() <= 1e-14);
        let constant = DVector::from_element(model.m(), c);
        prop_assert!(delta_weights(&eval, &constant).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_variation_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let (mut rng, model, _, eval) = instance(seed);
        let df = DVector::from_vec(uniform_vector(&mut rng, model.m(), -1.0, 1.0));
        let ds = delta_entropy(&eval, &df).unwrap();
        let scaled = delta_entropy(&eval, &(&df * a)).unwrap();
        let scale = eval.f().amax().max(1.0);
        prop_assert!((scaled - a * ds).abs() <= 1e-12 * scale);
    }

    #[test]
    fn completed_reversible_deformations_classify_reversible(seed in any::<u64>()) {
        let (mut rng, model, _, eval) = instance(seed);
        prop_assume!(model.m() >= 2);
        let pivot = best_pivot(&eval);
        let partial = uniform_vector(&mut rng, model.m() - 1, -1.0, 1.0);
        if let Ok(df) = complete_reversible(&eval, &partial, pivot) {
            let c = classify(&eval, &df).unwrap();
            prop_assert_eq!(c.class, Class::Reversible);
            prop_assert!(c.reversible.unwrap().holds);
        }
    }

    #[test]
    fn coordinate_shift_matches_half_space(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.gen_range(1..=3), rng.gen_range(2..=5));
        let model = random_affine(&mut rng, n, m);
        let x = random_point(&mut rng, n);
        let v = uniform_vector(&mut rng, n, -1.0, 1.0);
        let shift = affine_shift(&model, &x, &v, 1.0).unwrap();
        let eval = model.evaluate(&x).unwrap();
        let ds = delta_entropy(&eval, &shift.delta_f).unwrap();
        let half = EntropyHalfSpace::at(&model, &x).unwrap();
        let scale = eval.f().amax().max(1.0).powi(2);
        prop_assert!((shift.delta_s - ds).abs() <= 1e-12 * scale);
        prop_assert!((half.rate(&DVector::from_vec(v)) - ds).abs() <= 1e-12 * scale);
        prop_assert!((shift.delta_w - delta_weights(&eval, &shift.delta_f).unwrap()).amax() <= 1e-15);
    }

    #[test]
    fn replicator_preserves_simplex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=6);
        let w = gibbs_weights(&uniform_vector(&mut rng, m, -2.0, 2.0));
        let fitness = DVector::from_vec(uniform_vector(&mut rng, m, 0.1, 3.0));
        let step = replicator_step(&w, &fitness).unwrap();
        prop_assert!(!step.negative_fitness);
        prop_assert!(step.w.iter().all(|&v| v > 0.0));
        prop_assert!((step.w.sum() - 1.0).abs() <= 1e-14);
        let flat = DVector::from_element(m, rng.gen_range(0.1..3.0));
        prop_assert!((replicator_step(&w, &flat).unwrap().w - &w).amax() <= 1e-15);
    }

    #[test]
    fn product_joint_laplacian_is_correlation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=6);
        let w = gibbs_weights(&uniform_vector(&mut rng, m, -2.0, 2.0));
        let graph = WeightedGraph::product_joint(&w).unwrap();
        prop_assert!((graph.laplacian() - correlation_matrix(&w)).amax() <= 1e-15);
    }

    #[test]
    fn gibbs_is_the_unshifted_potential(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=6);
        let f = uniform_vector(&mut rng, m, -30.0, 30.0);
        let h = closed_form_weights(&f, &PotentialParams::gibbs(m)).unwrap();
        prop_assert!((&h - gibbs_weights(&f)).amax() <= 1e-15);
        prop_assert!(cocycle_residual(&log_ratio_offsets(&f, &h)) <= 1e-12);
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>()) {
        let (_, model, x, eval) = instance(seed);
        let back = parse_model(&model.to_json()).unwrap();
        prop_assert_eq!(back.n(), model.n());
        prop_assert_eq!(back.m(), model.m());
        let again = back.evaluate(&x).unwrap();
        prop_assert!((again.f() - eval.f()).amax() <= 1e-14 * eval.f().amax().max(1.0));
    }

    #[test]
    fn canonical_form_keeps_free_energy(seed in any::<u64>(), copies in 1usize..4) {
        let (_, model, x, eval) = instance(seed);
        let doc = model.to_document();
        let repeated = match (doc.a.clone(), doc.b.clone(), doc.f.clone()) {
            (Some(a), Some(b), _) => {
                let mut a2 = a.clone();
                let mut b2 = b.clone();
                for _ in 0..copies { a2.push(a[0].clone()); b2.push(b[0]); }
                let rows = a2.len();
                StatisticalModel::affine(
                    DMatrix::from_fn(rows, model.n(), |r, c| a2[r][c]),
                    DVector::from_vec(b2),
                ).unwrap()
            }
            (_, _, Some(f)) => {
                let mut f2 = f.clone();
                for _ in 0..copies { f2.push(f[0].clone()); }
                StatisticalModel::parse_expressions(model.n(), &f2).unwrap()
            }
            _ => unreachable!(),
        };
        let canonical = repeated.canonicalize();
        prop_assert_eq!(canonical.m(), model.m());
        let f_rep = repeated.free_energy(&x).unwrap();
        let f_can = canonical.free_energy(&x).unwrap();
        prop_assert!((f_rep - f_can).abs() <= 1e-13 * f_rep.abs().max(1.0));
        let extra = log_sum_exp(&[eval.free_energy, eval.f()[0] + (copies as f64).ln()]);
        prop_assert!((f_rep - extra).abs() <= 1e-13 * f_rep.abs().max(1.0));
    }
}
