//! Property suites over random instances, one per verification criterion.
//! Each suite draws from its own seeded stream and reports the worst residual.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::deformation::{
    affine_shift, best_pivot, classify, complete_reversible, delta_entropy, delta_entropy_forms, delta_weights,
    moment_correlation, tolerance_scale, total_uncorrelation_test, Class, Deformation, EntropyHalfSpace,
    VariationOptions,
};
use crate::dynamics::{
    product_joint_laplacian_matches, replicator_orbit, stationarity_equivalence, Shift, DENOMINATOR_FLOOR,
};
use crate::error::{Error, Result};
use crate::fdcheck::variation_fd;
use crate::geometry::{det_metric, entropy_at, gauss_kronecker, geometry_at, weingarten_componentwise, weingarten_matrix};
use crate::integral::cone::{linear_entropy_volume_check, ConeRegion, SURFACE_TOLERANCE};
use crate::integral::{asymptote_s2, closed_s2, entropy_integral};
use crate::model::{gibbs_weights, shannon_entropy, StatisticalModel};
use crate::potential::{
    closed_form_jacobian, closed_form_weights, fit_params, integrate_weight_pde, integrate_weight_pde_polyline,
    weight_pde_matrix, PotentialParams,
};
use crate::testkit::{random_affine, random_deformation, random_linear, random_model, random_point, uniform_vector};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Trial counts for every suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSize {
    pub entropy_models: usize,
    pub fd_instances: usize,
    pub classification_trials: usize,
    pub uncorrelation_points: usize,
    pub reversible_trials: usize,
    pub weingarten_trials: usize,
    pub super_ideal_points: usize,
    pub potential_trials: usize,
    pub rk4_steps: usize,
    pub stationarity_trials: usize,
    pub orbits: usize,
    pub orbit_steps: usize,
    pub volume_pairs: usize,
    pub volume_samples: usize,
    pub ideal_trials: usize,
}

impl SuiteSize {
    pub fn full() -> Self {
        SuiteSize {
            entropy_models: 500,
            fd_instances: 100,
            classification_trials: 1000,
            uncorrelation_points: 200,
            reversible_trials: 500,
            weingarten_trials: 500,
            super_ideal_points: 100,
            potential_trials: 50,
            rk4_steps: 1000,
            stationarity_trials: 1000,
            orbits: 20,
            orbit_steps: 1000,
            volume_pairs: 20,
            volume_samples: 1_000_000,
            ideal_trials: 1000,
        }
    }

    pub fn quick() -> Self {
        SuiteSize {
            entropy_models: 100,
            fd_instances: 20,
            classification_trials: 200,
            uncorrelation_points: 40,
            reversible_trials: 100,
            weingarten_trials: 100,
            super_ideal_points: 20,
            potential_trials: 10,
            rk4_steps: 1000,
            stationarity_trials: 200,
            orbits: 5,
            orbit_steps: 1000,
            volume_pairs: 4,
            volume_samples: 200_000,
            ideal_trials: 200,
        }
    }
}

fn stream(seed: u64, id: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

fn report(id: u8, name: &'static str, outcome: Result<(bool, String)>) -> CriterionReport {
    match outcome {
        Ok((passed, detail)) => CriterionReport { id, name, passed, detail },
        Err(e) => CriterionReport {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (StatisticalModel, Vec<f64>) {
    let model = random_model(rng, n, m);
    let x = random_point(rng, n);
    (model, x)
}

pub fn entropy_identities(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(1, "entropy identities", (|| {
        let mut rng = stream(seed, 1);
        let (mut worst_shannon, mut worst_geom) = (0f64, 0f64);
        for _ in 0..size.entropy_models {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=8);
            let (model, x) = instance(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let dec = entropy_at(&ev);
            worst_shannon = worst_shannon.max((dec.entropy - shannon_entropy(ev.w.as_slice())).abs());
            worst_geom = worst_geom.max((dec.entropy_geometric - dec.entropy).abs());
        }
        Ok((
            worst_shannon <= 1e-10 && worst_geom <= 1e-10,
            format!(
                "{} models; max |F - fbar + sum w ln w| = {worst_shannon:.2e}, max |S_geom - S| = {worst_geom:.2e}",
                size.entropy_models
            ),
        ))
    })())
}

pub fn variation_finite_differences(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(2, "variation formulas vs finite differences", (|| {
        let mut rng = stream(seed, 2);
        let mut failures = Vec::new();
        let mut worst_forms = 0f64;
        let mut min_order = f64::INFINITY;
        let (mut by_order, mut at_floor) = (0usize, 0usize);
        for trial in 0..size.fd_instances {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(2..=5);
            let (model, x) = instance(&mut rng, n, m);
            let deformation = random_deformation(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let delta = deformation.resolve(&model, &x)?;
            for r in variation_fd(&ev, &delta, VariationOptions::default())? {
                if !r.passed {
                    failures.push(format!("trial {trial} {}: errors {:?}", r.name, r.errors));
                } else if r.order >= crate::fdcheck::MIN_ORDER {
                    min_order = min_order.min(r.order);
                    by_order += 1;
                } else {
                    at_floor += 1;
                }
            }
            let forms = delta_entropy_forms(&ev, &delta.f)?;
            let scale = tolerance_scale(ev.f(), &delta.f);
            worst_forms = worst_forms.max((forms.intertwined - forms.fluctuation).abs() / scale);
        }
        let passed = failures.is_empty() && worst_forms <= 1e-12;
        let mut detail = format!(
            "{} instances x 7 quantities; {by_order} checks with order >= 1.8 (min {min_order:.2}), {at_floor} roundoff-limited; max scaled |form difference| = {worst_forms:.2e}",
            size.fd_instances
        );
        if !failures.is_empty() {
            detail.push_str(&format!("; {} failures, first: {}", failures.len(), failures[0]));
        }
        Ok((passed, detail))
    })())
}

pub fn classification(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(3, "thermodynamic classification", (|| {
        let mut rng = stream(seed, 3);
        let (mut bad, mut worst_var) = (0usize, 0f64);
        for _ in 0..size.classification_trials {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(2..=6);
            let (model, x) = instance(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let c = rng.gen_range(-3.0..3.0);
            if classify(&ev, &DVector::from_element(m, c))?.class != Class::Reversible {
                bad += 1;
            }
            let centered = -ev.f().add_scalar(-ev.fbar);
            let variance: f64 = (0..m).map(|a| ev.w[a] * (ev.f()[a] - ev.fbar).powi(2)).sum();
            let cl = classify(&ev, &centered)?;
            worst_var = worst_var.max((cl.delta_s - variance).abs());
            if variance > cl.tolerance && cl.class != Class::Increasing {
                bad += 1;
            }
            let df = DVector::from_vec(uniform_vector(&mut rng, m, -1.0, 1.0));
            let (p, q) = (classify(&ev, &df)?, classify(&ev, &(-&df))?);
            let mirrored = matches!(
                (p.class, q.class),
                (Class::Increasing, Class::Decreasing) | (Class::Decreasing, Class::Increasing) | (Class::Reversible, Class::Reversible)
            );
            if !mirrored || (p.delta_s + q.delta_s).abs() > 1e-12 * tolerance_scale(ev.f(), &df) {
                bad += 1;
            }
        }
        Ok((
            bad == 0 && worst_var <= 1e-10,
            format!(
                "{} trials; {bad} misclassified; max |dS - Var_w(f)| = {worst_var:.2e}",
                size.classification_trials
            ),
        ))
    })())
}

pub fn total_uncorrelation(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(4, "total uncorrelation", (|| {
        let mut rng = stream(seed, 4);
        let (mut bad, mut smallest_witness) = (0usize, f64::INFINITY);
        for m in 2..=5 {
            let mut done = 0;
            while done < size.uncorrelation_points {
                let n = rng.gen_range(1..=3);
                let model = random_affine(&mut rng, n, m);
                let ev = model.evaluate(&random_point(&mut rng, n))?;
                let constant = DVector::from_element(m, rng.gen_range(-2.0..2.0));
                let generic = DVector::from_vec(uniform_vector(&mut rng, m, -1.0, 1.0));
                match total_uncorrelation_test(&ev, &constant) {
                    Err(Error::DegeneratePoint { .. }) => continue,
                    Err(e) => return Err(e),
                    Ok(t) => bad += usize::from(!t.uncorrelated),
                }
                let t = total_uncorrelation_test(&ev, &generic)?;
                match t.witness_u {
                    Some(u) if u as usize <= m => {
                        let corr = moment_correlation(&ev, &generic, u)?;
                        let scale = 1f64.max(ev.f().amax()).powi(u as i32) * 1f64.max(generic.amax());
                        smallest_witness = smallest_witness.min(corr.abs() / scale);
                        bad += usize::from(corr.abs() <= 1e-10 * scale);
                    }
                    _ => bad += 1,
                }
                done += 1;
            }
        }
        Ok((
            bad == 0,
            format!(
                "m = 2..5, {} points each; {bad} failures; smallest scaled witness correlation {smallest_witness:.2e}",
                size.uncorrelation_points
            ),
        ))
    })())
}

pub fn reversible_solver(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(5, "reversible solver", (|| {
        let mut rng = stream(seed, 5);
        let mut worst = 0f64;
        for _ in 0..size.reversible_trials {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(2..=7);
            let (model, x) = instance(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let partial = uniform_vector(&mut rng, m - 1, -1.0, 1.0);
            let full = complete_reversible(&ev, &partial, best_pivot(&ev))?;
            let forms = delta_entropy_forms(&ev, &full)?;
            worst = worst.max(forms.fluctuation.abs() / tolerance_scale(ev.f(), &full));
        }
        let e = std::f64::consts::E;
        let mean_pivot = StatisticalModel::affine(DMatrix::zeros(3, 1), DVector::from_vec(vec![0.0, e / (1.0 + e), 1.0]))?;
        let ev = mean_pivot.evaluate(&[0.0])?;
        let singular = matches!(
            crate::deformation::solve_reversible_component(&ev, &[1.0, 1.0], 1),
            Err(Error::SingularPivot { .. })
        );
        Ok((
            worst <= 1e-12 && singular,
            format!(
                "{} trials; max scaled |dS| = {worst:.2e}; pivot at the mean rejected: {singular}",
                size.reversible_trials
            ),
        ))
    })())
}

pub fn weingarten_consistency(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(6, "shape operator and Gauss-Kronecker curvature", (|| {
        let mut rng = stream(seed, 6);
        let (mut w_res, mut k_res, mut lemma_res) = (0f64, 0f64, 0f64);
        for _ in 0..size.weingarten_trials {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(n + 1..=n + 4);
            let (model, x) = instance(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let w_mat = weingarten_matrix(&ev);
            let w_comp = weingarten_componentwise(&ev);
            w_res = w_res.max((&w_mat - &w_comp).amax() / 1f64.max(w_mat.amax()));
            let k = gauss_kronecker(&ev);
            let det_w = w_mat.determinant();
            k_res = k_res.max((det_w - k).abs() / k.abs().max(1e-6));
            let d = det_metric(&ev);
            let lemma = (DMatrix::identity(n, n) * d - &ev.fbar_i * ev.fbar_i.transpose()).determinant();
            lemma_res = lemma_res.max((lemma - d.powi(n as i32 - 1)).abs() / d.powi(n as i32 - 1));
        }
        let mut super_k = 0f64;
        for _ in 0..size.super_ideal_points {
            let n = rng.gen_range(1..=5);
            let model = StatisticalModel::super_ideal(n)?;
            let x = uniform_vector(&mut rng, n, -3.0, 3.0);
            super_k = super_k.max(geometry_at(&model.evaluate(&x)?).gauss_kronecker.abs());
        }
        Ok((
            w_res <= 1e-10 && k_res <= 1e-8 && lemma_res <= 1e-10 && super_k <= 1e-12,
            format!(
                "{} trials; W forms {w_res:.2e}; det W vs K {k_res:.2e} (relative); determinant lemma {lemma_res:.2e}; super-ideal max |K| {super_k:.2e}",
                size.weingarten_trials
            ),
        ))
    })())
}

pub fn potential_checks(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(7, "weight potential", (|| {
        let mut rng = stream(seed, 7);
        let (mut straight, mut path, mut round_trip, mut jacobian) = (0f64, 0f64, 0f64, 0f64);
        for _ in 0..size.potential_trials {
            let m = rng.gen_range(2..=5);
            let gamma = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..2.0) };
            let mut sigma = uniform_vector(&mut rng, m, -1.0, 1.0);
            sigma[0] = 0.0;
            let params = PotentialParams { gamma, sigma };
            let f0 = uniform_vector(&mut rng, m, -1.0, 1.0);
            let f1 = uniform_vector(&mut rng, m, -1.0, 1.0);
            let h0 = closed_form_weights(&f0, &params)?;
            let exact = closed_form_weights(&f1, &params)?;
            let direct = integrate_weight_pde(&f0, &f1, h0.as_slice(), size.rk4_steps)?;
            straight = straight.max((&direct - &exact).amax());
            let via_a = vec![f0.clone(), uniform_vector(&mut rng, m, -1.5, 1.5), f1.clone()];
            let via_b = vec![
                f0.clone(),
                uniform_vector(&mut rng, m, -1.5, 1.5),
                uniform_vector(&mut rng, m, -1.5, 1.5),
                f1.clone(),
            ];
            let ha = integrate_weight_pde_polyline(&via_a, h0.as_slice(), size.rk4_steps)?;
            let hb = integrate_weight_pde_polyline(&via_b, h0.as_slice(), size.rk4_steps)?;
            path = path.max((&ha - &hb).amax()).max((&ha - &direct).amax()).max((&ha - &exact).amax());
            let fitted = fit_params(&f0, h0.as_slice())?;
            round_trip = round_trip.max((fitted.gamma - params.gamma).abs());
            for (a, b) in fitted.sigma.iter().zip(&params.sigma) {
                round_trip = round_trip.max((a - b).abs());
            }
            let jac = closed_form_jacobian(&f0, &params)?;
            jacobian = jacobian.max((jac - weight_pde_matrix(&h0)).amax());
        }
        Ok((
            straight <= 1e-9 && path <= 1e-9 && round_trip <= 1e-10 && jacobian <= 1e-10,
            format!(
                "{} trials at {} RK4 steps; straight {straight:.2e}; path independence {path:.2e}; fit round trip {round_trip:.2e}; Jacobian {jacobian:.2e}",
                size.potential_trials, size.rk4_steps
            ),
        ))
    })())
}

pub fn replicator_and_stationarity(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(8, "replicator dynamics and stationarity", (|| {
        let mut rng = stream(seed, 8);
        let (mut defined, mut disagree, mut stationary) = (0usize, 0usize, 0usize);
        for _ in 0..size.stationarity_trials {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(2..=6);
            let (model, x) = instance(&mut rng, n, m);
            let ev = model.evaluate(&x)?;
            let df = match rng.gen_range(0..3) {
                0 => DVector::from_element(m, rng.gen_range(0.5..2.0)),
                1 => complete_reversible(&ev, &uniform_vector(&mut rng, m - 1, -1.0, 1.0), best_pivot(&ev))?,
                _ => DVector::from_vec(uniform_vector(&mut rng, m, -1.0, 1.0)),
            };
            let s = stationarity_equivalence(&ev, &df)?;
            let den_w1 = ev.fbar.abs();
            let den_what = ev.w.dot(&df).abs();
            if den_w1 > DENOMINATOR_FLOOR && den_what > DENOMINATOR_FLOOR {
                defined += 1;
                stationary += usize::from(s.delta_s_zero);
                if s.expectations_equal_w1 != Some(s.delta_s_zero) || s.expectations_equal_what != Some(s.delta_s_zero) {
                    disagree += 1;
                }
            }
        }
        let mut simplex_drift = 0f64;
        let mut left_simplex = 0usize;
        for _ in 0..size.orbits {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(2..=6);
            let (model, x) = instance(&mut rng, n, m);
            let orbit = replicator_orbit(&model, &x, size.orbit_steps, Shift::Auto)?;
            for step in &orbit.steps {
                simplex_drift = simplex_drift.max((step.w.sum() - 1.0).abs());
                left_simplex += usize::from(step.w.iter().any(|&v| !(v >= 0.0)));
            }
        }
        let mut laplacian = 0f64;
        for _ in 0..size.orbits * 10 {
            let m = rng.gen_range(1..=8);
            let w = gibbs_weights(&uniform_vector(&mut rng, m, -2.0, 2.0));
            laplacian = laplacian.max(product_joint_laplacian_matches(&w)?);
        }
        Ok((
            disagree == 0 && simplex_drift <= 1e-10 && left_simplex == 0 && laplacian <= 1e-14,
            format!(
                "{defined} defined trials ({stationary} stationary), {disagree} disagreements; {} orbits of {} steps, max |sum w - 1| {simplex_drift:.2e}; Laplacian vs H {laplacian:.2e}",
                size.orbits, size.orbit_steps
            ),
        ))
    })())
}

pub fn closed_form_integral(_seed: u64, _size: &SuiteSize) -> CriterionReport {
    report(9, "closed-form entropy integral", (|| {
        let start = Instant::now();
        let model = StatisticalModel::super_ideal(2)?;
        let mut worst = 0f64;
        for c in [0.5, 1.0, 2.0] {
            let q = entropy_integral(&model, &[-c, -c], &[c, c], 1e-9)?;
            worst = worst.max((q.value - closed_s2(c)?).abs());
        }
        let near_zero = closed_s2(1e-8)?.abs();
        let ratio = closed_s2(10.0)? / asymptote_s2(10.0);
        let elapsed = start.elapsed().as_secs_f64();
        Ok((
            worst <= 1e-6 && near_zero <= 1e-6 && (ratio - 1.0).abs() <= 0.01 && elapsed <= 60.0,
            format!("max |quadrature - closed| = {worst:.2e}; closed(1e-8) = {near_zero:.2e}; ratio at c = 10: {ratio}; {elapsed:.2}s"),
        ))
    })())
}

/// Random linear pair with a valid simplicial (or, for `n = 2`, occasionally
/// quadrilateral) cone.
pub fn random_cone_region<R: Rng>(rng: &mut R, n: usize) -> ConeRegion {
    loop {
        let (ml, mu) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let lower = random_linear(rng, n, ml);
        let upper = random_linear(rng, n, mu);
        let count = if n == 2 && rng.gen_bool(0.25) { 4 } else { n + 1 };
        let (al, _) = lower.affine_parts().expect("linear");
        let (au, _) = upper.affine_parts().expect("linear");
        let generators: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                let xi = uniform_vector(rng, n, -1.0, 1.0);
                let top = |a: &DMatrix<f64>| {
                    (0..a.nrows())
                        .map(|r| (0..n).map(|c| a[(r, c)] * xi[c]).sum::<f64>())
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let eta = top(al).max(top(au)) + rng.gen_range(0.3..1.5);
                let mut g = xi;
                g.push(eta);
                g
            })
            .collect();
        if let Ok(region) = ConeRegion::new(generators, lower, upper) {
            let spread = DMatrix::from_columns(region.generators());
            if spread.rank(0.05) == n + 1 {
                return region;
            }
        }
    }
}

pub fn volume_identity(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(10, "entropy difference equals (n+1) volume", (|| {
        let mut rng = stream(seed, 10);
        let (mut worst_sigma, mut worst_flux, mut failures) = (0f64, 0f64, 0usize);
        for pair in 0..size.volume_pairs {
            let n = 1 + pair % 2;
            let region = random_cone_region(&mut rng, n);
            let check = linear_entropy_volume_check(&region, size.volume_samples, seed.wrapping_add(pair as u64))?;
            let ratio = (check.delta_s - check.volume_times).abs() / check.mc_sigma;
            worst_sigma = worst_sigma.max(ratio);
            worst_flux = worst_flux.max(check.cone_face_flux.abs());
            failures += usize::from(!(ratio <= 3.0));
        }
        Ok((
            failures == 0 && worst_flux <= SURFACE_TOLERANCE,
            format!(
                "{} pairs, {} samples each; worst |dS - (n+1)vol| / sigma = {worst_sigma:.2}; max |cone-face flux| = {worst_flux:.2e}",
                size.volume_pairs, size.volume_samples
            ),
        ))
    })())
}

/// Random dyadic affine model and direction with `A v = c·1` exactly.
pub fn constant_response_pair<R: Rng>(rng: &mut R, n: usize, m: usize) -> (StatisticalModel, Vec<f64>) {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
    v[n - 1] = [-2.0, -1.0, 1.0, 2.0][rng.gen_range(0..4)];
    let c = rng.gen_range(-8..=8) as f64 / 4.0;
    let mut a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-8..=8) as f64 / 8.0);
    for r in 0..m {
        let partial: f64 = (0..n - 1).map(|i| a[(r, i)] * v[i]).sum();
        a[(r, n - 1)] = (c - partial) / v[n - 1];
    }
    let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    (StatisticalModel::affine(a, b).expect("finite"), v)
}

pub fn ideal_case(seed: u64, size: &SuiteSize) -> CriterionReport {
    report(11, "ideal-case shift formulas and entropy half-space", (|| {
        let mut rng = stream(seed, 11);
        let (mut shift_res, mut nonzero_dw, mut closure_bad, mut boundary_bad) = (0f64, 0usize, 0usize, 0usize);
        for _ in 0..size.ideal_trials {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(2..=6);
            let model = random_affine(&mut rng, n, m);
            let x = random_point(&mut rng, n);
            let v = uniform_vector(&mut rng, n, -1.0, 1.0);
            let tau = rng.gen_range(-1.0..1.0);
            let explicit = affine_shift(&model, &x, &v, tau)?;
            let ev = model.evaluate(&x)?;
            let jet = Deformation::coordinate_shift(v.clone(), tau).resolve(&model, &x)?;
            let general_dw = delta_weights(&ev, &jet.f)?;
            let general_ds = delta_entropy(&ev, &jet.f)?;
            let scale = tolerance_scale(ev.f(), &jet.f);
            shift_res = shift_res
                .max((&explicit.delta_f - &jet.f).amax() / scale)
                .max((&explicit.delta_w - general_dw).amax() / scale)
                .max((explicit.delta_s - general_ds).abs() / scale);

            let (flat, dir) = constant_response_pair(&mut rng, n, m);
            let ev_flat = flat.evaluate(&x)?;
            let dw = affine_shift(&flat, &x, &dir, 1.0)?.delta_w;
            let resolved = Deformation::coordinate_shift(dir.clone(), 1.0).resolve(&flat, &x)?;
            let general = delta_weights(&ev_flat, &resolved.f)?;
            nonzero_dw += usize::from(dw.iter().chain(general.iter()).any(|&d| d != 0.0));

            let half = EntropyHalfSpace::at(&model, &x)?;
            let v1 = DVector::from_vec(uniform_vector(&mut rng, n, -1.0, 1.0));
            let v2 = DVector::from_vec(uniform_vector(&mut rng, n, -1.0, 1.0));
            let (a1, a2) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            if half.contains(&v1) && half.contains(&v2) && !half.contains(&(&v1 * a1 + &v2 * a2)) {
                closure_bad += 1;
            }
            let predicted = half.rate(&v1);
            let jet1 = Deformation::coordinate_shift(v1.as_slice().to_vec(), 1.0).resolve(&model, &x)?;
            if (predicted - delta_entropy(&ev, &jet1.f)?).abs() > 1e-12 * tolerance_scale(ev.f(), &jet1.f) {
                closure_bad += 1;
            }
            let half_flat = EntropyHalfSpace::at(&flat, &x)?;
            boundary_bad += usize::from(!half_flat.on_boundary(&DVector::from_vec(dir)));
            let super_ideal = StatisticalModel::super_ideal(m)?;
            let point = random_point(&mut rng, m);
            boundary_bad += usize::from(!EntropyHalfSpace::at(&super_ideal, &point)?.on_boundary(&DVector::from_element(m, 1.0)));
        }
        Ok((
            shift_res <= 1e-12 && nonzero_dw == 0 && closure_bad == 0 && boundary_bad == 0,
            format!(
                "{} trials; shift formulas vs general {shift_res:.2e}; nonzero dw under A v = c1: {nonzero_dw}; closure failures {closure_bad}; boundary failures {boundary_bad}",
                size.ideal_trials
            ),
        ))
    })())
}

pub fn run_all(seed: u64, size: &SuiteSize) -> Vec<CriterionReport> {
    vec![
        entropy_identities(seed, size),
        variation_finite_differences(seed, size),
        classification(seed, size),
        total_uncorrelation(seed, size),
        reversible_solver(seed, size),
        weingarten_consistency(seed, size),
        potential_checks(seed, size),
        replicator_and_stationarity(seed, size),
        closed_form_integral(seed, size),
        volume_identity(seed, size),
        ideal_case(seed, size),
    ]
}
