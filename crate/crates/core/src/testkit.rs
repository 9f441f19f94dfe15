//! Random instances for property suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::deformation::Deformation;
use crate::model::StatisticalModel;

pub fn uniform_vector<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn random_affine<R: Rng>(rng: &mut R, n: usize, m: usize) -> StatisticalModel {
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.5..1.5));
    let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
    StatisticalModel::affine(a, b).expect("finite coefficients")
}

pub fn random_linear<R: Rng>(rng: &mut R, n: usize, m: usize) -> StatisticalModel {
    let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    StatisticalModel::linear(a).expect("finite coefficients")
}

/// Source text of a smooth random function of `x1..xn`.
pub fn random_expression_text<R: Rng>(rng: &mut R, n: usize) -> String {
    let mut terms = vec![format!("{:.3}", rng.gen_range(-1.0..1.0))];
    let count = rng.gen_range(2..=4);
    for _ in 0..count {
        let i = rng.gen_range(1..=n);
        let j = rng.gen_range(1..=n);
        let c = rng.gen_range(-1.0..1.0);
        let term = match rng.gen_range(0..6) {
            0 => format!("{c:.3}*x{i}"),
            1 => format!("{c:.3}*x{i}*x{j}"),
            2 => format!("{c:.3}*sin(x{i})"),
            3 => format!("{c:.3}*cos(x{i} - x{j})"),
            4 => format!("{c:.3}*exp(0.3*x{i})"),
            _ => format!("{c:.3}*x{i}^2"),
        };
        terms.push(term);
    }
    terms.join(" + ")
}

pub fn random_expression_model<R: Rng>(rng: &mut R, n: usize, m: usize) -> StatisticalModel {
    let texts: Vec<String> = (0..m).map(|_| random_expression_text(rng, n)).collect();
    StatisticalModel::parse_expressions(n, &texts).expect("generated expressions parse")
}

/// Affine or expression model with equal probability.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, m: usize) -> StatisticalModel {
    if rng.gen_bool(0.5) {
        random_affine(rng, n, m)
    } else {
        random_expression_model(rng, n, m)
    }
}

pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    uniform_vector(rng, n, -1.0, 1.0)
}

/// Constant, expression-valued or coordinate-shift deformation.
pub fn random_deformation<R: Rng>(rng: &mut R, n: usize, m: usize) -> Deformation {
    match rng.gen_range(0..3) {
        0 => Deformation::values(uniform_vector(rng, m, -1.0, 1.0)),
        1 => {
            let texts: Vec<String> = (0..m).map(|_| random_expression_text(rng, n)).collect();
            Deformation::parse_expressions(n, &texts).expect("generated expressions parse")
        }
        _ => Deformation::coordinate_shift(uniform_vector(rng, n, -1.0, 1.0), 1.0),
    }
}
