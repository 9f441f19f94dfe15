//! Pointwise extrinsic and intrinsic geometry of the graph `x_{n+1} = F(x)`.
//!
//! With `f̄_i = ∇F` and `P = ∂²F = f̄_(ik) − f̄_i f̄_k`:
//!
//! * metric `g = I + f̄ f̄ᵀ`, `det g = 1 + |f̄|²`
//! * unit normal `N = (−f̄, 1) / √det g`
//! * second fundamental form `Ω = P / √det g`
//! * shape operator `W = g⁻¹ Ω = det g^{−3/2} (det g·I − f̄ f̄ᵀ) P`
//! * Gauss–Kronecker curvature `K = det P / det g^{(n+2)/2}`
//! * Riemann tensor (Gauss equation) `R_iklj = Ω_il Ω_kj − Ω_kl Ω_ij`

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::model::Evaluation;
use crate::tensor::{self, Tensor4};

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    #[serde(serialize_with = "tensor::matrix_rows")]
    pub g: DMatrix<f64>,
    pub det_g: f64,
    /// `(x_1, …, x_n, F(x))`
    #[serde(rename = "X", serialize_with = "tensor::vector")]
    pub position: DVector<f64>,
    #[serde(rename = "N", serialize_with = "tensor::vector")]
    pub normal: DVector<f64>,
    #[serde(rename = "Omega", serialize_with = "tensor::matrix_rows")]
    pub omega: DMatrix<f64>,
    /// Shape operator in matrix form.
    #[serde(rename = "W", serialize_with = "tensor::matrix_rows")]
    pub weingarten: DMatrix<f64>,
    /// Max-abs difference between the componentwise and the matrix form of `W`.
    pub weingarten_residual: f64,
    /// Principal curvatures, ascending.
    #[serde(rename = "kappa", serialize_with = "tensor::vector")]
    pub principal_curvatures: DVector<f64>,
    #[serde(rename = "K")]
    pub gauss_kronecker: f64,
    pub det_weingarten: f64,
    #[serde(rename = "R")]
    pub riemann: Tensor4,
    #[serde(rename = "scalar_R")]
    pub scalar_curvature: f64,
    #[serde(rename = "S")]
    pub entropy: f64,
    #[serde(rename = "S_geom")]
    pub entropy_geometric: f64,
    /// `Σ_α w_α (Σ_i x_i ∂_i f_α − f_α)`, zero for linear models.
    pub linearity_correction: f64,
}

/// The two entropy expressions at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyDecomposition {
    /// `F − f̄`
    pub entropy: f64,
    /// `√det g X·N + correction`
    pub entropy_geometric: f64,
    /// `√det g X·N = F − x·∇F`
    pub flux_term: f64,
    pub correction: f64,
}

/// `∂²F = [f̄_(ik) − f̄_i f̄_k]`, summed in the centered form
/// `Σ_α w_α (∂²f_α + (∇f_α − f̄)(∇f_α − f̄)ᵀ)` to avoid cancellation.
pub fn hessian_f(eval: &Evaluation) -> DMatrix<f64> {
    let n = eval.n();
    let mut p = DMatrix::zeros(n, n);
    for alpha in 0..eval.m() {
        let centered = eval.jet.grad.row(alpha).transpose() - &eval.fbar_i;
        p += (&eval.jet.hess[alpha] + &centered * centered.transpose()) * eval.w[alpha];
    }
    0.5 * (&p + p.transpose())
}

pub fn metric(eval: &Evaluation) -> DMatrix<f64> {
    let n = eval.n();
    DMatrix::identity(n, n) + &eval.fbar_i * eval.fbar_i.transpose()
}

pub fn det_metric(eval: &Evaluation) -> f64 {
    1.0 + eval.fbar_i.norm_squared()
}

/// `g⁻¹ = I − f̄ f̄ᵀ / det g` (Sherman–Morrison).
pub fn inverse_metric(eval: &Evaluation) -> DMatrix<f64> {
    let n = eval.n();
    DMatrix::identity(n, n) - &eval.fbar_i * eval.fbar_i.transpose() / det_metric(eval)
}

/// `(N_1, …, N_{n+1}) = (−f̄_1, …, −f̄_n, 1) / √det g`.
pub fn unit_normal(eval: &Evaluation) -> DVector<f64> {
    let n = eval.n();
    let s = det_metric(eval).sqrt();
    DVector::from_fn(n + 1, |i, _| if i < n { -eval.fbar_i[i] / s } else { 1.0 / s })
}

pub fn entropy_at(eval: &Evaluation) -> EntropyDecomposition {
    let n = eval.n();
    let sqrt_det = det_metric(eval).sqrt();
    let normal = unit_normal(eval);
    let position = position_vector(eval);
    let flux_term = sqrt_det * position.dot(&normal);
    let mut correction = 0.0;
    for alpha in 0..eval.m() {
        let directional: f64 = (0..n).map(|i| eval.x[i] * eval.jet.grad[(alpha, i)]).sum();
        correction += eval.w[alpha] * (directional - eval.jet.f[alpha]);
    }
    EntropyDecomposition {
        entropy: eval.entropy_from_free_energy(),
        entropy_geometric: flux_term + correction,
        flux_term,
        correction,
    }
}

fn position_vector(eval: &Evaluation) -> DVector<f64> {
    let n = eval.n();
    DVector::from_fn(n + 1, |i, _| if i < n { eval.x[i] } else { eval.free_energy })
}

/// Shape operator from the matrix identity `det g^{−3/2} (det g·I − ∇F∇Fᵀ) ∂²F`.
pub fn weingarten_matrix(eval: &Evaluation) -> DMatrix<f64> {
    let n = eval.n();
    let det_g = det_metric(eval);
    let grad = &eval.fbar_i;
    let left = DMatrix::identity(n, n) * det_g - grad * grad.transpose();
    left * hessian_f(eval) / det_g.powf(1.5)
}

/// Shape operator assembled entry by entry from the raw sums over α.
pub fn weingarten_componentwise(eval: &Evaluation) -> DMatrix<f64> {
    let n = eval.n();
    let m = eval.m();
    let fb = &eval.fbar_i;
    let det_g = det_metric(eval);
    let norm2 = fb.norm_squared();
    let grad = &eval.jet.grad;
    let hess = &eval.jet.hess;
    let second = |i: usize, j: usize| -> f64 {
        (0..m)
            .map(|a| eval.w[a] * (hess[a][(i, j)] + grad[(a, i)] * grad[(a, j)]))
            .sum()
    };
    DMatrix::from_fn(n, n, |i, j| {
        let first = (second(i, j) - fb[i] * fb[j]) / det_g.sqrt();
        let mut inner = 0.0;
        for k in 0..n {
            for a in 0..m {
                inner += eval.w[a] * (fb[k] * hess[a][(j, k)] + grad[(a, j)] * fb[k] * grad[(a, k)]);
            }
        }
        inner -= fb[j] * norm2;
        first - fb[i] / det_g.powf(1.5) * inner
    })
}

/// `R_iklj = Ω_il Ω_kj − Ω_kl Ω_ij`.
pub fn riemann_from_omega(omega: &DMatrix<f64>) -> Tensor4 {
    Tensor4::from_fn(omega.nrows(), |i, k, l, j| {
        omega[(i, l)] * omega[(k, j)] - omega[(k, l)] * omega[(i, j)]
    })
}

/// `Σ g^{il} g^{kj} R_iklj`.
pub fn scalar_curvature(riemann: &Tensor4, g_inv: &DMatrix<f64>) -> f64 {
    let n = riemann.dim();
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for j in 0..n {
                    total += g_inv[(i, l)] * g_inv[(k, j)] * riemann.get(i, k, l, j);
                }
            }
        }
    }
    total
}

/// Scalar curvature expressed through `Ω` and `f̄` only:
/// `(tr Ω)² − tr Ω² + 2 (f̄ᵀΩ²f̄ − tr Ω · f̄ᵀΩf̄) / det g`.
pub fn scalar_curvature_closed_form(omega: &DMatrix<f64>, fbar_i: &DVector<f64>) -> f64 {
    let det_g = 1.0 + fbar_i.norm_squared();
    let tr = omega.trace();
    let omega2 = omega * omega;
    let quad1 = fbar_i.dot(&(omega * fbar_i));
    let quad2 = fbar_i.dot(&(&omega2 * fbar_i));
    tr * tr - omega2.trace() + 2.0 * (quad2 - tr * quad1) / det_g
}

/// Eigenvalues of `g^{−1/2} Ω g^{−1/2}`, ascending. These equal the
/// eigenvalues of `W = g⁻¹Ω`, which is similar to that symmetric matrix.
pub fn principal_curvatures(g: &DMatrix<f64>, omega: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(g.clone());
    let inv_sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let g_inv_sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    let sym = &g_inv_sqrt * omega * &g_inv_sqrt;
    let sym = 0.5 * (&sym + sym.transpose());
    let mut kappa: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    kappa.sort_by(|a, b| a.total_cmp(b));
    DVector::from_vec(kappa)
}

pub fn gauss_kronecker(eval: &Evaluation) -> f64 {
    let n = eval.n() as f64;
    hessian_f(eval).determinant() / det_metric(eval).powf((n + 2.0) / 2.0)
}

pub fn geometry_at(eval: &Evaluation) -> GeometryReport {
    let g = metric(eval);
    let det_g = det_metric(eval);
    let p = hessian_f(eval);
    let omega = &p / det_g.sqrt();
    let weingarten = weingarten_matrix(eval);
    let weingarten_residual = (&weingarten - weingarten_componentwise(eval)).amax();
    let riemann = riemann_from_omega(&omega);
    let scalar_curvature = scalar_curvature(&riemann, &inverse_metric(eval));
    let entropy = entropy_at(eval);
    GeometryReport {
        principal_curvatures: principal_curvatures(&g, &omega),
        gauss_kronecker: gauss_kronecker(eval),
        det_weingarten: weingarten.determinant(),
        g,
        det_g,
        position: position_vector(eval),
        normal: unit_normal(eval),
        omega,
        weingarten,
        weingarten_residual,
        riemann,
        scalar_curvature,
        entropy: entropy.entropy,
        entropy_geometric: entropy.entropy_geometric,
        linearity_correction: entropy.correction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StatisticalModel;
    use nalgebra::DMatrix;

    #[test]
    fn super_ideal_n2_origin() {
        let model = StatisticalModel::super_ideal(2).unwrap();
        let ev = model.evaluate(&[0.0, 0.0]).unwrap();
        let rep = geometry_at(&ev);
        assert!((rep.det_g - 1.5).abs() < 1e-15);
        let s = 1.5f64.sqrt();
        let expected = [-0.5 / s, -0.5 / s, 1.0 / s];
        for (a, b) in rep.normal.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(rep.gauss_kronecker.abs() < 1e-15);
        assert!(rep.det_weingarten.abs() < 1e-15);
        assert!((rep.entropy - 2f64.ln()).abs() < 1e-15);
        assert!(rep.linearity_correction.abs() < 1e-15);
        assert!((rep.entropy_geometric - rep.entropy).abs() < 1e-15);
    }

    #[test]
    fn single_summand_is_a_hyperplane() {
        let model = StatisticalModel::affine(DMatrix::from_row_slice(1, 3, &[0.3, -1.0, 2.0]), DVector::from_vec(vec![0.7])).unwrap();
        let ev = model.evaluate(&[1.0, 2.0, -0.5]).unwrap();
        let rep = geometry_at(&ev);
        assert!(rep.omega.amax() < 1e-15);
        assert_eq!(rep.gauss_kronecker, 0.0);
        assert!(rep.riemann.max_abs() < 1e-15);
        assert_eq!(rep.scalar_curvature, 0.0);
    }

    #[test]
    fn affine_hessian_is_projected_correlation_matrix() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.2, 2.0, 0.7, -1.1]);
        let model = StatisticalModel::affine(a.clone(), DVector::from_vec(vec![0.1, -0.4, 0.3])).unwrap();
        let ev = model.evaluate(&[0.4, -0.9]).unwrap();
        let w = &ev.w;
        let h = DMatrix::from_diagonal(w) - w * w.transpose();
        let expected = a.transpose() * h * a;
        assert!((hessian_f(&ev) - expected).amax() < 1e-15);
    }

    #[test]
    fn super_ideal_hessian_is_correlation_matrix() {
        let model = StatisticalModel::super_ideal(3).unwrap();
        let ev = model.evaluate(&[0.2, -0.5, 1.0]).unwrap();
        let w = &ev.w;
        let h = DMatrix::from_diagonal(w) - w * w.transpose();
        let p = hessian_f(&ev);
        assert!((&p - &h).amax() < 1e-15);
        let eig = SymmetricEigen::new(p.clone());
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(|a, b| a.total_cmp(b));
        assert!(values[0].abs() < 1e-15);
        assert!(values[1] > 1e-3);
        let ones = DVector::from_element(3, 1.0);
        assert!((p * ones).amax() < 1e-15);
    }

    #[test]
    fn entropy_correction_is_minus_mean_constant() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![0.4, -1.3]);
        let model = StatisticalModel::affine(a, b.clone()).unwrap();
        let ev = model.evaluate(&[0.25]).unwrap();
        let dec = entropy_at(&ev);
        assert!((dec.correction + ev.w.dot(&b)).abs() < 1e-15);
        assert!((dec.entropy_geometric - ev.entropy).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_model_k_matches_det_w() {
        let model = StatisticalModel::parse_expressions(1, &["x1^2", "x1"]).unwrap();
        for x in [-1.3, 0.2, 0.9] {
            let rep = geometry_at(&model.evaluate(&[x]).unwrap());
            assert!((rep.gauss_kronecker - rep.det_weingarten).abs() <= 1e-8 * rep.gauss_kronecker.abs().max(1e-12));
            assert!(rep.weingarten_residual < 1e-12);
        }
    }
}
