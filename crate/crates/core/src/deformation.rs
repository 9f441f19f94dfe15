//! First-order variations under `f_α ↦ f_α + δf_α`.
//!
//! A deformation is resolved at a point into a [`Jet`] of `δf`: its values,
//! and, for deformations that depend on `x`, its first and second
//! derivatives. All variation formulas work on that jet.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::geometry::{det_metric, hessian_f};
use crate::model::{Evaluation, Jet, ModelBody, StatisticalModel};
use crate::tensor::{self, Tensor4};

/// Relative threshold for "zero" tests on bilinear quantities.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Deformation {
    /// Constant variation vector.
    Values(DVector<f64>),
    /// Per-function variation `δf_α(x)`, held as an expression model.
    Expressions(StatisticalModel),
    /// Variation induced by `x ↦ x + τ v`.
    CoordinateShift { v: DVector<f64>, tau: f64 },
}

impl Deformation {
    pub fn values(delta_f: impl Into<Vec<f64>>) -> Self {
        let v = delta_f.into();
        Deformation::Values(DVector::from_vec(v))
    }

    pub fn coordinate_shift(v: impl Into<Vec<f64>>, tau: f64) -> Self {
        Deformation::CoordinateShift {
            v: DVector::from_vec(v.into()),
            tau,
        }
    }

    pub fn parse_expressions<S: AsRef<str>>(n: usize, delta_f: &[S]) -> Result<Self> {
        Ok(Deformation::Expressions(StatisticalModel::parse_expressions(n, delta_f)?))
    }

    /// Values and derivatives of `δf` at `x`.
    pub fn resolve(&self, model: &StatisticalModel, x: &[f64]) -> Result<Jet> {
        let (n, m) = (model.n(), model.m());
        match self {
            Deformation::Values(df) => {
                if df.len() != m {
                    return Err(Error::LengthMismatch {
                        expected: m,
                        got: df.len(),
                    });
                }
                Ok(Jet {
                    f: df.clone(),
                    grad: DMatrix::zeros(m, n),
                    hess: vec![DMatrix::zeros(n, n); m],
                })
            }
            Deformation::Expressions(body) => {
                if body.m() != m || body.n() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "deformation has (n, m) = ({}, {}), model has ({n}, {m})",
                        body.n(),
                        body.m()
                    )));
                }
                body.jet(x)
            }
            Deformation::CoordinateShift { v, tau } => {
                if v.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: v.len(),
                    });
                }
                match model.body() {
                    ModelBody::Affine { a, .. } => Ok(Jet {
                        f: a * v * *tau,
                        grad: DMatrix::zeros(m, n),
                        hess: vec![DMatrix::zeros(n, n); m],
                    }),
                    ModelBody::Expressions(body) => {
                        let trees = body
                            .functions()
                            .iter()
                            .map(|f| {
                                let mut directional = Expr::Num(0.0);
                                for (i, vi) in v.iter().enumerate() {
                                    directional =
                                        expr::add(directional, expr::mul(Expr::Num(*vi), f.derivative(i)));
                                }
                                expr::mul(Expr::Num(*tau), directional)
                            })
                            .collect();
                        StatisticalModel::expressions(n, trees)?.jet(x)
                    }
                }
            }
        }
    }
}

/// JSON deformation document: `{"delta_f": [...]}` (numbers or expression
/// strings) or `{"shift": {"v": [...], "tau": t}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeformationDocument {
    Values { delta_f: Vec<DeltaEntry> },
    Shift { shift: ShiftDocument },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaEntry {
    Number(f64),
    Expression(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDocument {
    pub v: Vec<f64>,
    pub tau: f64,
}

impl DeformationDocument {
    pub fn into_deformation(self, n: usize) -> Result<Deformation> {
        match self {
            DeformationDocument::Values { delta_f } => {
                if delta_f.iter().all(|e| matches!(e, DeltaEntry::Number(_))) {
                    let values = delta_f
                        .into_iter()
                        .map(|e| match e {
                            DeltaEntry::Number(v) => v,
                            DeltaEntry::Expression(_) => unreachable!(),
                        })
                        .collect::<Vec<_>>();
                    Ok(Deformation::values(values))
                } else {
                    let texts: Vec<String> = delta_f
                        .into_iter()
                        .map(|e| match e {
                            DeltaEntry::Number(v) => format!("{v}"),
                            DeltaEntry::Expression(s) => s,
                        })
                        .collect();
                    Deformation::parse_expressions(n, &texts)
                }
            }
            DeformationDocument::Shift { shift } => Ok(Deformation::coordinate_shift(shift.v, shift.tau)),
        }
    }
}

pub fn parse_deformation(text: &str, n: usize) -> Result<Deformation> {
    let doc: DeformationDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_deformation(n)
}

/// `max(1, |f|∞, |δf|∞)²`
pub fn tolerance_scale(f: &DVector<f64>, df: &DVector<f64>) -> f64 {
    let s = 1f64.max(f.amax()).max(df.amax());
    s * s
}

fn check_len(eval: &Evaluation, df: &DVector<f64>) -> Result<()> {
    if df.len() != eval.m() {
        return Err(Error::LengthMismatch {
            expected: eval.m(),
            got: df.len(),
        });
    }
    Ok(())
}

/// `H_αβ = δ_αβ w_α − w_α w_β`.
pub fn correlation_matrix(w: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(w) - w * w.transpose()
}

/// `δw_α = w_α (δf_α − Σ_β w_β δf_β)`, summed as `w_α Σ_β w_β (δf_α − δf_β)`
/// so that a constant `δf` gives exactly zero.
pub fn delta_weights(eval: &Evaluation, df: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(eval, df)?;
    let w = &eval.w;
    Ok(DVector::from_fn(w.len(), |a, _| {
        w[a] * (0..w.len()).map(|b| w[b] * (df[a] - df[b])).sum::<f64>()
    }))
}

/// The two scalar forms of `δS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyVariationForms {
    /// `E[δf] − δ(f̄)`
    pub intertwined: f64,
    /// `−½ E[δ(f²)] + f̄ E[δf]`
    pub fluctuation: f64,
}

pub fn delta_entropy_forms(eval: &Evaluation, df: &DVector<f64>) -> Result<EntropyVariationForms> {
    let dw = delta_weights(eval, df)?;
    let f = eval.f();
    let mean_df = eval.w.dot(df);
    let delta_mean = dw.dot(f) + mean_df;
    let mean_delta_sq: f64 = (0..eval.m()).map(|a| eval.w[a] * 2.0 * f[a] * df[a]).sum();
    Ok(EntropyVariationForms {
        intertwined: mean_df - delta_mean,
        fluctuation: -0.5 * mean_delta_sq + eval.fbar * mean_df,
    })
}

/// `δS`, cross-checked between its two scalar forms.
pub fn delta_entropy(eval: &Evaluation, df: &DVector<f64>) -> Result<f64> {
    let forms = delta_entropy_forms(eval, df)?;
    let tol = ZERO_TOL * tolerance_scale(eval.f(), df);
    if (forms.intertwined - forms.fluctuation).abs() > tol {
        return Err(Error::InconsistentForms {
            first: forms.intertwined,
            second: forms.fluctuation,
        });
    }
    Ok(forms.fluctuation)
}

/// `δS = −fᵀ H δf`.
pub fn delta_entropy_bilinear(eval: &Evaluation, df: &DVector<f64>) -> Result<f64> {
    check_len(eval, df)?;
    Ok(-eval.f().dot(&(correlation_matrix(&eval.w) * df)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Increasing,
    Decreasing,
    Reversible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: Class,
    pub delta_s: f64,
    pub tolerance: f64,
    /// Present for reversible deformations.
    pub reversible: Option<ReversibleChecks>,
}

/// Residuals of the equilibrium identities, evaluated for reversible deformations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversibleChecks {
    /// `E[δ(f²)] − δ(f̄²)`, with `δ(f̄²) = 2 f̄ δ(f̄)`.
    pub quadratic_residual: f64,
    /// `f̄ E[δf] − ½ E[δ(f²)]`
    pub virial_residual: f64,
    pub holds: bool,
}

pub fn classify(eval: &Evaluation, df: &DVector<f64>) -> Result<Classification> {
    let delta_s = delta_entropy(eval, df)?;
    let tolerance = ZERO_TOL * tolerance_scale(eval.f(), df);
    let class = if delta_s > tolerance {
        Class::Increasing
    } else if delta_s < -tolerance {
        Class::Decreasing
    } else {
        Class::Reversible
    };
    let reversible = (class == Class::Reversible).then(|| {
        let f = eval.f();
        let dw = delta_weights(eval, df).expect("length already checked");
        let mean_df = eval.w.dot(df);
        let mean_delta_sq: f64 = (0..eval.m()).map(|a| eval.w[a] * 2.0 * f[a] * df[a]).sum();
        let delta_mean = dw.dot(f) + mean_df;
        let quadratic_residual = mean_delta_sq - 2.0 * eval.fbar * delta_mean;
        let virial_residual = eval.fbar * mean_df - 0.5 * mean_delta_sq;
        ReversibleChecks {
            quadratic_residual,
            virial_residual,
            holds: quadratic_residual.abs() <= 2.0 * tolerance && virial_residual.abs() <= tolerance,
        }
    });
    Ok(Classification {
        class,
        delta_s,
        tolerance,
        reversible,
    })
}

/// Solves `δS = 0` for the component `pivot`, given the other `m − 1`
/// components in index order.
pub fn solve_reversible_component(eval: &Evaluation, partial: &[f64], pivot: usize) -> Result<f64> {
    let m = eval.m();
    if partial.len() + 1 != m {
        return Err(Error::LengthMismatch {
            expected: m - 1,
            got: partial.len(),
        });
    }
    if pivot >= m {
        return Err(Error::Precondition(format!("pivot {pivot} out of range for m = {m}")));
    }
    let f = eval.f();
    let scale = 1f64.max(f.amax());
    let gap_tol = 1e-10 * scale;
    if f.iter().all(|v| (v - eval.fbar).abs() < gap_tol) {
        return Err(Error::NoValidPivot);
    }
    let gap = f[pivot] - eval.fbar;
    if gap.abs() < gap_tol {
        return Err(Error::SingularPivot { pivot, gap: gap.abs() });
    }
    let others = (0..m).filter(|&a| a != pivot);
    let (mut mean_df, mut mean_fdf) = (0.0, 0.0);
    for (a, d) in others.zip(partial) {
        mean_df += eval.w[a] * d;
        mean_fdf += eval.w[a] * f[a] * d;
    }
    Ok((eval.fbar * mean_df - mean_fdf) / (eval.w[pivot] * gap))
}

/// Full reversible deformation with `partial` inserted around the solved pivot.
pub fn complete_reversible(eval: &Evaluation, partial: &[f64], pivot: usize) -> Result<DVector<f64>> {
    let solved = solve_reversible_component(eval, partial, pivot)?;
    let mut it = partial.iter();
    Ok(DVector::from_fn(eval.m(), |a, _| {
        if a == pivot {
            solved
        } else {
            *it.next().expect("partial has m - 1 entries")
        }
    }))
}

/// Pivot maximizing `w_α |f_α − f̄|`, the best conditioned choice.
pub fn best_pivot(eval: &Evaluation) -> usize {
    (0..eval.m())
        .max_by(|&a, &b| {
            let sa = eval.w[a] * (eval.f()[a] - eval.fbar).abs();
            let sb = eval.w[b] * (eval.f()[b] - eval.fbar).abs();
            sa.total_cmp(&sb)
        })
        .unwrap_or(0)
}

/// `E[f^u δf] − E[f^u] E[δf] = f_(u)ᵀ H δf`.
pub fn moment_correlation(eval: &Evaluation, df: &DVector<f64>, u: u32) -> Result<f64> {
    check_len(eval, df)?;
    if u == 0 {
        return Err(Error::Precondition("moment order u must be >= 1".into()));
    }
    let powered = eval.f().map(|v| v.powi(u as i32));
    Ok(powered.dot(&(correlation_matrix(&eval.w) * df)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Uncorrelation {
    pub uncorrelated: bool,
    /// Smallest moment order with a non-vanishing correlation.
    pub witness_u: Option<u32>,
}

/// Tests `E[f^u δf] = E[f^u] E[δf]` for `u = 1..m`. With pairwise distinct
/// `f_α` this holds for all `u` exactly when `δf ∝ (1, …, 1)`.
pub fn total_uncorrelation_test(eval: &Evaluation, df: &DVector<f64>) -> Result<Uncorrelation> {
    check_len(eval, df)?;
    let f = eval.f();
    let m = eval.m();
    let fmax = 1f64.max(f.amax());
    for a in 0..m {
        for b in a + 1..m {
            if (f[a] - f[b]).abs() <= 1e-10 * fmax {
                return Err(Error::DegeneratePoint { a, b });
            }
        }
    }
    let df_scale = 1f64.max(df.amax());
    for u in 1..=m as u32 {
        let corr = moment_correlation(eval, df, u)?;
        let tol = 1e-10 * fmax.powi(u as i32) * df_scale;
        if corr.abs() > tol {
            return Ok(Uncorrelation {
                uncorrelated: false,
                witness_u: Some(u),
            });
        }
    }
    Ok(Uncorrelation {
        uncorrelated: true,
        witness_u: None,
    })
}

/// How `δ(det ∂²F)` is obtained inside `δK`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeterminantPath {
    /// `tr(adj(∂²F) δ∂²F)`, valid for singular `∂²F`.
    #[default]
    Adjugate,
    /// `det ∂²F · tr((∂²F)⁻¹ δ∂²F)`; falls back to the adjugate when `∂²F` is singular.
    Inverse,
}

/// Coefficient in front of the metric term of `δK` and the form used for `δR`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficients {
    /// `(n+2)/2`, the derivative of `det g^{−(n+2)/2}`; exact scalar-curvature variation.
    #[default]
    Corrected,
    /// `(n+2)` in `δK` and the printed scalar-curvature variation, for reproduction only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VariationOptions {
    pub determinant: DeterminantPath,
    pub coefficients: Coefficients,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationReport {
    #[serde(serialize_with = "tensor::vector")]
    pub delta_w: DVector<f64>,
    #[serde(rename = "delta_S")]
    pub delta_s: f64,
    #[serde(serialize_with = "tensor::vector")]
    pub delta_fbar_i: DVector<f64>,
    #[serde(serialize_with = "tensor::matrix_rows")]
    pub delta_g: DMatrix<f64>,
    /// First-order change of `det g`; equals `tr δg`.
    pub delta_det_g: f64,
    #[serde(rename = "delta_Omega", serialize_with = "tensor::matrix_rows")]
    pub delta_omega: DMatrix<f64>,
    #[serde(rename = "delta_K")]
    pub delta_k: f64,
    #[serde(rename = "delta_R")]
    pub delta_riemann: Tensor4,
    #[serde(rename = "delta_scalar_R")]
    pub delta_scalar_curvature: f64,
    pub classification: Class,
    /// Set when the inverse path was requested but `∂²F` was singular.
    pub determinant_fallback: bool,
}

fn adjugate(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |j, i| {
        let minor = p.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

pub fn delta_geometry(eval: &Evaluation, delta: &Jet, options: VariationOptions) -> Result<VariationReport> {
    let (n, m) = (eval.n(), eval.m());
    if delta.f.len() != m || delta.grad.shape() != (m, n) || delta.hess.len() != m {
        return Err(Error::DimensionMismatch("deformation jet does not match the evaluation".into()));
    }
    let w = &eval.w;
    let jet = &eval.jet;
    let dw = delta_weights(eval, &delta.f)?;
    let delta_s = delta_entropy(eval, &delta.f)?;

    let delta_fbar_i = jet.grad.transpose() * &dw + delta.grad.transpose() * w;
    let mut delta_fbar_ik = DMatrix::zeros(n, n);
    for a in 0..m {
        let g = jet.grad.row(a).transpose();
        let dg = delta.grad.row(a).transpose();
        delta_fbar_ik += dw[a] * (&jet.hess[a] + &g * g.transpose());
        delta_fbar_ik += w[a] * (&delta.hess[a] + &dg * g.transpose() + &g * dg.transpose());
    }

    let fb = &eval.fbar_i;
    let delta_g = &delta_fbar_i * fb.transpose() + fb * delta_fbar_i.transpose();
    let det_g = det_metric(eval);
    let delta_det_g = delta_g.trace();
    let p = hessian_f(eval);
    let dp = &delta_fbar_ik - &delta_g;
    let delta_omega = &p * (-0.5 * delta_det_g / det_g.powf(1.5)) + &dp / det_g.sqrt();

    let det_p = p.determinant();
    let adjugate_route = || (adjugate(&p) * &dp).trace();
    let (delta_det_p, determinant_fallback) = match options.determinant {
        DeterminantPath::Adjugate => (adjugate_route(), false),
        DeterminantPath::Inverse => {
            let scale = p.amax().max(f64::MIN_POSITIVE).powi(n as i32);
            match p.clone().try_inverse() {
                Some(inv) if det_p.abs() > 1e-12 * scale => (det_p * (inv * &dp).trace(), false),
                _ => (adjugate_route(), true),
            }
        }
    };
    let nf = n as f64;
    let coefficient = match options.coefficients {
        Coefficients::Corrected => (nf + 2.0) / 2.0,
        Coefficients::AsPrinted => nf + 2.0,
    };
    let delta_k = delta_det_p / det_g.powf((nf + 2.0) / 2.0)
        - coefficient * det_p * delta_det_g / det_g.powf((nf + 4.0) / 2.0);

    let delta_riemann = Tensor4::from_fn(n, |i, k, l, j| {
        delta_det_g / (det_g * det_g) * (p[(k, l)] * p[(i, j)] - p[(i, l)] * p[(k, j)])
            + (dp[(i, l)] * p[(k, j)] + dp[(k, j)] * p[(i, l)] - dp[(k, l)] * p[(i, j)] - dp[(i, j)] * p[(k, l)])
                / det_g
    });

    let omega = &p / det_g.sqrt();
    let tr = omega.trace();
    let dtr = delta_omega.trace();
    let omega2 = &omega * &omega;
    let quad1 = fb.dot(&(&omega * fb));
    let quad2 = fb.dot(&(&omega2 * fb));
    let d_tr_omega2 = 2.0 * (&omega * &delta_omega).trace();
    let d_quad1 = 2.0 * delta_fbar_i.dot(&(&omega * fb)) + fb.dot(&(&delta_omega * fb));
    let d_quad2 =
        2.0 * delta_fbar_i.dot(&(&omega2 * fb)) + fb.dot(&((&delta_omega * &omega + &omega * &delta_omega) * fb));
    let delta_scalar_curvature = match options.coefficients {
        Coefficients::Corrected => {
            2.0 * tr * dtr - d_tr_omega2 + 2.0 * (d_quad2 - dtr * quad1 - tr * d_quad1) / det_g
                - 2.0 * (quad2 - tr * quad1) * delta_det_g / (det_g * det_g)
        }
        Coefficients::AsPrinted => {
            2.0 * tr * dtr - d_tr_omega2 + 2.0 * (d_quad2 * (1.0 - tr) - dtr * quad1) / det_g
                - 2.0 * (quad2 - tr * quad1) / (det_g * det_g) * fb.dot(&delta_fbar_i)
        }
    };

    let classification = classify(eval, &delta.f)?.class;
    Ok(VariationReport {
        delta_w: dw,
        delta_s,
        delta_fbar_i,
        delta_g,
        delta_det_g,
        delta_omega,
        delta_k,
        delta_riemann,
        delta_scalar_curvature,
        classification,
        determinant_fallback,
    })
}

/// Variations under `x ↦ x + τ v` on an affine model, written directly in
/// terms of `A`, `b` and `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineShift {
    pub delta_f: DVector<f64>,
    pub delta_w: DVector<f64>,
    pub delta_s: f64,
}

pub fn affine_shift(model: &StatisticalModel, x: &[f64], v: &[f64], tau: f64) -> Result<AffineShift> {
    let (a, b) = model
        .affine_parts()
        .ok_or_else(|| Error::Precondition("coordinate-shift formulas need an affine model".into()))?;
    if v.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            got: v.len(),
        });
    }
    let eval = model.evaluate(x)?;
    let w = &eval.w;
    let av = a * DVector::from_column_slice(v);
    let ax = a * DVector::from_column_slice(x);
    let mean_av = w.dot(&av);
    let delta_f = &av * tau;
    let delta_w = DVector::from_fn(w.len(), |k, _| {
        tau * w[k] * (0..w.len()).map(|j| w[j] * (av[k] - av[j])).sum::<f64>()
    });
    let weighted: f64 = (0..model.m()).map(|k| w[k] * b[k] * av[k] + w[k] * ax[k] * av[k]).sum();
    let delta_s = tau * (w.dot(b) + w.dot(&ax)) * mean_av - tau * weighted;
    Ok(AffineShift {
        delta_f,
        delta_w,
        delta_s,
    })
}

/// Directions `v` whose coordinate shift does not decrease the entropy:
/// `{v : normal · v ≥ 0}` with `normal = −Aᵀ H f` (so `δS = τ normal·v`).
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyHalfSpace {
    pub normal: DVector<f64>,
    pub tolerance: f64,
}

impl EntropyHalfSpace {
    pub fn at(model: &StatisticalModel, x: &[f64]) -> Result<Self> {
        let (a, _) = model
            .affine_parts()
            .ok_or_else(|| Error::Precondition("entropy half-space needs an affine model".into()))?;
        let eval = model.evaluate(x)?;
        let normal = -(a.transpose() * correlation_matrix(&eval.w) * eval.f());
        let tolerance = ZERO_TOL * 1f64.max(eval.f().amax()).powi(2) * 1f64.max(a.amax());
        Ok(EntropyHalfSpace { normal, tolerance })
    }

    pub fn rate(&self, v: &DVector<f64>) -> f64 {
        self.normal.dot(v)
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        self.rate(v) >= -self.tolerance * 1f64.max(v.amax())
    }

    pub fn on_boundary(&self, v: &DVector<f64>) -> bool {
        self.rate(v).abs() <= self.tolerance * 1f64.max(v.amax())
    }
}
