//! Statistical models `f_α(x)` and the free-energy map `F(x) = ln Σ_α exp f_α(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalModel {
    n: usize,
    m: usize,
    body: ModelBody,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    /// `f = b + A x` with `A` of shape m×n.
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    Expressions(ExprBody),
}

/// Expression trees together with their symbolic first and second derivatives.
#[derive(Debug, Clone)]
pub struct ExprBody {
    f: Vec<Expr>,
    grad: Vec<Vec<Expr>>,
    hess: Vec<Vec<Vec<Expr>>>,
}

impl PartialEq for ExprBody {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f
    }
}

impl ExprBody {
    fn new(f: Vec<Expr>, n: usize) -> Self {
        let grad: Vec<Vec<Expr>> = f
            .iter()
            .map(|e| (0..n).map(|i| e.derivative(i)).collect())
            .collect();
        let hess = grad
            .iter()
            .map(|g| {
                let mut h = vec![vec![Expr::Num(0.0); n]; n];
                for i in 0..n {
                    for k in i..n {
                        let d = g[i].derivative(k);
                        h[k][i] = d.clone();
                        h[i][k] = d;
                    }
                }
                h
            })
            .collect();
        ExprBody { f, grad, hess }
    }

    pub fn functions(&self) -> &[Expr] {
        &self.f
    }
}

/// Value, gradient and Hessian of every `f_α` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub f: DVector<f64>,
    /// m×n, row α is ∇f_α.
    pub grad: DMatrix<f64>,
    /// m matrices of size n×n.
    pub hess: Vec<DMatrix<f64>>,
}

impl StatisticalModel {
    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidModel("need m >= 1 and n >= 1".into()));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "A has {m} rows but b has length {}",
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine coefficients".into()));
        }
        Ok(StatisticalModel {
            n,
            m,
            body: ModelBody::Affine { a, b },
        })
    }

    /// `f = A x` (no constants).
    pub fn linear(a: DMatrix<f64>) -> Result<Self> {
        let m = a.nrows();
        Self::affine(a, DVector::zeros(m))
    }

    /// `m = n`, `f_α = x_α`.
    pub fn super_ideal(n: usize) -> Result<Self> {
        Self::linear(DMatrix::identity(n, n))
    }

    pub fn expressions(n: usize, f: Vec<Expr>) -> Result<Self> {
        if n == 0 || f.is_empty() {
            return Err(Error::InvalidModel("need m >= 1 and n >= 1".into()));
        }
        for (alpha, e) in f.iter().enumerate() {
            if let Some(k) = e.max_var() {
                if k >= n {
                    return Err(Error::UnknownIdentifier {
                        name: format!("x{} in f[{}]", k + 1, alpha + 1),
                        line: 1,
                        column: 1,
                    });
                }
            }
        }
        let m = f.len();
        Ok(StatisticalModel {
            n,
            m,
            body: ModelBody::Expressions(ExprBody::new(f, n)),
        })
    }

    pub fn parse_expressions<S: AsRef<str>>(n: usize, f: &[S]) -> Result<Self> {
        let trees = f
            .iter()
            .enumerate()
            .map(|(alpha, s)| Expr::parse(s.as_ref(), n).map_err(|e| locate(e, alpha)))
            .collect::<Result<Vec<_>>>()?;
        Self::expressions(n, trees)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn body(&self) -> &ModelBody {
        &self.body
    }

    /// `(A, b)` for affine bodies.
    pub fn affine_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.body {
            ModelBody::Affine { a, b } => Some((a, b)),
            ModelBody::Expressions(_) => None,
        }
    }

    /// Affine with all constants equal to zero.
    pub fn is_linear(&self) -> bool {
        matches!(self.affine_parts(), Some((_, b)) if b.iter().all(|v| *v == 0.0))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point".into()));
        }
        Ok(())
    }

    /// Values `f_α(x)`.
    pub fn values(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let f = match &self.body {
            ModelBody::Affine { a, b } => a * DVector::from_column_slice(x) + b,
            ModelBody::Expressions(body) => DVector::from_iterator(self.m, body.f.iter().map(|e| e.eval(x))),
        };
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("f at x = {x:?}")));
        }
        Ok(f)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        let f = self.values(x)?;
        let (n, m) = (self.n, self.m);
        let (grad, hess) = match &self.body {
            ModelBody::Affine { a, .. } => (a.clone(), vec![DMatrix::zeros(n, n); m]),
            ModelBody::Expressions(body) => {
                let grad = DMatrix::from_fn(m, n, |alpha, i| body.grad[alpha][i].eval(x));
                let hess = body
                    .hess
                    .iter()
                    .map(|h| DMatrix::from_fn(n, n, |i, k| h[i][k].eval(x)))
                    .collect();
                (grad, hess)
            }
        };
        if grad.iter().chain(hess.iter().flat_map(|h| h.iter())).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("derivatives at x = {x:?}")));
        }
        Ok(Jet { f, grad, hess })
    }

    /// `F(x)` alone, without derivatives.
    pub fn free_energy(&self, x: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(self.values(x)?.as_slice()))
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let jet = self.jet(x)?;
        Evaluation::from_jet(DVector::from_column_slice(x), jet)
    }

    /// Merges summands that are identical (bitwise equal affine rows, or
    /// structurally equal expression trees): `k` copies of `f_α` become one
    /// copy of `f_α + ln k`, which leaves `F` unchanged.
    pub fn canonicalize(&self) -> StatisticalModel {
        match &self.body {
            ModelBody::Affine { a, b } => {
                let rows: Vec<(Vec<f64>, f64)> = (0..self.m)
                    .map(|alpha| (a.row(alpha).iter().copied().collect(), b[alpha]))
                    .collect();
                let groups = group_identical(&rows);
                if groups.len() == self.m {
                    return self.clone();
                }
                let new_a = DMatrix::from_fn(groups.len(), self.n, |r, i| a[(groups[r].0, i)]);
                let new_b = DVector::from_iterator(
                    groups.len(),
                    groups.iter().map(|&(first, count)| b[first] + (count as f64).ln()),
                );
                StatisticalModel::affine(new_a, new_b).expect("merged rows keep shapes")
            }
            ModelBody::Expressions(body) => {
                let groups = group_identical(&body.f);
                if groups.len() == self.m {
                    return self.clone();
                }
                let merged = groups
                    .iter()
                    .map(|&(first, count)| {
                        let e = body.f[first].clone();
                        if count == 1 {
                            e
                        } else {
                            expr::add(e, Expr::Num((count as f64).ln()))
                        }
                    })
                    .collect();
                StatisticalModel::expressions(self.n, merged).expect("merged trees keep variables")
            }
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        match &self.body {
            ModelBody::Affine { a, b } => ModelDocument {
                n: self.n,
                m: Some(self.m),
                kind: ModelKind::Affine,
                a: Some((0..self.m).map(|r| a.row(r).iter().copied().collect()).collect()),
                b: Some(b.iter().copied().collect()),
                f: None,
            },
            ModelBody::Expressions(body) => ModelDocument {
                n: self.n,
                m: Some(self.m),
                kind: ModelKind::Expr,
                a: None,
                b: None,
                f: Some(body.f.iter().map(|e| e.to_string()).collect()),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("model documents always serialize")
    }
}

fn group_identical<T: PartialEq>(items: &[T]) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match groups.iter_mut().find(|(first, _)| items[*first] == *item) {
            Some(group) => group.1 += 1,
            None => groups.push((i, 1)),
        }
    }
    groups
}

fn locate(err: Error, alpha: usize) -> Error {
    match err {
        Error::Syntax {
            line,
            column,
            message,
        } => Error::Syntax {
            line,
            column,
            message: format!("in f[{}]: {message}", alpha + 1),
        },
        Error::UnknownIdentifier { name, line, column } => Error::UnknownIdentifier {
            name: format!("{name} in f[{}]", alpha + 1),
            line,
            column,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Affine,
    Expr,
}

/// JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub kind: ModelKind,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<String>>,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<StatisticalModel> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidModel("n must be positive".into()));
        }
        let model = match self.kind {
            ModelKind::Affine => {
                let rows = self
                    .a
                    .ok_or_else(|| Error::InvalidModel("affine model requires `A`".into()))?;
                let m = rows.len();
                for (r, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "row {} of A has {} entries, expected n = {n}",
                            r + 1,
                            row.len()
                        )));
                    }
                }
                let b = self.b.unwrap_or_else(|| vec![0.0; m]);
                if b.len() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "A has {m} rows but b has length {}",
                        b.len()
                    )));
                }
                let a = DMatrix::from_fn(m, n, |r, i| rows[r][i]);
                StatisticalModel::affine(a, DVector::from_vec(b))?
            }
            ModelKind::Expr => {
                let f = self
                    .f
                    .ok_or_else(|| Error::InvalidModel("expression model requires `f`".into()))?;
                StatisticalModel::parse_expressions(n, &f)?
            }
        };
        if let Some(m) = self.m {
            if m != model.m() {
                return Err(Error::DimensionMismatch(format!(
                    "declared m = {m} but the body has {} functions",
                    model.m()
                )));
            }
        }
        Ok(model)
    }
}

/// Parses a JSON model document.
pub fn parse_model(text: &str) -> Result<StatisticalModel> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_model()
}

/// Max-shifted `ln Σ exp v_α`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Gibbs weights `exp f_α / Σ exp f_β`, computed with the max shift.
pub fn gibbs_weights(f: &[f64]) -> DVector<f64> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    DVector::from_iterator(f.len(), e.into_iter().map(|v| v / total))
}

/// `-Σ w ln w` with `0 ln 0 = 0`.
pub fn shannon_entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `ε ln(exp(x/ε) + exp(y/ε))`, tending to `max(x, y)` as `ε → 0⁺`.
pub fn tropical_sum(x: f64, y: f64, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain(format!("tropical_sum needs eps > 0, got {eps}")));
    }
    let hi = x.max(y);
    let gap = (x - y).abs();
    Ok(hi + eps * (-gap / eps).exp().ln_1p())
}

/// Pointwise data of a model at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: DVector<f64>,
    pub jet: Jet,
    /// `F(x) = x_{n+1}`.
    pub free_energy: f64,
    pub w: DVector<f64>,
    /// `Σ w_α f_α`
    pub fbar: f64,
    /// `Σ w_α ∂_i f_α`, which is also `∇F`.
    pub fbar_i: DVector<f64>,
    /// `Σ w_α (∂_i ∂_k f_α + ∂_i f_α ∂_k f_α)`
    pub fbar_ik: DMatrix<f64>,
    /// `-Σ w ln w`
    pub entropy: f64,
}

impl Evaluation {
    pub fn from_jet(x: DVector<f64>, jet: Jet) -> Result<Self> {
        let m = jet.f.len();
        let n = x.len();
        if m == 0 {
            return Err(Error::InvalidModel("empty jet".into()));
        }
        if jet.grad.shape() != (m, n) || jet.hess.len() != m || jet.hess.iter().any(|h| h.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("jet shapes do not match (m, n)".into()));
        }
        if jet.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("f values".into()));
        }
        let free_energy = log_sum_exp(jet.f.as_slice());
        let w = gibbs_weights(jet.f.as_slice());
        let fbar = w.dot(&jet.f);
        let fbar_i = jet.grad.transpose() * &w;
        let mut fbar_ik = DMatrix::zeros(n, n);
        for alpha in 0..m {
            let g = jet.grad.row(alpha).transpose();
            fbar_ik += w[alpha] * (&jet.hess[alpha] + &g * g.transpose());
        }
        let fbar_ik = 0.5 * (&fbar_ik + fbar_ik.transpose());
        let entropy = shannon_entropy(w.as_slice());
        Ok(Evaluation {
            x,
            jet,
            free_energy,
            w,
            fbar,
            fbar_i,
            fbar_ik,
            entropy,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.jet.f
    }

    /// Entropy through `F - f̄`.
    pub fn entropy_from_free_energy(&self) -> f64 {
        self.free_energy - self.fbar
    }
}
