//! Shifted Gibbs weights `h_α = e^{f_α−σ_α} / (γ + Σ_β e^{f_β−σ_β})`, the
//! general solutions of `∂h_α/∂f_β = δ_αβ h_β − h_α h_β`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialParams {
    pub gamma: f64,
    /// Gauge fixed by `sigma[0] = 0`.
    pub sigma: Vec<f64>,
}

impl PotentialParams {
    pub fn gibbs(m: usize) -> Self {
        PotentialParams {
            gamma: 0.0,
            sigma: vec![0.0; m],
        }
    }
}

fn check_params(f: &[f64], params: &PotentialParams) -> Result<()> {
    if params.sigma.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            got: params.sigma.len(),
        });
    }
    if !(params.gamma >= 0.0) || !params.gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be finite and >= 0, got {}", params.gamma)));
    }
    Ok(())
}

/// Exponents `f − σ`, their max, and the max-shifted denominator.
fn shifted(f: &[f64], params: &PotentialParams) -> Result<(Vec<f64>, f64, f64)> {
    check_params(f, params)?;
    let u: Vec<f64> = f.iter().zip(&params.sigma).map(|(a, s)| a - s).collect();
    let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut den: f64 = u.iter().map(|v| (v - top).exp()).sum();
    if params.gamma > 0.0 {
        den += (params.gamma.ln() - top).exp();
    }
    if !(den > 0.0) || !den.is_finite() || !top.is_finite() {
        return Err(Error::Domain("closed-form denominator is not positive and finite".into()));
    }
    Ok((u, top, den))
}

pub fn closed_form_weights(f: &[f64], params: &PotentialParams) -> Result<DVector<f64>> {
    let (u, top, den) = shifted(f, params)?;
    Ok(DVector::from_iterator(u.len(), u.iter().map(|v| (v - top).exp() / den)))
}

/// `∂h_α/∂f_β` by the quotient rule on the explicit formula.
pub fn closed_form_jacobian(f: &[f64], params: &PotentialParams) -> Result<DMatrix<f64>> {
    let (u, top, den) = shifted(f, params)?;
    let e: Vec<f64> = u.iter().map(|v| (v - top).exp()).collect();
    let m = e.len();
    Ok(DMatrix::from_fn(m, m, |a, b| {
        let diag = if a == b { e[a] * den } else { 0.0 };
        (diag - e[a] * e[b]) / (den * den)
    }))
}

/// `δ_αβ h_β − h_α h_β`.
pub fn weight_pde_matrix(h: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(h) - h * h.transpose()
}

fn check_weights(h: &[f64]) -> Result<f64> {
    if h.iter().any(|&v| !(v > 0.0 && v < 1.0 || v == 1.0 && h.len() == 1)) {
        return Err(Error::InvalidWeights("every h must lie in (0, 1)".into()));
    }
    let total: f64 = h.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::InvalidWeights(format!("weights sum to {total} > 1")));
    }
    Ok(total)
}

/// Inverts [`closed_form_weights`] at a single point.
pub fn fit_params(f: &[f64], h: &[f64]) -> Result<PotentialParams> {
    if f.len() != h.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            got: h.len(),
        });
    }
    if f.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    let total = check_weights(h)?;
    let sigma: Vec<f64> = (0..f.len()).map(|a| f[a] - f[0] - (h[a] / h[0]).ln()).collect();
    let gamma = ((1.0 - total) / gibbs_normalizer(f[0], 0.0, h[0])).max(0.0);
    Ok(PotentialParams { gamma, sigma })
}

/// `e^{σ_α − f_α} h_α`, independent of `α`.
pub fn gibbs_normalizer(f_alpha: f64, sigma_alpha: f64, h_alpha: f64) -> f64 {
    (sigma_alpha - f_alpha).exp() * h_alpha
}

/// `l_αβ = ln h_α − ln h_β`.
pub fn log_ratios(h: &DVector<f64>) -> DMatrix<f64> {
    let m = h.len();
    DMatrix::from_fn(m, m, |a, b| h[a].ln() - h[b].ln())
}

/// `c_αβ = l_αβ − (f_α − f_β)`, equal to `σ_β − σ_α`.
pub fn log_ratio_offsets(f: &[f64], h: &DVector<f64>) -> DMatrix<f64> {
    let l = log_ratios(h);
    DMatrix::from_fn(f.len(), f.len(), |a, b| l[(a, b)] - (f[a] - f[b]))
}

/// Largest `|c_αβ + c_βγ + c_γα|` over pairwise distinct triples.
pub fn cocycle_residual(c: &DMatrix<f64>) -> f64 {
    let m = c.nrows();
    let mut worst = 0f64;
    for a in 0..m {
        for b in 0..m {
            for g in 0..m {
                if a != b && b != g && a != g {
                    worst = worst.max((c[(a, b)] + c[(b, g)] + c[(g, a)]).abs());
                }
            }
        }
    }
    worst
}

fn rhs(h: &DVector<f64>, df: &DVector<f64>) -> DVector<f64> {
    let mean = h.dot(df);
    h.component_mul(&df.add_scalar(-mean))
}

/// RK4 along the straight segment `f_start → f_end`.
pub fn integrate_weight_pde(f_start: &[f64], f_end: &[f64], h_start: &[f64], steps: usize) -> Result<DVector<f64>> {
    let m = h_start.len();
    if f_start.len() != m || f_end.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: if f_start.len() != m { f_start.len() } else { f_end.len() },
        });
    }
    check_weights(h_start)?;
    if steps == 0 {
        return Err(Error::Precondition("RK4 needs at least one step".into()));
    }
    let delta = DVector::from_iterator(m, f_start.iter().zip(f_end).map(|(a, b)| b - a));
    let mut h = DVector::from_column_slice(h_start);
    if delta.iter().all(|&d| d == 0.0) {
        return Ok(h);
    }
    let dt = 1.0 / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(&h, &delta);
        let k2 = rhs(&(&h + &k1 * (0.5 * dt)), &delta);
        let k3 = rhs(&(&h + &k2 * (0.5 * dt)), &delta);
        let k4 = rhs(&(&h + &k3 * dt), &delta);
        h += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RK4 state".into()));
        }
    }
    Ok(h)
}

/// RK4 along a polyline through `vertices`, `steps` per segment.
pub fn integrate_weight_pde_polyline(vertices: &[Vec<f64>], h_start: &[f64], steps: usize) -> Result<DVector<f64>> {
    if vertices.is_empty() {
        return Err(Error::Precondition("polyline needs at least one vertex".into()));
    }
    let mut h = DVector::from_column_slice(h_start);
    for pair in vertices.windows(2) {
        h = integrate_weight_pde(&pair[0], &pair[1], h.as_slice(), steps)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gibbs_weights;

    #[test]
    fn gibbs_case() {
        let f = [0.3, -1.0, 2.0];
        let h = closed_form_weights(&f, &PotentialParams::gibbs(3)).unwrap();
        assert!((h - gibbs_weights(&f)).amax() < 1e-16);
        let h = closed_form_weights(&[123.0], &PotentialParams::gibbs(1)).unwrap();
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn gamma_one_direct_arithmetic() {
        let p = PotentialParams {
            gamma: 1.0,
            sigma: vec![0.0, 0.0],
        };
        let h = closed_form_weights(&[0.0, 0.0], &p).unwrap();
        assert!((h[0] - 1.0 / 3.0).abs() < 1e-16 && (h[1] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn fit_recovers_parameters() {
        let f = [0.4, 1.1, -0.3];
        let p = fit_params(&f, gibbs_weights(&f).as_slice()).unwrap();
        assert!(p.gamma.abs() < 1e-12);
        assert!(p.sigma.iter().all(|s| s.abs() < 1e-12));
        let half = gibbs_weights(&f) * 0.5;
        let p = fit_params(&f, half.as_slice()).unwrap();
        let z: f64 = f.iter().map(|v| v.exp()).sum();
        assert!((p.gamma - z).abs() < 1e-12 * z);
        assert!((closed_form_weights(&f, &p).unwrap() - half).amax() < 1e-15);
        assert!(matches!(fit_params(&[0.0, 0.0], &[0.75, 0.75]), Err(Error::InvalidWeights(_))));
        assert!(matches!(fit_params(&[0.0, 0.0], &[0.0, 0.5]), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn zero_length_path_is_identity() {
        let h = [0.2, 0.3];
        let out = integrate_weight_pde(&[1.0, 2.0], &[1.0, 2.0], &h, 10).unwrap();
        assert_eq!(out.as_slice(), &h);
    }

    #[test]
    fn straight_path_matches_closed_form() {
        let (f0, f1) = ([0.0, 0.5], [1.5, -0.7]);
        let h0 = gibbs_weights(&f0);
        let out = integrate_weight_pde(&f0, &f1, h0.as_slice(), 1000).unwrap();
        assert!((out - gibbs_weights(&f1)).amax() < 1e-10);
    }

    #[test]
    fn jacobian_matches_pde() {
        let f = [0.2, -0.4, 1.0];
        let p = PotentialParams {
            gamma: 0.7,
            sigma: vec![0.0, 0.3, -0.2],
        };
        let h = closed_form_weights(&f, &p).unwrap();
        let j = closed_form_jacobian(&f, &p).unwrap();
        assert!((j - weight_pde_matrix(&h)).amax() < 1e-15);
    }

    #[test]
    fn offsets_are_sigma_differences() {
        let f = [0.2, -0.4, 1.0];
        let p = PotentialParams {
            gamma: 0.0,
            sigma: vec![0.0, 0.3, -0.2],
        };
        let h = closed_form_weights(&f, &p).unwrap();
        let c = log_ratio_offsets(&f, &h);
        assert!((c[(0, 1)] - 0.3).abs() < 1e-14);
        assert!(cocycle_residual(&c) < 1e-14);
    }
}
