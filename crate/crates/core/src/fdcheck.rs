//! Central finite-difference checks of first-order variations.
//!
//! A quantity `Q(τ)` is sampled at `±ε` for each `ε` in [`EPSILONS`]. The check
//! passes when the observed order `log10(e₁/e₂)` reaches [`MIN_ORDER`], or when
//! the error at the smaller step already sits at the roundoff floor
//! `ROUNDOFF_FLOOR·scale`; at `ε = 1e-5` double rounding alone contributes
//! about `2e-11·scale`.

use nalgebra::DVector;
use serde::Serialize;

use crate::deformation::{delta_geometry, delta_weights, VariationOptions};
use crate::error::Result;
use crate::geometry::geometry_at;
use crate::model::{Evaluation, Jet};

pub const EPSILONS: [f64; 2] = [1e-4, 1e-5];
pub const MIN_ORDER: f64 = 1.8;
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdResult {
    pub name: String,
    /// Max-norm error of the central difference at each step size.
    pub errors: [f64; 2],
    pub order: f64,
    pub scale: f64,
    pub passed: bool,
}

pub fn fd_check<F>(name: &str, analytic: &[f64], mut quantity: F) -> Result<FdResult>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mut scale = analytic.iter().fold(1f64, |acc, v| acc.max(v.abs()));
    let mut errors = [0.0; 2];
    for (k, &eps) in EPSILONS.iter().enumerate() {
        let plus = quantity(eps)?;
        let minus = quantity(-eps)?;
        scale = plus.iter().fold(scale, |acc, v| acc.max(v.abs()));
        errors[k] = plus
            .iter()
            .zip(&minus)
            .zip(analytic)
            .map(|((p, m), a)| ((p - m) / (2.0 * eps) - a).abs())
            .fold(0.0, f64::max);
    }
    let order = (errors[0] / errors[1]).log10();
    let at_floor = errors[1] <= ROUNDOFF_FLOOR * scale;
    Ok(FdResult {
        name: name.to_string(),
        errors,
        order,
        scale,
        passed: order >= MIN_ORDER || at_floor,
    })
}

/// `jet + τ·delta`.
pub fn shifted_jet(jet: &Jet, delta: &Jet, tau: f64) -> Jet {
    Jet {
        f: &jet.f + &delta.f * tau,
        grad: &jet.grad + &delta.grad * tau,
        hess: jet.hess.iter().zip(&delta.hess).map(|(h, d)| h + d * tau).collect(),
    }
}

pub fn perturbed(eval: &Evaluation, delta: &Jet, tau: f64) -> Result<Evaluation> {
    Evaluation::from_jet(eval.x.clone(), shifted_jet(&eval.jet, delta, tau))
}

fn flat(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

/// Checks `δw, δS, δg, δΩ, δK, δR_iklj, δ(scalar R)` against finite differences.
pub fn variation_fd(eval: &Evaluation, delta: &Jet, options: VariationOptions) -> Result<Vec<FdResult>> {
    let report = delta_geometry(eval, delta, options)?;
    let dw: DVector<f64> = delta_weights(eval, &delta.f)?;
    let mut out = Vec::with_capacity(7);
    out.push(fd_check("delta_w", dw.as_slice(), |t| {
        Ok(perturbed(eval, delta, t)?.w.as_slice().to_vec())
    })?);
    out.push(fd_check("delta_S", &[report.delta_s], |t| Ok(vec![perturbed(eval, delta, t)?.entropy]))?);
    out.push(fd_check("delta_g", &flat(&report.delta_g), |t| {
        Ok(flat(&geometry_at(&perturbed(eval, delta, t)?).g))
    })?);
    out.push(fd_check("delta_Omega", &flat(&report.delta_omega), |t| {
        Ok(flat(&geometry_at(&perturbed(eval, delta, t)?).omega))
    })?);
    out.push(fd_check("delta_K", &[report.delta_k], |t| {
        Ok(vec![geometry_at(&perturbed(eval, delta, t)?).gauss_kronecker])
    })?);
    out.push(fd_check("delta_R", report.delta_riemann.as_slice(), |t| {
        Ok(geometry_at(&perturbed(eval, delta, t)?).riemann.as_slice().to_vec())
    })?);
    out.push(fd_check("delta_scalar_R", &[report.delta_scalar_curvature], |t| {
        Ok(vec![geometry_at(&perturbed(eval, delta, t)?).scalar_curvature])
    })?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_passes_and_wrong_derivative_fails() {
        let good = fd_check("sin", &[1.0f64.cos()], |t| Ok(vec![(1.0 + t).sin()])).unwrap();
        assert!(good.passed, "{good:?}");
        let bad = fd_check("sin", &[1.0f64.cos() + 1e-6], |t| Ok(vec![(1.0 + t).sin()])).unwrap();
        assert!(!bad.passed, "{bad:?}");
    }
}
