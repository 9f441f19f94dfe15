//! Adaptive tensor-product Gauss–Legendre cubature on axis-aligned boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{gibbs_weights, shannon_entropy, StatisticalModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub tolerance: f64,
    /// Maximum number of integrand evaluations.
    pub budget: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tolerance: 1e-10,
            budget: 20_000_000,
        }
    }
}

const LOW_ORDER: usize = 7;
const HIGH_ORDER: usize = 11;

/// Nodes and weights on `[0, 1]`.
fn rule(order: usize) -> &'static [(f64, f64)] {
    static LOW: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static HIGH: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let cell = if order == LOW_ORDER { &LOW } else { &HIGH };
    cell.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(order).expect("positive order"))
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

#[derive(Debug, Clone)]
struct Cell {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    error: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn tensor_rule<F>(f: &mut F, lo: &[f64], hi: &[f64], nodes: &[(f64, f64)], point: &mut [f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = lo.len();
    let k = nodes.len();
    let volume: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut idx = vec![0usize; n];
    let mut sum = 0.0;
    loop {
        let mut weight = 1.0;
        for d in 0..n {
            let (x, w) = nodes[idx[d]];
            point[d] = lo[d] + (hi[d] - lo[d]) * x;
            weight *= w;
        }
        sum += weight * f(point)?;
        let mut d = 0;
        loop {
            if d == n {
                return Ok(sum * volume);
            }
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn evaluate_cell<F>(f: &mut F, lo: Vec<f64>, hi: Vec<f64>, point: &mut [f64]) -> Result<Cell>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let coarse = tensor_rule(f, &lo, &hi, rule(LOW_ORDER), point)?;
    let fine = tensor_rule(f, &lo, &hi, rule(HIGH_ORDER), point)?;
    Ok(Cell {
        lo,
        hi,
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// Integrates `f` over the box `[lo, hi]`. Cells with the largest error
/// estimate are bisected along their longest side until the summed estimate
/// is within tolerance.
pub fn integrate_box<F>(mut f: F, lo: &[f64], hi: &[f64], options: QuadratureOptions) -> Result<QuadratureResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if lo.len() != hi.len() {
        return Err(Error::LengthMismatch {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::Precondition("quadrature tolerance must be positive".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::Precondition("box bounds must be finite with lo <= hi".into()));
    }
    let n = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a == b) {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if n == 0 {
        let v = f(&[])?;
        return Ok(QuadratureResult {
            value: v,
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let per_cell = LOW_ORDER.pow(n as u32) + HIGH_ORDER.pow(n as u32);
    let mut point = vec![0.0; n];
    let mut heap = BinaryHeap::new();
    let first = evaluate_cell(&mut f, lo.to_vec(), hi.to_vec(), &mut point)?;
    let mut evaluations = per_cell;
    let (mut total, mut error) = (first.value, first.error);
    heap.push(first);
    while error > options.tolerance {
        if evaluations + 2 * per_cell > options.budget {
            return Err(Error::BudgetExceeded {
                budget: options.budget,
                estimate: total,
                error_estimate: error,
            });
        }
        let cell = heap.pop().expect("heap is never empty");
        let axis = (0..n)
            .max_by(|&a, &b| (cell.hi[a] - cell.lo[a]).total_cmp(&(cell.hi[b] - cell.lo[b])))
            .expect("n >= 1");
        let mid = 0.5 * (cell.lo[axis] + cell.hi[axis]);
        let mut left_hi = cell.hi.clone();
        left_hi[axis] = mid;
        let mut right_lo = cell.lo.clone();
        right_lo[axis] = mid;
        let left = evaluate_cell(&mut f, cell.lo.clone(), left_hi, &mut point)?;
        let right = evaluate_cell(&mut f, right_lo, cell.hi.clone(), &mut point)?;
        evaluations += 2 * per_cell;
        total += left.value + right.value - cell.value;
        error += left.error + right.error - cell.error;
        heap.push(left);
        heap.push(right);
        // resum to stop drift in the running totals
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|c| c.value).sum();
            error = heap.iter().map(|c| c.error).sum();
        }
    }
    let value = heap.iter().map(|c| c.value).sum();
    let error_estimate = heap.iter().map(|c| c.error).sum();
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}

/// `S(x)` from the values alone: `−Σ w ln w` of the Gibbs weights.
pub fn entropy_value(model: &StatisticalModel, x: &[f64]) -> Result<f64> {
    let f = model.values(x)?;
    Ok(shannon_entropy(gibbs_weights(f.as_slice()).as_slice()))
}

/// `∫ S(x) dx` over the box `[lo, hi]` in the flat coordinate measure.
pub fn entropy_integral(model: &StatisticalModel, lo: &[f64], hi: &[f64], tol: f64) -> Result<QuadratureResult> {
    if lo.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            got: lo.len(),
        });
    }
    integrate_box(
        |x| entropy_value(model, x),
        lo,
        hi,
        QuadratureOptions {
            tolerance: tol,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact_on_one_cell() {
        let r = integrate_box(|x| Ok(x[0].powi(5) * x[1].powi(3)), &[0.0, 0.0], &[1.0, 2.0], Default::default()).unwrap();
        assert!((r.value - 4.0 / 6.0).abs() < 1e-14);
        assert_eq!(r.evaluations, 49 + 121);
    }

    #[test]
    fn adaptive_refinement() {
        let r = integrate_box(|x| Ok((x[0] * 30.0).sin()), &[0.0], &[3.0], Default::default()).unwrap();
        let exact = (1.0 - (90.0f64).cos()) / 30.0;
        assert!((r.value - exact).abs() < 1e-10);
        assert!(r.error_estimate <= 1e-10);
    }

    #[test]
    fn degenerate_box_is_zero() {
        let model = StatisticalModel::super_ideal(2).unwrap();
        let r = entropy_integral(&model, &[0.0, 1.0], &[0.0, 2.0], 1e-8).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_state_has_zero_entropy() {
        let model = StatisticalModel::super_ideal(1).unwrap();
        let r = entropy_integral(&model, &[-2.0], &[3.0], 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let r = integrate_box(
            |x| Ok(x[0].abs().sqrt()),
            &[-1.0],
            &[1.0],
            QuadratureOptions {
                tolerance: 1e-15,
                budget: 200,
            },
        );
        assert!(matches!(r, Err(Error::BudgetExceeded { budget: 200, .. })));
    }
}
