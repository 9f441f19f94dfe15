//! Discrete replicator dynamics of the Gibbs weights, the stationarity
//! equivalences, and the weighted-graph Laplacian.

use nalgebra::{DMatrix, DVector};

use crate::deformation::{correlation_matrix, tolerance_scale, ZERO_TOL};
use crate::error::{Error, Result};
use crate::model::{Evaluation, StatisticalModel};

/// Weights after one step, plus whether any fitness value was negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorStep {
    pub w: DVector<f64>,
    /// Set when some fitness value is negative; positivity of `w` is then not guaranteed.
    pub negative_fitness: bool,
}

/// `w'_α = w_α fitness_α / Σ_β fitness_β w_β`, renormalized.
pub fn replicator_step(w: &DVector<f64>, fitness: &DVector<f64>) -> Result<ReplicatorStep> {
    step_at(w, fitness, 0)
}

fn step_at(w: &DVector<f64>, fitness: &DVector<f64>, step: usize) -> Result<ReplicatorStep> {
    if w.len() != fitness.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            got: fitness.len(),
        });
    }
    let mean = w.dot(fitness);
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::ZeroMeanFitness { step });
    }
    let mut next = w.component_mul(fitness) / mean;
    let total = next.sum();
    next /= total;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("replicator weights".into()));
    }
    Ok(ReplicatorStep {
        w: next,
        negative_fitness: fitness.iter().any(|&v| v < 0.0),
    })
}

/// Increment form: `w'_α − w_α = w_α (fitness_α − ⟨fitness⟩) / ⟨fitness⟩`.
pub fn replicator_increment(w: &DVector<f64>, fitness: &DVector<f64>) -> Result<DVector<f64>> {
    if w.len() != fitness.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            got: fitness.len(),
        });
    }
    let mean = w.dot(fitness);
    if mean == 0.0 {
        return Err(Error::ZeroMeanFitness { step: 0 });
    }
    Ok(w.component_mul(&fitness.add_scalar(-mean)) / mean)
}

/// Additive offset `M` in `fitness = f + M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Shift {
    #[default]
    None,
    /// `M = −min_α f_α + 1`.
    Auto,
    Fixed(f64),
}

impl Shift {
    pub fn resolve(self, f: &DVector<f64>) -> f64 {
        match self {
            Shift::None => 0.0,
            Shift::Auto => -f.min() + 1.0,
            Shift::Fixed(m) => m,
        }
    }
}

/// Rule producing the next exponents from the current ones, the step index
/// and the current weights.
pub type FitnessUpdate<'a> = dyn FnMut(usize, &DVector<f64>, &DVector<f64>) -> DVector<f64> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub w: DVector<f64>,
    /// Fitness applied to reach the next step; the last entry holds the fitness
    /// that would be used next.
    pub fitness: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightTrajectory {
    pub steps: Vec<TrajectoryStep>,
    pub negative_fitness: bool,
    pub shift: f64,
}

impl WeightTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn weights(&self, t: usize) -> &DVector<f64> {
        &self.steps[t].w
    }
}

/// Orbit with static exponents `f^(t) = f(x)`.
pub fn replicator_orbit(model: &StatisticalModel, x: &[f64], steps: usize, shift: Shift) -> Result<WeightTrajectory> {
    replicator_orbit_with(model, x, steps, shift, &mut |_, f, _| f.clone())
}

/// Orbit whose exponents evolve by `update`; the shift is fixed from `f(x)`.
pub fn replicator_orbit_with(
    model: &StatisticalModel,
    x: &[f64],
    steps: usize,
    shift: Shift,
    update: &mut FitnessUpdate<'_>,
) -> Result<WeightTrajectory> {
    if steps == 0 {
        return Err(Error::Precondition("orbit needs at least one step".into()));
    }
    let eval = model.evaluate(x)?;
    let mut f = eval.f().clone();
    let offset = shift.resolve(&f);
    let mut w = eval.w.clone();
    let mut out = WeightTrajectory {
        steps: Vec::with_capacity(steps + 1),
        negative_fitness: false,
        shift: offset,
    };
    for t in 0..steps {
        let fitness = f.add_scalar(offset);
        let next = step_at(&w, &fitness, t)?;
        out.negative_fitness |= next.negative_fitness;
        out.steps.push(TrajectoryStep { w, fitness });
        w = next.w;
        f = update(t, &f, &w);
    }
    out.steps.push(TrajectoryStep {
        w,
        fitness: f.add_scalar(offset),
    });
    Ok(out)
}

/// The three stationarity statements for a deformation. The expectation
/// checks are `None` when their reweighted distribution is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stationarity {
    pub delta_s_zero: bool,
    /// `⟨δf⟩` under `w^(1) ∝ w f` equals `⟨δf⟩_w`.
    pub expectations_equal_w1: Option<bool>,
    /// `⟨f⟩` under `ŵ ∝ w δf` equals `⟨f⟩_w`.
    pub expectations_equal_what: Option<bool>,
}

impl Stationarity {
    /// Whether all defined statements agree.
    pub fn consistent(&self) -> bool {
        [self.expectations_equal_w1, self.expectations_equal_what]
            .into_iter()
            .flatten()
            .all(|b| b == self.delta_s_zero)
    }
}

/// Threshold below which a reweighting denominator counts as vanishing.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

pub fn stationarity_equivalence(eval: &Evaluation, df: &DVector<f64>) -> Result<Stationarity> {
    let delta_s = crate::deformation::delta_entropy(eval, df)?;
    let f = eval.f();
    let w = &eval.w;
    let tol = ZERO_TOL * tolerance_scale(f, df);
    let mean_df = w.dot(df);
    let mean_fdf = (0..eval.m()).map(|a| w[a] * f[a] * df[a]).sum::<f64>();

    let den_f = w.dot(f);
    let expectations_equal_w1 =
        (den_f.abs() > DENOMINATOR_FLOOR).then(|| (mean_fdf / den_f - mean_df).abs() <= tol / den_f.abs());
    let expectations_equal_what =
        (mean_df.abs() > DENOMINATOR_FLOOR).then(|| (mean_fdf / mean_df - eval.fbar).abs() <= tol / mean_df.abs());
    Ok(Stationarity {
        delta_s_zero: delta_s.abs() <= tol,
        expectations_equal_w1,
        expectations_equal_what,
    })
}

/// Nonnegative edge weights with node weights equal to the row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    edge_w: DMatrix<f64>,
    node_w: DVector<f64>,
}

/// Balancing tolerance for [`WeightedGraph::new`].
pub const BALANCE_TOL: f64 = 1e-10;

impl WeightedGraph {
    pub fn new(edge_w: DMatrix<f64>, node_w: DVector<f64>) -> Result<Self> {
        let m = node_w.len();
        if edge_w.shape() != (m, m) {
            return Err(Error::InvalidGraph(format!(
                "edge weights are {}x{}, expected {m}x{m}",
                edge_w.nrows(),
                edge_w.ncols()
            )));
        }
        if edge_w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidGraph("edge weights must be finite and nonnegative".into()));
        }
        for a in 0..m {
            let row: f64 = edge_w.row(a).sum();
            if (row - node_w[a]).abs() > BALANCE_TOL {
                return Err(Error::InvalidGraph(format!(
                    "vertex {a} unbalanced: edges sum to {row}, node weight {}",
                    node_w[a]
                )));
            }
        }
        Ok(WeightedGraph { edge_w, node_w })
    }

    /// `w_(αβ) = w_α w_β`, balanced whenever `Σ w = 1`.
    pub fn product_joint(w: &DVector<f64>) -> Result<Self> {
        Self::new(w * w.transpose(), w.clone())
    }

    pub fn m(&self) -> usize {
        self.node_w.len()
    }

    pub fn edge_weights(&self) -> &DMatrix<f64> {
        &self.edge_w
    }

    pub fn node_weights(&self) -> &DVector<f64> {
        &self.node_w
    }

    pub fn degree(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.node_w)
    }

    /// `L = D − W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        self.degree() - &self.edge_w
    }
}

pub fn laplacian(graph: &WeightedGraph) -> DMatrix<f64> {
    graph.laplacian()
}

/// `H` written through the product-joint Laplacian.
pub fn product_joint_laplacian_matches(w: &DVector<f64>) -> Result<f64> {
    let l = WeightedGraph::product_joint(w)?.laplacian();
    Ok((l - correlation_matrix(w)).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::complete_reversible;

    #[test]
    fn step_direct_arithmetic() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let s = replicator_step(&w, &DVector::from_vec(vec![2.0, 1.0])).unwrap();
        assert!((s.w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.w[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(!s.negative_fitness);
        let inc = replicator_increment(&w, &DVector::from_vec(vec![2.0, 1.0])).unwrap();
        assert!((&w + inc - s.w).amax() < 1e-14);
    }

    #[test]
    fn uniform_fitness_is_fixed_point() {
        let w = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let s = replicator_step(&w, &DVector::from_element(3, 4.2)).unwrap();
        assert!((s.w - w).amax() < 1e-15);
    }

    #[test]
    fn zero_mean_fitness_is_rejected() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        assert_eq!(
            replicator_step(&w, &DVector::from_vec(vec![1.0, -1.0])),
            Err(Error::ZeroMeanFitness { step: 0 })
        );
    }

    #[test]
    fn first_step_matches_reweighting() {
        let model = StatisticalModel::affine(DMatrix::from_row_slice(2, 1, &[0.0, 0.0]), DVector::from_vec(vec![2.0, 1.0])).unwrap();
        let tr = replicator_orbit(&model, &[0.0], 3, Shift::None).unwrap();
        let e = std::f64::consts::E;
        let den = 2.0 * e * e + e;
        assert!((tr.weights(1)[0] - 2.0 * e * e / den).abs() < 1e-15);
        assert!((tr.weights(1)[1] - e / den).abs() < 1e-15);
        assert_eq!(tr.len(), 4);
    }

    #[test]
    fn uniform_exponents_give_constant_orbit() {
        let model = StatisticalModel::affine(DMatrix::zeros(3, 1), DVector::from_element(3, 1.0)).unwrap();
        let tr = replicator_orbit(&model, &[0.0], 10, Shift::None).unwrap();
        for s in &tr.steps {
            assert!((s.w.add_scalar(-1.0 / 3.0)).amax() < 1e-15);
        }
    }

    #[test]
    fn auto_shift_keeps_orbit_in_simplex() {
        let model = StatisticalModel::affine(DMatrix::zeros(3, 1), DVector::from_vec(vec![-2.0, 0.5, 1.0])).unwrap();
        let tr = replicator_orbit(&model, &[0.0], 100, Shift::Auto).unwrap();
        assert_eq!(tr.shift, 3.0);
        assert!(!tr.negative_fitness);
        for s in &tr.steps {
            assert!(s.w.iter().all(|&v| v > 0.0));
            assert!((s.w.sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fitness_hook_is_applied() {
        let model = StatisticalModel::affine(DMatrix::zeros(2, 1), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let mut calls = 0;
        let tr = replicator_orbit_with(&model, &[0.0], 4, Shift::None, &mut |_, f, _| {
            calls += 1;
            f.map(|v| v + 1.0)
        })
        .unwrap();
        assert_eq!(calls, 4);
        assert_eq!(tr.steps[4].fitness, DVector::from_vec(vec![5.0, 6.0]));
    }

    #[test]
    fn stationarity_examples() {
        let model = StatisticalModel::affine(DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]), DVector::from_vec(vec![0.5, 0.0, 1.0])).unwrap();
        let ev = model.evaluate(&[0.3]).unwrap();
        let all_true = Stationarity {
            delta_s_zero: true,
            expectations_equal_w1: Some(true),
            expectations_equal_what: Some(true),
        };
        assert_eq!(stationarity_equivalence(&ev, &DVector::from_element(3, 0.7)).unwrap(), all_true);
        let rev = complete_reversible(&ev, &[1.0, 0.5], 0).unwrap();
        assert_eq!(stationarity_equivalence(&ev, &rev).unwrap(), all_true);
        let generic = stationarity_equivalence(&ev, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            generic,
            Stationarity {
                delta_s_zero: false,
                expectations_equal_w1: Some(false),
                expectations_equal_what: Some(false),
            }
        );
    }

    #[test]
    fn laplacian_examples() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let l = WeightedGraph::product_joint(&w).unwrap().laplacian();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
        let one = WeightedGraph::product_joint(&DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(laplacian(&one), DMatrix::zeros(1, 1));
        let bad = WeightedGraph::new(DMatrix::from_element(2, 2, 0.5), DVector::from_vec(vec![1.0, 0.5]));
        assert!(matches!(bad, Err(Error::InvalidGraph(_))));
    }
}
