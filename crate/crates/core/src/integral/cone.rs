//! Regions cut out of a pointed cone in `R^{n+1}` by two linear statistical
//! hypersurfaces, and the identity `∫_{D₂} S − ∫_{D₁} S = (n+1)·vol(Ω)`.
//!
//! Every generator `(ξ, η)` satisfies `η > max_α a_α·ξ` for both models. Along
//! a cone ray `s ↦ s(ξ, η)` the gap `F(sξ) − sη` is then convex and strictly
//! decreasing from `ln m`, so each ray meets each surface exactly once.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_box, QuadratureOptions};
use crate::error::{Error, Result};
use crate::model::{gibbs_weights, log_sum_exp, shannon_entropy, ModelDocument, StatisticalModel};

/// Tolerance for the surface and cone-face quadratures.
pub const SURFACE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ConeRegion {
    n: usize,
    generators: Vec<DVector<f64>>,
    lower: StatisticalModel,
    upper: StatisticalModel,
    /// Unit inward facet normals.
    facets: Vec<DVector<f64>>,
    /// Generator indices on each facet.
    facet_generators: Vec<Vec<usize>>,
    /// Simplicial subcones tiling the cone, as `n + 1` generator indices each.
    pieces: Vec<Vec<usize>>,
}

/// Signed normal of the hyperplane through the origin spanned by the columns
/// of an `(n+1)×n` matrix, by cofactor expansion.
fn cofactor_normal(cols: &DMatrix<f64>) -> DVector<f64> {
    let dim = cols.nrows();
    DVector::from_fn(dim, |i, _| {
        let minor = cols.clone().remove_row(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

fn subsets(k: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, size, &mut Vec::new(), &mut out);
    out
}

fn linear_matrix(model: &StatisticalModel) -> Result<&DMatrix<f64>> {
    match model.affine_parts() {
        Some((a, _)) if model.is_linear() => Ok(a),
        _ => Err(Error::Precondition("volume identity needs linear models (affine with b = 0)".into())),
    }
}

/// `max_α a_α·ξ`.
fn tropical(a: &DMatrix<f64>, xi: &[f64]) -> f64 {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)] * xi[c]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `F(tξ) = tη` by Newton's method from `t = 0`; convexity makes the
/// iterates increase monotonically to the root.
pub fn ray_crossing(a: &DMatrix<f64>, direction: &[f64]) -> f64 {
    let n = a.ncols();
    let (xi, eta) = (&direction[..n], direction[n]);
    let u: Vec<f64> = (0..a.nrows())
        .map(|r| (0..n).map(|c| a[(r, c)] * xi[c]).sum())
        .collect();
    if u.len() == 1 {
        return 0.0;
    }
    let mut t = 0.0f64;
    let mut scaled = vec![0.0; u.len()];
    for _ in 0..200 {
        for (s, ui) in scaled.iter_mut().zip(&u) {
            *s = t * ui;
        }
        let phi = log_sum_exp(&scaled) - t * eta;
        let w = gibbs_weights(&scaled);
        let slope = w.iter().zip(&u).map(|(wi, ui)| wi * ui).sum::<f64>() - eta;
        let step = -phi / slope;
        t += step;
        if step.abs() <= 1e-15 * t.abs() {
            break;
        }
    }
    t
}

/// Maps the unit cube onto the standard simplex; returns the Jacobian factor.
fn duffy(u: &[f64], lambda: &mut [f64]) -> f64 {
    let k = u.len();
    let mut prefix = 1.0;
    let mut jac = 1.0;
    for j in 0..k {
        prefix *= u[j];
        lambda[j] = if j + 1 < k { prefix * (1.0 - u[j + 1]) } else { prefix };
        jac *= u[j].powi((k - 1 - j) as i32);
    }
    jac
}

impl ConeRegion {
    pub fn new(generators: Vec<Vec<f64>>, lower: StatisticalModel, upper: StatisticalModel) -> Result<Self> {
        let n = lower.n();
        if upper.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "lower model has n = {n}, upper has n = {}",
                upper.n()
            )));
        }
        let a_lower = linear_matrix(&lower)?;
        let a_upper = linear_matrix(&upper)?;
        let dim = n + 1;
        for g in &generators {
            if g.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("cone generator".into()));
            }
        }
        let k = generators.len();
        if k < dim {
            return Err(Error::DegenerateRegion(format!("cone needs at least {dim} generators, got {k}")));
        }
        let g: Vec<DVector<f64>> = generators.iter().map(|v| DVector::from_column_slice(v)).collect();
        let gm = DMatrix::from_columns(&g);
        if gm.rank(1e-10 * gm.amax().max(1.0)) < dim {
            return Err(Error::DegenerateRegion("cone is not full-dimensional".into()));
        }
        for (j, gj) in g.iter().enumerate() {
            let scale = 1f64.max(gj.amax());
            for a in [a_lower, a_upper] {
                let margin = gj[n] - tropical(a, &gj.as_slice()[..n]);
                if !(margin > 1e-12 * scale) {
                    return Err(Error::DegenerateRegion(format!(
                        "generator {j} does not cross both surfaces (margin {margin}); region is not compact"
                    )));
                }
            }
        }

        let unit: Vec<DVector<f64>> = g.iter().map(|v| v.normalize()).collect();
        let mut facets: Vec<DVector<f64>> = Vec::new();
        let mut facet_generators = Vec::new();
        for subset in subsets(k, n) {
            let cols: Vec<DVector<f64>> = subset.iter().map(|&i| unit[i].clone()).collect();
            let normal = if n == 0 {
                continue;
            } else {
                cofactor_normal(&DMatrix::from_columns(&cols))
            };
            let len = normal.norm();
            if len < 1e-10 {
                continue;
            }
            let normal = normal / len;
            let dots: Vec<f64> = unit.iter().map(|v| v.dot(&normal)).collect();
            let oriented = if dots.iter().all(|&d| d >= -1e-12) {
                normal
            } else if dots.iter().all(|&d| d <= 1e-12) {
                -normal
            } else {
                continue;
            };
            if facets.iter().any(|f| f.dot(&oriented) > 1.0 - 1e-12) {
                continue;
            }
            let on: Vec<usize> = (0..k).filter(|&j| unit[j].dot(&oriented).abs() <= 1e-12).collect();
            facets.push(oriented);
            facet_generators.push(on);
        }

        let pieces = match n {
            0 => vec![vec![0]],
            1 => {
                let ends: Vec<usize> = facet_generators.iter().map(|on| on[0]).collect();
                if ends.len() != 2 {
                    return Err(Error::DegenerateRegion("planar cone must have two bounding rays".into()));
                }
                vec![ends]
            }
            2 => {
                let mut boundary: Vec<usize> = facet_generators.iter().flatten().copied().collect();
                boundary.sort_unstable();
                boundary.dedup();
                let axis = unit.iter().fold(DVector::zeros(dim), |acc, v| acc + v).normalize();
                let seed = if axis[0].abs() < 0.9 {
                    DVector::from_column_slice(&[1.0, 0.0, 0.0])
                } else {
                    DVector::from_column_slice(&[0.0, 1.0, 0.0])
                };
                let e1 = (&seed - &axis * axis.dot(&seed)).normalize();
                let e2 = axis.cross(&e1);
                boundary.sort_by(|&i, &j| {
                    let ai = unit[i].dot(&e2).atan2(unit[i].dot(&e1));
                    let aj = unit[j].dot(&e2).atan2(unit[j].dot(&e1));
                    ai.total_cmp(&aj)
                });
                let mut pieces = Vec::new();
                for w in 1..boundary.len().saturating_sub(1) {
                    let tri = vec![boundary[0], boundary[w], boundary[w + 1]];
                    let det = DMatrix::from_columns(&[unit[tri[0]].clone(), unit[tri[1]].clone(), unit[tri[2]].clone()])
                        .determinant();
                    if det.abs() > 1e-12 {
                        pieces.push(tri);
                    }
                }
                pieces
            }
            _ => {
                if k != dim {
                    return Err(Error::Precondition(format!(
                        "cones in dimension {dim} must be simplicial ({dim} generators)"
                    )));
                }
                vec![(0..dim).collect()]
            }
        };

        Ok(ConeRegion {
            n,
            generators: g,
            lower,
            upper,
            facets,
            facet_generators,
            pieces,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[DVector<f64>] {
        &self.generators
    }

    pub fn lower(&self) -> &StatisticalModel {
        &self.lower
    }

    pub fn upper(&self) -> &StatisticalModel {
        &self.upper
    }

    pub fn facets(&self) -> &[DVector<f64>] {
        &self.facets
    }

    /// Simplicial subcones, as generator indices.
    pub fn pieces(&self) -> &[Vec<usize>] {
        &self.pieces
    }

    pub fn in_cone(&self, p: &[f64]) -> bool {
        let scale = 1e-14 * p.iter().fold(0f64, |acc, v| acc.max(v.abs()));
        self.facets
            .iter()
            .all(|f| f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() >= -scale)
    }

    /// `+1` between lower and upper surface, `−1` between upper and lower, `0` outside.
    pub fn signed_indicator(&self, p: &[f64]) -> f64 {
        if !self.in_cone(p) {
            return 0.0;
        }
        let (x, h) = (&p[..self.n], p[self.n]);
        let heights = |m: &StatisticalModel| {
            let (a, _) = m.affine_parts().expect("linear model");
            let f: Vec<f64> = (0..a.nrows())
                .map(|r| (0..self.n).map(|c| a[(r, c)] * x[c]).sum())
                .collect();
            log_sum_exp(&f)
        };
        let (fl, fu) = (heights(&self.lower), heights(&self.upper));
        if fl <= h && h <= fu {
            1.0
        } else if fu <= h && h <= fl {
            -1.0
        } else {
            0.0
        }
    }

    /// Box containing `Ω`: the hull of the apex and `T g_j`, where `T` bounds
    /// every crossing parameter.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.n + 1;
        let mut reach = 0f64;
        let mut margin = f64::INFINITY;
        for model in [&self.lower, &self.upper] {
            let (a, _) = model.affine_parts().expect("linear model");
            reach = reach.max((a.nrows() as f64).ln());
            for g in &self.generators {
                margin = margin.min(g[self.n] - tropical(a, &g.as_slice()[..self.n]));
            }
        }
        let t_max = reach / margin;
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for g in &self.generators {
            for d in 0..dim {
                lo[d] = f64::min(lo[d], t_max * g[d]);
                hi[d] = f64::max(hi[d], t_max * g[d]);
            }
        }
        (lo, hi)
    }

    /// `∫_D S dx` over the projection `D` of the surface patch inside the cone.
    pub fn surface_integral(&self, model: &StatisticalModel) -> Result<(f64, f64)> {
        let a = linear_matrix(model)?;
        let n = self.n;
        let (mut value, mut error) = (0.0, 0.0);
        for piece in &self.pieces {
            let base = &self.generators[piece[0]];
            let edges: Vec<DVector<f64>> = piece[1..].iter().map(|&j| &self.generators[j] - base).collect();
            let mut lambda = vec![0.0; n];
            let integrand = |u: &[f64]| -> Result<f64> {
                let jac = duffy(u, &mut lambda);
                let mut d = base.clone();
                for (l, e) in lambda.iter().zip(&edges) {
                    d += e * *l;
                }
                let t = ray_crossing(a, d.as_slice());
                let xi = d.rows(0, n);
                let x: DVector<f64> = xi * t;
                let f = a * &x;
                let w = gibbs_weights(f.as_slice());
                let grad = a.transpose() * &w;
                let den = grad.dot(&xi) - d[n];
                let cols: Vec<DVector<f64>> = edges
                    .iter()
                    .map(|e| {
                        let e_xi = e.rows(0, n);
                        let dt = -t * (grad.dot(&e_xi) - e[n]) / den;
                        xi * dt + e_xi * t
                    })
                    .collect();
                let det = DMatrix::from_columns(&cols).determinant();
                Ok(shannon_entropy(w.as_slice()) * det.abs() * jac)
            };
            let r = integrate_box(
                integrand,
                &vec![0.0; n],
                &vec![1.0; n],
                QuadratureOptions {
                    tolerance: SURFACE_TOLERANCE / self.pieces.len() as f64,
                    ..Default::default()
                },
            )?;
            value += r.value;
            error += r.error_estimate;
        }
        Ok((value, error))
    }

    /// `∫ X·ν dA` over the cone faces between the two surfaces.
    pub fn cone_face_flux(&self) -> Result<f64> {
        let n = self.n;
        let a_lower = linear_matrix(&self.lower)?;
        let a_upper = linear_matrix(&self.upper)?;
        let mut total = 0.0;
        for (normal, on) in self.facets.iter().zip(&self.facet_generators) {
            let face = self.face_generators(on);
            let base = &self.generators[face[0]];
            let edges: Vec<DVector<f64>> = face[1..].iter().map(|&j| &self.generators[j] - base).collect();
            let mut mu = vec![0.0; n - 1];
            let integrand = |u: &[f64]| -> Result<f64> {
                let jac = duffy(&u[1..], &mut mu);
                let mut e = base.clone();
                for (m, edge) in mu.iter().zip(&edges) {
                    e += edge * *m;
                }
                let tl = ray_crossing(a_lower, e.as_slice());
                let tu = ray_crossing(a_upper, e.as_slice());
                let s = tl + u[0] * (tu - tl);
                let mut frame = vec![e.clone()];
                frame.extend(edges.iter().cloned());
                let basis = DMatrix::from_columns(&frame);
                let gram = (basis.transpose() * &basis).determinant().max(0.0).sqrt();
                let area = (tu - tl).abs() * s.abs().powi(n as i32 - 1) * gram;
                Ok(s * e.dot(normal) * area * jac)
            };
            let r = integrate_box(
                integrand,
                &vec![0.0; n],
                &vec![1.0; n],
                QuadratureOptions {
                    tolerance: SURFACE_TOLERANCE,
                    ..Default::default()
                },
            )?;
            total += r.value;
        }
        Ok(total)
    }

    /// The `n` generators spanning a facet; extra coplanar ones are dropped.
    fn face_generators(&self, on: &[usize]) -> Vec<usize> {
        if on.len() <= self.n || self.n == 1 {
            return on[..self.n.min(on.len())].to_vec();
        }
        subsets(on.len(), self.n)
            .into_iter()
            .map(|s| s.into_iter().map(|i| on[i]).collect::<Vec<_>>())
            .max_by(|p, q| {
                let size = |idx: &Vec<usize>| {
                    let cols: Vec<DVector<f64>> = idx.iter().map(|&i| self.generators[i].normalize()).collect();
                    let m = DMatrix::from_columns(&cols);
                    (m.transpose() * m).determinant()
                };
                size(p).total_cmp(&size(q))
            })
            .expect("facet has generators")
    }

    /// Signed Monte Carlo volume and its standard error.
    pub fn monte_carlo_volume(&self, samples: usize, seed: u64) -> Result<(f64, f64)> {
        if samples < 2 {
            return Err(Error::Precondition("Monte Carlo volume needs at least 2 samples".into()));
        }
        let dim = self.n + 1;
        let (lo, hi) = self.bounding_box();
        let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        if box_volume == 0.0 {
            return Ok((0.0, 0.0));
        }
        let per_axis = ((samples as f64 / 32.0).powf(1.0 / dim as f64).floor() as usize).clamp(1, 64);
        let cells = per_axis.pow(dim as u32);
        let base = samples / cells;
        let extra = samples % cells;
        let cell_volume = box_volume / cells as f64;
        let results: Vec<(f64, f64)> = (0..cells)
            .into_par_iter()
            .map(|c| {
                let count = base + usize::from(c < extra);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let mut index = c;
                let mut cell_lo = vec![0.0; dim];
                let mut width = vec![0.0; dim];
                for d in 0..dim {
                    let i = index % per_axis;
                    index /= per_axis;
                    width[d] = (hi[d] - lo[d]) / per_axis as f64;
                    cell_lo[d] = lo[d] + i as f64 * width[d];
                }
                let mut p = vec![0.0; dim];
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for _ in 0..count {
                    for d in 0..dim {
                        p[d] = cell_lo[d] + width[d] * rng.gen::<f64>();
                    }
                    let v = self.signed_indicator(&p);
                    sum += v;
                    sum_sq += v * v;
                }
                let nf = count as f64;
                let mean = sum / nf;
                let var = if count > 1 {
                    ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                (cell_volume * mean, cell_volume * cell_volume * var / nf)
            })
            .collect();
        let (volume, variance) = results.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
        Ok((volume, variance.sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeCheck {
    /// `∫_{D_upper} S dx − ∫_{D_lower} S dx`.
    #[serde(rename = "delta_S")]
    pub delta_s: f64,
    /// `(n+1)` times the signed Monte Carlo volume of `Ω`.
    pub volume_times: f64,
    /// Standard error of `volume_times`.
    pub mc_sigma: f64,
    /// Flux of the position field through the cone faces.
    pub cone_face_flux: f64,
    pub quadrature_error: f64,
}

pub fn linear_entropy_volume_check(region: &ConeRegion, samples: usize, seed: u64) -> Result<VolumeCheck> {
    if region.lower == region.upper {
        return Ok(VolumeCheck {
            delta_s: 0.0,
            volume_times: 0.0,
            mc_sigma: 0.0,
            cone_face_flux: 0.0,
            quadrature_error: 0.0,
        });
    }
    let (upper, e_upper) = region.surface_integral(&region.upper)?;
    let (lower, e_lower) = region.surface_integral(&region.lower)?;
    let (volume, sigma) = region.monte_carlo_volume(samples, seed)?;
    let k = (region.n + 1) as f64;
    Ok(VolumeCheck {
        delta_s: upper - lower,
        volume_times: k * volume,
        mc_sigma: k * sigma,
        cone_face_flux: region.cone_face_flux()?,
        quadrature_error: e_upper + e_lower,
    })
}

/// JSON region file: generators plus the two model documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionDocument {
    pub generators: Vec<Vec<f64>>,
    pub lower: ModelDocument,
    pub upper: ModelDocument,
}

impl RegionDocument {
    pub fn into_region(self) -> Result<ConeRegion> {
        ConeRegion::new(self.generators, self.lower.into_model()?, self.upper.into_model()?)
    }
}

pub fn parse_region(text: &str) -> Result<ConeRegion> {
    let doc: RegionDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_region()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(rows: &[&[f64]]) -> StatisticalModel {
        let n = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        StatisticalModel::linear(DMatrix::from_row_slice(rows.len(), n, &flat)).unwrap()
    }

    #[test]
    fn crossing_solves_the_ray_equation() {
        let model = linear(&[&[1.0], &[-1.0]]);
        let (a, _) = model.affine_parts().unwrap();
        let t = ray_crossing(a, &[1.0, 2.0]);
        assert!((model.free_energy(&[t]).unwrap() - 2.0 * t).abs() < 1e-14);
    }

    #[test]
    fn wedge_facets_and_membership() {
        let region = ConeRegion::new(
            vec![vec![1.0, 3.0], vec![-1.0, 3.0]],
            linear(&[&[1.0], &[-1.0]]),
            linear(&[&[2.0], &[0.0], &[-2.0]]),
        )
        .unwrap();
        assert_eq!(region.facets().len(), 2);
        assert!(region.in_cone(&[0.0, 1.0]));
        assert!(!region.in_cone(&[1.0, 1.0]));
        let (lo, hi) = region.bounding_box();
        assert!(lo[1] == 0.0 && hi[1] > 0.0);
    }

    #[test]
    fn invalid_cones_are_rejected() {
        let m = linear(&[&[1.0], &[-1.0]]);
        let r = ConeRegion::new(vec![vec![1.0, 0.5], vec![-1.0, 3.0]], m.clone(), m.clone());
        assert!(matches!(r, Err(Error::DegenerateRegion(_))));
        let r = ConeRegion::new(vec![vec![1.0, 3.0], vec![2.0, 6.0]], m.clone(), m.clone());
        assert!(matches!(r, Err(Error::DegenerateRegion(_))));
        let affine = StatisticalModel::affine(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![0.0, 1.0])).unwrap();
        let r = ConeRegion::new(vec![vec![1.0, 3.0], vec![-1.0, 3.0]], m, affine);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn identical_models_give_zeros() {
        let m = linear(&[&[1.0], &[-1.0]]);
        let region = ConeRegion::new(vec![vec![1.0, 3.0], vec![-1.0, 3.0]], m.clone(), m).unwrap();
        let c = linear_entropy_volume_check(&region, 1000, 1).unwrap();
        assert_eq!((c.delta_s, c.volume_times, c.mc_sigma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn square_cone_is_fanned() {
        let g = vec![
            vec![1.0, 1.0, 4.0],
            vec![-1.0, 1.0, 4.0],
            vec![-1.0, -1.0, 4.0],
            vec![1.0, -1.0, 4.0],
            vec![0.0, 0.0, 4.0],
        ];
        let m = linear(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let region = ConeRegion::new(g, m.clone(), m).unwrap();
        assert_eq!(region.facets().len(), 4);
        assert_eq!(region.pieces().len(), 2);
    }

    #[test]
    fn duffy_covers_simplex() {
        let mut l = vec![0.0; 2];
        let j = duffy(&[0.5, 0.5], &mut l);
        assert_eq!(l, vec![0.25, 0.25]);
        assert_eq!(j, 0.5);
    }
}
