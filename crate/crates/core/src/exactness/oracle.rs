//! Brute-force reference values and local feasibility repair.
//!
//! The grid oracle evaluates `f` on a uniform grid over a bounding box,
//! keeping points whose constraint values are within a slack proportional
//! to the grid spacing, so that the measure-zero sets cut out by equality
//! constraints are still hit. The best qualifying points then seed a local
//! repair (Gauss–Newton onto `𝒳`) followed by a feasible descent on `f`,
//! which turns the coarse grid value into a feasible upper bound on `v(f)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::relaxation::{BoundingBox, Pop, Sense};

/// Largest number of grid points evaluated by one oracle.
const MAX_GRID_POINTS: usize = 50_000_000;
/// Number of well-separated grid points refined locally.
const REFINE_SEEDS: usize = 16;
const POLISH_ITERS: usize = 60;
const DESCENT_ITERS: usize = 400;
/// Violation below which a repaired point counts as feasible.
pub const REPAIR_TOL: f64 = 1e-10;

/// `Σ |c| · deg · R^{deg−1}`, a bound on `‖∇p‖₁` over the cube of radius `R`.
fn gradient_bound(p: &Polynomial, radius: f64) -> f64 {
    p.terms()
        .map(|(m, c)| {
            let d = m.degree();
            if d == 0 {
                0.0
            } else {
                c.abs() * d as f64 * radius.powi(d as i32 - 1)
            }
        })
        .sum()
}

fn box_radius(bounds: &BoundingBox) -> f64 {
    bounds.lower.iter().chain(&bounds.upper).fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Merit `Σ_eq g² + Σ_ge min(g, 0)² + max(f − cap, 0)²`.
fn merit(pop: &Pop, cap: Option<(&Polynomial, f64)>, x: &[f64]) -> f64 {
    let mut m = 0.0;
    for c in &pop.constraints {
        let g = c.poly.eval_unchecked(x);
        m += match c.sense {
            Sense::Eq => g * g,
            Sense::Ge => g.min(0.0).powi(2),
        };
    }
    if let Some((f, v)) = cap {
        m += (f.eval_unchecked(x) - v).max(0.0).powi(2);
    }
    m
}

/// Residuals and Jacobian rows of the currently violated conditions.
fn active_system(pop: &Pop, cap: Option<(&Polynomial, f64)>, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut r = Vec::new();
    let mut jac = Vec::new();
    for c in &pop.constraints {
        let g = c.poly.eval_unchecked(x);
        if c.sense == Sense::Eq || g < 0.0 {
            r.push(g);
            jac.push(c.poly.gradient(x));
        }
    }
    if let Some((f, v)) = cap {
        let e = f.eval_unchecked(x) - v;
        if e > 0.0 {
            r.push(e);
            jac.push(f.gradient(x));
        }
    }
    (r, jac)
}

/// Minimum-norm Gauss–Newton step `−J⁺ r`.
fn gauss_newton_step(r: &[f64], jac: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    let j = DMatrix::from_fn(r.len(), n, |i, k| jac[i][k]);
    let svd = j.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    let d = svd.solve(&rhs, 1e-12 * smax).ok()?;
    d.iter().all(|v| v.is_finite()).then(|| d.iter().copied().collect())
}

/// Moves `x0` onto `𝒳` — and below `cap.1` in the polynomial `cap.0` when
/// given — by damped Gauss–Newton on the violated conditions. Returns the
/// final iterate; callers check its violation.
pub fn repair(pop: &Pop, x0: &[f64], cap: Option<(&Polynomial, f64)>) -> Vec<f64> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut m = merit(pop, cap, &x);
    for _ in 0..POLISH_ITERS {
        if m <= 1e-30 {
            break;
        }
        let (r, jac) = active_system(pop, cap, &x);
        let Some(d) = gauss_newton_step(&r, &jac, n) else { break };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-8 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let mt = merit(pop, cap, &trial);
            if mt < m * (1.0 - 1e-4 * alpha) {
                x = trial;
                m = mt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    x
}

/// Feasible descent on `f` from a feasible `x0`: steps along `−∇f` followed
/// by a repair back onto `𝒳`, accepted only when feasible and decreasing.
pub fn descend(pop: &Pop, f: &Polynomial, x0: &[f64], initial_step: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut fx = f.eval_unchecked(&x);
    let mut t = initial_step;
    for _ in 0..DESCENT_ITERS {
        let g = f.gradient(&x);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || t < 1e-11 {
            break;
        }
        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b / norm).collect();
        let xp = repair(pop, &trial, None);
        let fp = f.eval_unchecked(&xp);
        let feasible = pop.violation(&xp).is_ok_and(|v| v <= REPAIR_TOL);
        if feasible && fp < fx - 1e-15 * (1.0 + fx.abs()) {
            x = xp;
            fx = fp;
            t = (2.0 * t).min(initial_step * 16.0);
        } else {
            t *= 0.5;
        }
    }
    x
}

/// Grid points whose constraint values lie within `slack` of feasibility.
#[derive(Clone, Debug)]
pub struct FeasibleGrid {
    n: usize,
    resolution: usize,
    spacing: f64,
    slack: f64,
    diameter: f64,
    points: Vec<f64>,
}

impl FeasibleGrid {
    /// Evaluates the constraints on `resolution` points per axis.
    ///
    /// The slack is `2 · (diameter / resolution) · (1 + G)` where `G` bounds
    /// the constraint gradients over the box through their coefficients.
    pub fn new(pop: &Pop, bounds: &BoundingBox, resolution: usize) -> Result<Self> {
        let n = pop.n;
        if bounds.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: bounds.dim() });
        }
        if resolution < 2 {
            return Err(Error::Invalid("grid resolution must be at least 2".into()));
        }
        let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(resolution).filter(|&t| t <= MAX_GRID_POINTS));
        let Some(total) = total else {
            return Err(Error::Invalid(format!("grid of {resolution}^{n} points is too large")));
        };
        let radius = box_radius(bounds);
        let grad = pop.constraints.iter().map(|c| gradient_bound(&c.poly, radius)).fold(0.0, f64::max);
        let diameter = bounds.diameter();
        let slack = 2.0 * (diameter / resolution as f64) * (1.0 + grad);
        let steps: Vec<f64> =
            (0..n).map(|k| (bounds.upper[k] - bounds.lower[k]) / (resolution - 1) as f64).collect();
        let spacing = steps.iter().copied().fold(0.0, f64::max);
        let coords = |mut idx: usize| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let i = idx % resolution;
                    idx /= resolution;
                    bounds.lower[k] + i as f64 * steps[k]
                })
                .collect()
        };
        let points: Vec<f64> = (0..total)
            .into_par_iter()
            .filter_map(|idx| {
                let x = coords(idx);
                let ok = pop.constraints.iter().all(|c| {
                    let g = c.poly.eval_unchecked(&x);
                    match c.sense {
                        Sense::Ge => g >= -slack,
                        Sense::Eq => g.abs() <= slack,
                    }
                });
                ok.then_some(x)
            })
            .flatten_iter()
            .collect();
        Ok(Self { n, resolution, spacing, slack, diameter, points })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.n)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Largest distance between neighbouring grid points along an axis.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    /// Brute-force estimate of `min f` over `𝒳`.
    pub fn oracle(&self, pop: &Pop, f: &Polynomial) -> Result<GridOracle> {
        if f.nvars() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: f.nvars() });
        }
        let count = self.len();
        let radius = self.points().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let error_bound = self.spacing * (self.n as f64).sqrt() * gradient_bound(f, radius.max(self.spacing));
        if count == 0 {
            return Ok(GridOracle {
                value: f64::INFINITY,
                raw_value: f64::INFINITY,
                error_bound,
                argmin: None,
                qualifying: 0,
                refined: false,
            });
        }
        let values: Vec<f64> = (0..count).into_par_iter().map(|i| f.eval_unchecked(self.point(i))).collect();
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let raw_value = values[order[0]];

        // well-separated seeds, best first
        let separation = (8.0 * self.spacing).max(self.diameter / 20.0);
        let mut seeds: Vec<usize> = Vec::new();
        for &i in &order {
            let p = self.point(i);
            let far = seeds.iter().all(|&s| {
                let q = self.point(s);
                p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= separation
            });
            if far {
                seeds.push(i);
                if seeds.len() == REFINE_SEEDS {
                    break;
                }
            }
        }
        let refined: Vec<Option<(f64, Vec<f64>)>> = seeds
            .par_iter()
            .map(|&i| {
                let x = repair(pop, self.point(i), None);
                if pop.violation(&x).ok()? > REPAIR_TOL {
                    return None;
                }
                let x = descend(pop, f, &x, self.spacing);
                Some((f.eval_unchecked(&x), x))
            })
            .collect();
        let best = refined.into_iter().flatten().fold(None::<(f64, Vec<f64>)>, |acc, cand| match acc {
            Some(a) if a.0 <= cand.0 => Some(a),
            _ => Some(cand),
        });
        Ok(match best {
            Some((value, x)) => {
                GridOracle { value, raw_value, error_bound, argmin: Some(x), qualifying: count, refined: true }
            }
            None => GridOracle {
                value: raw_value,
                raw_value,
                error_bound,
                argmin: Some(self.point(order[0]).to_vec()),
                qualifying: count,
                refined: false,
            },
        })
    }
}

/// Result of the grid oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridOracle {
    /// Smallest value of `f` over the repaired seeds: a feasible upper
    /// bound on `v(f)` when `refined`, otherwise the raw grid minimum.
    pub value: f64,
    /// Minimum of `f` over the qualifying grid points.
    pub raw_value: f64,
    /// `spacing · √n · ‖∇f‖` bound: the discretization error of the raw grid.
    pub error_bound: f64,
    pub argmin: Option<Vec<f64>>,
    /// Number of grid points within the slack of `𝒳`.
    pub qualifying: usize,
    pub refined: bool,
}

/// Brute-force reference for `v(f)`; `+∞` when no grid point qualifies.
pub fn value_oracle_grid(pop: &Pop, f: &Polynomial, bounds: &BoundingBox, resolution: usize) -> Result<f64> {
    Ok(FeasibleGrid::new(pop, bounds, resolution)?.oracle(pop, f)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::{four_points, nonconvex};

    #[test]
    fn repair_lands_on_four_points() {
        let pop = four_points();
        for (start, target) in [([0.1, -0.05], [0.0, 0.0]), ([1.9, 2.1], [2.0, 2.0]), ([0.9, 0.1], [1.0, 0.0])] {
            let x = repair(&pop, &start, None);
            assert!((x[0] - target[0]).abs() < 1e-10 && (x[1] - target[1]).abs() < 1e-10, "{x:?}");
        }
    }

    #[test]
    fn repair_with_cap_reaches_nonconvex_corner() {
        let pop = nonconvex();
        let f = Polynomial::linear(&[0.0, -1.0, -1.0]).unwrap();
        let x = repair(&pop, &[-0.33, 0.33], Some((&f, 0.0)));
        let t = (5f64.sqrt() - 1.0) / 2.0;
        assert!((x[0] + t).abs() < 1e-9 && (x[1] - t).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn four_point_oracle_is_exact() {
        let pop = four_points();
        let b = pop.bounds.clone().unwrap();
        let grid = FeasibleGrid::new(&pop, &b, 201).unwrap();
        let f = Polynomial::linear(&[0.0, 1.0, 1.0]).unwrap();
        let o = grid.oracle(&pop, &f).unwrap();
        assert!(o.refined);
        assert!(o.value.abs() < 1e-12, "{o:?}");
        let g = Polynomial::linear(&[0.0, -1.0, -1.0]).unwrap();
        assert!((grid.oracle(&pop, &g).unwrap().value + 4.0).abs() < 1e-12);
    }

    #[test]
    fn empty_grid_gives_infinity() {
        let pop = Pop::new(1, vec![crate::relaxation::Constraint::ge(Polynomial::constant(1, -1.0))]).unwrap();
        let b = BoundingBox::new(vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(value_oracle_grid(&pop, &Polynomial::var(1, 0), &b, 11).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_objective_has_zero_value() {
        let pop = nonconvex();
        let b = pop.bounds.clone().unwrap();
        assert_eq!(value_oracle_grid(&pop, &Polynomial::zero(2), &b, 51).unwrap(), 0.0);
    }
}
