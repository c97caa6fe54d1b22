//! Dense primal-dual interior-point solver for conic programs
//!
//! ```text
//!   minimize    c'x
//!   subject to  A x = b,   x ∈ K = S^{s_1}_+ × … × S^{s_p}_+ × ℝ^{nn}_+ × ℝ^{free}
//! ```
//!
//! and the dual `maximize b'y s.t. c − A'y = s ∈ K*`, where the free block
//! of `K*` is `{0}`. Symmetric blocks are stored as scaled lower triangles
//! (`svec`, off-diagonals times √2) so the trace inner product is the
//! plain dot product.
//!
//! The solver runs a homogeneous self-dual embedding with Nesterov–Todd
//! scaling and a Mehrotra predictor-corrector, so infeasible problems
//! terminate with a Farkas certificate instead of diverging.

mod cones;
mod facial;
mod ipm;
mod presolve;

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cones::{smat, svec, svec_len};
pub use facial::{reduce_face, FaceReduction};

/// Product cone layout: PSD blocks first, then the nonnegative orthant,
/// then free variables.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConeSpec {
    pub psd_block_sizes: Vec<usize>,
    pub nonneg_count: usize,
    pub free_count: usize,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.psd_dim() + self.nonneg_count + self.free_count
    }

    pub fn psd_dim(&self) -> usize {
        self.psd_block_sizes.iter().map(|&s| svec_len(s)).sum()
    }

    /// Offset of each PSD block in the scalarized vector.
    pub fn psd_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.psd_block_sizes
            .iter()
            .map(|&s| {
                let o = off;
                off += svec_len(s);
                o
            })
            .collect()
    }

    pub fn nonneg_offset(&self) -> usize {
        self.psd_dim()
    }

    pub fn free_offset(&self) -> usize {
        self.psd_dim() + self.nonneg_count
    }

    /// Barrier parameter `ν`: sum of block orders plus orthant dimension.
    pub fn degree(&self) -> usize {
        self.psd_block_sizes.iter().sum::<usize>() + self.nonneg_count
    }
}

/// One sparse equality row `a'x = rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub row: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub cone: ConeSpec,
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalTrouble,
}

/// Relative residuals of a primal-dual pair.
///
/// `primal_feas` combines `‖Ax − b‖∞ / (1 + ‖b‖∞)` with the distance of `x`
/// to `K`; `dual_feas` is the distance of `c − A'y` to `K*` scaled by
/// `1 + ‖c‖∞`; `gap` is `|c'x − b'y| / (1 + |c'x|)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_feas.max(self.dual_feas).max(self.gap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal point, or the improving ray `x` (`c'x = −1`) when dual infeasible.
    pub primal: Vec<f64>,
    /// Equality multipliers, or the Farkas ray `y` (`b'y = 1`) when primal infeasible.
    pub dual: Vec<f64>,
    /// Dual slack `s`, blockwise in `K*`.
    pub slack: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub residuals: Residuals,
    /// Residual of the infeasibility certificate, when one was returned.
    pub certificate_residual: Option<f64>,
    pub iterations: usize,
    /// Columns fixed at zero by facial reduction. When positive, residuals
    /// and certificates refer to the reduced problem and the dual slack on
    /// the removed coordinates need not lie in `K*`.
    pub reduced_columns: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Run diagonal facial reduction before the interior-point method.
    pub facial_reduction: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, facial_reduction: false }
    }
}

impl ConicProblem {
    pub fn new(cone: ConeSpec, objective: Vec<f64>, constraints: Vec<LinearConstraint>) -> Result<Self> {
        let p = Self { cone, objective, constraints };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.cone.dim()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.objective.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.objective.len() });
        }
        if self.cone.psd_block_sizes.contains(&0) {
            return Err(Error::Invalid("PSD block sizes must be positive".into()));
        }
        for c in &self.constraints {
            if let Some(&(j, _)) = c.row.iter().find(|(j, _)| *j >= n) {
                return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
            }
            if !c.rhs.is_finite() || c.row.iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::Invalid("constraint data must be finite".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("objective must be finite".into()));
        }
        Ok(())
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    pub(crate) fn dense_a(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.num_rows(), self.dim());
        for (i, c) in self.constraints.iter().enumerate() {
            for &(j, v) in &c.row {
                a[(i, j)] += v;
            }
        }
        a
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.row.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `A' y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (c, &yi) in self.constraints.iter().zip(y) {
            for &(j, v) in &c.row {
                out[j] += v * yi;
            }
        }
        out
    }

    /// Line-oriented text dump: a cone line, the objective line, then one
    /// `row` line per constraint with `index:value` pairs.
    pub fn to_debug_dump(&self) -> String {
        let mut s = String::new();
        let blocks: Vec<String> = self.cone.psd_block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(
            s,
            "cone psd={} nonneg={} free={}",
            blocks.join(","),
            self.cone.nonneg_count,
            self.cone.free_count
        );
        s.push('c');
        for v in &self.objective {
            let _ = write!(s, " {v:.16e}");
        }
        s.push('\n');
        for c in &self.constraints {
            let _ = write!(s, "row {:.16e}", c.rhs);
            for (j, v) in &c.row {
                let _ = write!(s, " {j}:{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_debug_dump(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Invalid(format!("debug dump: {msg}"));
        let mut lines = text.lines();
        let cone_line = lines.next().ok_or_else(|| bad("missing cone line"))?;
        let mut cone = ConeSpec::default();
        for field in cone_line.strip_prefix("cone ").ok_or_else(|| bad("cone line"))?.split(' ') {
            let (k, v) = field.split_once('=').ok_or_else(|| bad("cone field"))?;
            match k {
                "psd" => {
                    cone.psd_block_sizes = v
                        .split(',')
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse().map_err(|_| bad("psd size")))
                        .collect::<Result<_>>()?
                }
                "nonneg" => cone.nonneg_count = v.parse().map_err(|_| bad("nonneg"))?,
                "free" => cone.free_count = v.parse().map_err(|_| bad("free"))?,
                _ => return Err(bad("unknown cone field")),
            }
        }
        let c_line = lines.next().ok_or_else(|| bad("missing objective"))?;
        let objective = c_line
            .strip_prefix('c')
            .ok_or_else(|| bad("objective line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("objective value")))
            .collect::<Result<Vec<f64>>>()?;
        let mut constraints = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut toks = line.strip_prefix("row ").ok_or_else(|| bad("row line"))?.split_whitespace();
            let rhs = toks.next().ok_or_else(|| bad("rhs"))?.parse().map_err(|_| bad("rhs"))?;
            let row = toks
                .map(|t| {
                    let (j, v) = t.split_once(':').ok_or_else(|| bad("entry"))?;
                    Ok((j.parse().map_err(|_| bad("index"))?, v.parse().map_err(|_| bad("value"))?))
                })
                .collect::<Result<Vec<_>>>()?;
            constraints.push(LinearConstraint { row, rhs });
        }
        Self::new(cone, objective, constraints)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn min_eig_svec(v: &[f64], n: usize) -> f64 {
    let m = smat(v, n);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Distance-like violation of `v ∈ K` (or `K*` when `dual` is set, where the
/// free block must vanish).
pub(crate) fn cone_violation(cone: &ConeSpec, v: &[f64], dual: bool) -> f64 {
    let mut viol: f64 = 0.0;
    for (off, &s) in cone.psd_offsets().iter().zip(&cone.psd_block_sizes) {
        let l = min_eig_svec(&v[*off..*off + svec_len(s)], s);
        viol = viol.max(-l);
    }
    let nn = cone.nonneg_offset();
    for &x in &v[nn..nn + cone.nonneg_count] {
        viol = viol.max(-x);
    }
    if dual {
        let fo = cone.free_offset();
        viol = viol.max(inf_norm(&v[fo..fo + cone.free_count]));
    }
    viol.max(0.0)
}

/// Recomputes the residuals of a candidate primal-dual pair from scratch.
pub fn check_residuals(problem: &ConicProblem, solution: &ConicSolution) -> Result<Residuals> {
    residuals_of(problem, &solution.primal, &solution.dual)
}

/// Residuals of `(x, y)` with the dual slack taken as `c − A'y`.
pub fn residuals_of(problem: &ConicProblem, x: &[f64], y: &[f64]) -> Result<Residuals> {
    let n = problem.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if y.len() != problem.num_rows() {
        return Err(Error::DimensionMismatch { expected: problem.num_rows(), found: y.len() });
    }
    let b = problem.rhs();
    let ax = problem.apply(x);
    let pres = ax.iter().zip(&b).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / (1.0 + inf_norm(&b));
    let pcone = cone_violation(&problem.cone, x, false);
    let aty = problem.apply_transpose(y);
    let s: Vec<f64> = problem.objective.iter().zip(&aty).map(|(c, a)| c - a).collect();
    let dres = cone_violation(&problem.cone, &s, true) / (1.0 + inf_norm(&problem.objective));
    let pobj = dot(&problem.objective, x);
    let dobj = dot(&b, y);
    Ok(Residuals {
        primal_feas: pres.max(pcone),
        dual_feas: dres,
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
    })
}

/// Residual of a Farkas ray for primal infeasibility: `y` is rescaled to
/// `b'y = 1` and the distance of `−A'y` to `K*` is returned. Infinite when
/// `b'y ≤ 0`.
pub fn farkas_residual(problem: &ConicProblem, y: &[f64]) -> f64 {
    let by = dot(&problem.rhs(), y);
    if by <= 0.0 || !by.is_finite() {
        return f64::INFINITY;
    }
    let s: Vec<f64> = problem.apply_transpose(y).iter().map(|v| -v / by).collect();
    cone_violation(&problem.cone, &s, true)
}

/// Residual of an improving ray for dual infeasibility: `x` is rescaled to
/// `c'x = −1` and `max(‖Ax‖∞, dist(x, K))` is returned.
pub fn ray_residual(problem: &ConicProblem, x: &[f64]) -> f64 {
    let cx = dot(&problem.objective, x);
    if cx >= 0.0 || !cx.is_finite() {
        return f64::INFINITY;
    }
    let xs: Vec<f64> = x.iter().map(|v| v / -cx).collect();
    let ax = inf_norm(&problem.apply(&xs));
    ax.max(cone_violation(&problem.cone, &xs, false))
}

/// Solves the conic program. Failures to converge are reported through
/// [`SolveStatus::NumericalTrouble`], never as an error.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    problem.validate()?;
    if !(settings.tol > 0.0) {
        return Err(Error::Invalid("solver tolerance must be positive".into()));
    }
    if settings.facial_reduction {
        let fr = facial::reduce_face(problem, settings)?;
        if fr.removed_columns() > 0 {
            let inner = solve_direct(&fr.problem, settings)?;
            let aty = problem.apply_transpose(&inner.dual);
            return Ok(ConicSolution {
                primal: fr.lift(&inner.primal),
                slack: problem.objective.iter().zip(&aty).map(|(c, a)| c - a).collect(),
                reduced_columns: fr.removed_columns(),
                ..inner
            });
        }
    }
    solve_direct(problem, settings)
}

/// Termination is tested on the presolved problem; when the restored point
/// misses `tol` on the original one, the solve is repeated with a tighter
/// internal tolerance so that `Optimal` always means original residuals
/// `≤ tol`.
const RETIGHTEN_STEPS: usize = 2;

fn solve_direct(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    let pre = presolve::Presolved::new(problem)?;
    if let Some(sol) = pre.early_exit() {
        return Ok(finalize(problem, sol));
    }
    let mut inner = *settings;
    let mut sol = finalize(problem, pre.restore(ipm::solve_hsde(pre.reduced(), &inner)));
    for _ in 0..RETIGHTEN_STEPS {
        if sol.status != SolveStatus::Optimal || sol.residuals.max() <= settings.tol {
            break;
        }
        inner.tol *= 0.1;
        sol = finalize(problem, pre.restore(ipm::solve_hsde(pre.reduced(), &inner)));
    }
    if sol.status == SolveStatus::Optimal && sol.residuals.max() > settings.tol {
        sol.status = SolveStatus::NumericalTrouble;
    }
    Ok(sol)
}

fn finalize(problem: &ConicProblem, mut sol: ConicSolution) -> ConicSolution {
    sol.primal_obj = dot(&problem.objective, &sol.primal);
    sol.dual_obj = dot(&problem.rhs(), &sol.dual);
    match sol.status {
        SolveStatus::PrimalInfeasible => {
            sol.certificate_residual = Some(farkas_residual(problem, &sol.dual));
        }
        SolveStatus::DualInfeasible => {
            sol.certificate_residual = Some(ray_residual(problem, &sol.primal));
        }
        _ => {}
    }
    if let Ok(r) = residuals_of(problem, &sol.primal, &sol.dual) {
        sol.residuals = r;
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(entries: &[(usize, f64)], rhs: f64) -> LinearConstraint {
        LinearConstraint { row: entries.to_vec(), rhs }
    }

    #[test]
    fn one_by_one_block_shifted() {
        // min x s.t. x - t = 1, x ⪰ 0, t ≥ 0
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![1], nonneg_count: 1, free_count: 0 },
            vec![1.0, 0.0],
            vec![row(&[(0, 1.0), (1, -1.0)], 1.0)],
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_obj - 1.0).abs() < 1e-7);
        assert!(check_residuals(&p, &sol).unwrap().max() <= 1e-8);
    }

    #[test]
    fn two_by_two_determinant() {
        // min y2 s.t. [[1,y1],[y1,y2]] ⪰ 0 with y1 = 1: svec = (1, √2 y1, y2)
        let s2 = std::f64::consts::SQRT_2;
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![2], nonneg_count: 0, free_count: 0 },
            vec![0.0, 0.0, 1.0],
            vec![row(&[(0, 1.0)], 1.0), row(&[(1, 1.0)], s2)],
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[2] - 1.0).abs() < 1e-6, "{:?}", sol.primal);
        let r = check_residuals(&p, &sol).unwrap();
        assert!(r.max() <= 1e-8, "{r:?}");
    }

    #[test]
    fn negative_psd_scalar_is_infeasible() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![1], nonneg_count: 0, free_count: 0 },
            vec![0.0],
            vec![row(&[(0, 1.0)], -1.0)],
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(sol.certificate_residual.unwrap() <= 1e-8);
    }

    #[test]
    fn unbounded_free_direction() {
        // min x1 - x2 over x1 ≥ 0 free x2 with x1 + x2 = 1 is bounded; drop the
        // nonnegativity and it becomes unbounded.
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![], nonneg_count: 1, free_count: 1 },
            vec![-1.0, 0.0],
            vec![row(&[(0, 1.0), (1, -1.0)], 0.0)],
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
        assert!(sol.certificate_residual.unwrap() <= 1e-8);
    }

    #[test]
    fn residual_check_reports_infeasible_primal() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![2], nonneg_count: 0, free_count: 0 },
            vec![0.0, 0.0, 1.0],
            vec![row(&[(0, 1.0)], 1.0)],
        )
        .unwrap();
        let r = residuals_of(&p, &[3.0, 0.0, -1.0], &[0.0]).unwrap();
        assert!(r.primal_feas > 0.0);
        assert!(residuals_of(&p, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn zero_problem_has_zero_residuals() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![2], nonneg_count: 1, free_count: 1 },
            vec![0.0; 5],
            vec![],
        )
        .unwrap();
        let r = residuals_of(&p, &[1.0, 0.0, 1.0, 1.0, 0.0], &[]).unwrap();
        assert_eq!(r, Residuals::default());
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn debug_dump_round_trip() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![2, 1], nonneg_count: 1, free_count: 2 },
            vec![1.0, 0.5, -2.0, 0.0, 3.0, 0.25, -0.125],
            vec![row(&[(0, 1.0), (6, -1.0)], 1.0), row(&[(2, 0.1)], 0.0)],
        )
        .unwrap();
        let text = p.to_debug_dump();
        assert!(text.starts_with("cone psd=2,1 nonneg=1 free=2\n"));
        assert_eq!(ConicProblem::from_debug_dump(&text).unwrap(), p);
    }
}
