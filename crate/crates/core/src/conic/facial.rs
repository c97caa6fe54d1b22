//! Partial facial reduction over the diagonal cone.
//!
//! Some relaxations have a feasible set with empty interior: the equality
//! constraints force a nonnegative combination of PSD diagonal entries and
//! orthant variables to vanish. Interior-point iterates can only approach
//! such a face at rate `√μ`, which caps the attainable accuracy of the
//! optimal value. Each reduction round solves the linear program
//!
//! ```text
//!   find y, d ≥ 0, u ≥ 0   with   A'y = (diag d, u, 0),  b'y = 0,  Σd + Σu = 1
//! ```
//!
//! and, when it is feasible, deletes every coordinate with positive weight:
//! a PSD index `k` with `d_k > 0` removes row and column `k` of its block,
//! an orthant variable with `u_j > 0` is fixed at zero. The rows of the
//! problem are kept, so dual vectors keep their meaning.

use super::{cones::svec_len, ConeSpec, ConicProblem, LinearConstraint, SolveStatus, SolverSettings};
use crate::error::Result;

const WEIGHT_TOL: f64 = 1e-6;
const MAX_ROUNDS: usize = 8;
/// Relative data perturbation a reduction certificate must survive.
const DATA_PERTURBATION: f64 = 1e-12;
/// Right-hand sides of emptied rows below this (relative) size are rounding.
const EMPTY_ROW_TOL: f64 = 1e-9;

/// Result of facial reduction: the restricted problem and the map back to
/// the original columns.
#[derive(Clone, Debug)]
pub struct FaceReduction {
    pub problem: ConicProblem,
    /// Reduced position of every original column, `None` when fixed at zero.
    col_map: Vec<Option<usize>>,
    pub rounds: usize,
}

impl FaceReduction {
    fn identity(problem: &ConicProblem) -> Self {
        Self { problem: problem.clone(), col_map: (0..problem.dim()).map(Some).collect(), rounds: 0 }
    }

    /// Number of original columns fixed at zero.
    pub fn removed_columns(&self) -> usize {
        self.col_map.iter().filter(|c| c.is_none()).count()
    }

    /// Embeds a reduced primal vector into the original layout.
    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        self.col_map.iter().map(|c| c.map_or(0.0, |p| reduced[p])).collect()
    }

    fn compose(&self, inner: &FaceReduction) -> FaceReduction {
        FaceReduction {
            problem: inner.problem.clone(),
            col_map: self.col_map.iter().map(|c| c.and_then(|p| inner.col_map[p])).collect(),
            rounds: self.rounds + inner.rounds,
        }
    }
}

/// Position of diagonal entry `k` inside the svec of an order-`n` block.
fn diag_pos(n: usize, k: usize) -> usize {
    (0..k).map(|c| n - c).sum()
}

/// Repeats reduction rounds until the diagonal LP finds no further face.
pub fn reduce_face(problem: &ConicProblem, settings: &SolverSettings) -> Result<FaceReduction> {
    let mut acc = FaceReduction::identity(problem);
    for _ in 0..MAX_ROUNDS {
        match reduction_round(&acc.problem, settings)? {
            Some(step) => acc = acc.compose(&step),
            None => break,
        }
    }
    Ok(acc)
}

fn reduction_round(problem: &ConicProblem, settings: &SolverSettings) -> Result<Option<FaceReduction>> {
    let cone = &problem.cone;
    let n = problem.dim();
    let m = problem.num_rows();
    if m == 0 {
        return Ok(None);
    }
    // weighted columns of the LP: PSD diagonals then orthant variables
    let mut weighted: Vec<usize> = Vec::new();
    for (off, &s) in cone.psd_offsets().iter().zip(&cone.psd_block_sizes) {
        weighted.extend((0..s).map(|k| off + diag_pos(s, k)));
    }
    let nn_off = cone.nonneg_offset();
    weighted.extend(nn_off..nn_off + cone.nonneg_count);
    if weighted.is_empty() {
        return Ok(None);
    }
    let nw = weighted.len();
    let mut weight_of = vec![None; n];
    for (w, &j) in weighted.iter().enumerate() {
        weight_of[j] = Some(w);
    }

    // columns of A as sparse lists over rows
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, c) in problem.constraints.iter().enumerate() {
        for &(j, v) in &c.row {
            cols[j].push((i, v));
        }
    }
    let mut rows = Vec::with_capacity(n + 2);
    for j in 0..n {
        let mut row: Vec<(usize, f64)> = cols[j].iter().map(|&(i, v)| (nw + i, v)).collect();
        if let Some(w) = weight_of[j] {
            row.push((w, -1.0));
        }
        rows.push(LinearConstraint { row, rhs: 0.0 });
    }
    let b = problem.rhs();
    rows.push(LinearConstraint { row: (0..m).map(|i| (nw + i, b[i])).collect(), rhs: 0.0 });
    rows.push(LinearConstraint { row: (0..nw).map(|w| (w, 1.0)).collect(), rhs: 1.0 });
    let lp = ConicProblem {
        cone: ConeSpec { psd_block_sizes: vec![], nonneg_count: nw, free_count: m },
        objective: vec![0.0; nw + m],
        constraints: rows,
    };
    let lp_settings = SolverSettings { tol: settings.tol.min(1e-10), facial_reduction: false, ..*settings };
    let sol = super::solve(&lp, &lp_settings)?;
    if sol.status != SolveStatus::Optimal {
        return Ok(None);
    }
    // Nearly dependent rows admit huge multipliers whose weights are an
    // artifact of data at rounding level; such faces are not trusted.
    let y_norm: f64 = sol.primal[nw..nw + m].iter().map(|v| v.abs()).sum();
    let data_norm = problem
        .constraints
        .iter()
        .flat_map(|c| c.row.iter().map(|&(_, v)| v.abs()).chain([c.rhs.abs()]))
        .fold(0.0_f64, f64::max);
    if y_norm * DATA_PERTURBATION * (1.0 + data_norm) > WEIGHT_TOL {
        return Ok(None);
    }
    let zeroed: Vec<bool> = {
        let mut z = vec![false; n];
        for (w, &j) in weighted.iter().enumerate() {
            z[j] = sol.primal[w] > WEIGHT_TOL;
        }
        z
    };
    if !zeroed.iter().any(|&z| z) {
        return Ok(None);
    }
    Ok(Some(restrict(problem, &zeroed)))
}

/// Restricts `problem` to the face where the flagged diagonal indices and
/// orthant variables vanish.
fn restrict(problem: &ConicProblem, zeroed: &[bool]) -> FaceReduction {
    let cone = &problem.cone;
    let n = problem.dim();
    let mut col_map = vec![None; n];
    let mut sizes = Vec::new();
    let mut next = 0;
    for (off, &s) in cone.psd_offsets().iter().zip(&cone.psd_block_sizes) {
        let kept: Vec<usize> = (0..s).filter(|&k| !zeroed[off + diag_pos(s, k)]).collect();
        if kept.is_empty() {
            continue;
        }
        let ks = kept.len();
        // new svec order: column-major lower triangle over kept indices
        for (cj, &j) in kept.iter().enumerate() {
            for &i in &kept[cj..] {
                let old = off + diag_pos(s, j) + (i - j);
                col_map[old] = Some(next);
                next += 1;
            }
        }
        debug_assert_eq!(next - sizes.iter().map(|&t| svec_len(t)).sum::<usize>(), svec_len(ks));
        sizes.push(ks);
    }
    let nn_off = cone.nonneg_offset();
    let mut nn = 0;
    for j in nn_off..nn_off + cone.nonneg_count {
        if !zeroed[j] {
            col_map[j] = Some(next);
            next += 1;
            nn += 1;
        }
    }
    let fo = cone.free_offset();
    for j in fo..fo + cone.free_count {
        col_map[j] = Some(next);
        next += 1;
    }
    let mut objective = vec![0.0; next];
    for (j, c) in col_map.iter().enumerate() {
        if let Some(p) = c {
            objective[*p] = problem.objective[j];
        }
    }
    // A row emptied by the restriction keeps its meaning only through its
    // right-hand side; one within rounding of zero is set to zero so later
    // rounds cannot use its multiplier to absorb `b'y`.
    let b_scale = 1.0 + problem.constraints.iter().fold(0.0f64, |a, c| a.max(c.rhs.abs()));
    let constraints = problem
        .constraints
        .iter()
        .map(|c| {
            let row: Vec<(usize, f64)> = c.row.iter().filter_map(|&(j, v)| col_map[j].map(|p| (p, v))).collect();
            let emptied = row.iter().all(|&(_, v)| v == 0.0);
            let rhs = if emptied && c.rhs.abs() <= EMPTY_ROW_TOL * b_scale { 0.0 } else { c.rhs };
            LinearConstraint { row, rhs }
        })
        .collect();
    FaceReduction {
        problem: ConicProblem {
            cone: ConeSpec { psd_block_sizes: sizes, nonneg_count: nn, free_count: cone.free_count },
            objective,
            constraints,
        },
        col_map,
        rounds: 1,
    }
}
