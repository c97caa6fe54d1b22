//! Removal of linearly dependent equality rows and free columns.
//!
//! The interior-point method needs `A` with full row rank and the free
//! columns of `A` with full column rank. Both fail routinely for moment
//! relaxations with several equality constraints, because syzygies between
//! the generators make their localizing rows dependent.

use nalgebra::DMatrix;

use super::{ConeSpec, ConicProblem, ConicSolution, LinearConstraint, Residuals, SolveStatus};
use crate::error::Result;

const DEP_TOL: f64 = 1e-10;

/// Incremental modified Gram–Schmidt that remembers how each orthonormal
/// vector combines the accepted inputs.
struct Basis {
    q: Vec<Vec<f64>>,
    // q[k] = Σ_j t[k][j] * v[accepted[j]]
    t: Vec<Vec<f64>>,
    accepted: Vec<usize>,
}

enum Insert {
    Independent,
    /// Input `v ≈ Σ_j coef[j] * v[accepted[j]]`.
    Dependent(Vec<f64>),
}

impl Basis {
    fn new() -> Self {
        Self { q: Vec::new(), t: Vec::new(), accepted: Vec::new() }
    }

    fn insert(&mut self, id: usize, v: &[f64]) -> Insert {
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut r = v.to_vec();
        let mut a = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let p: f64 = qk.iter().zip(&r).map(|(x, y)| x * y).sum();
                a[k] += p;
                for (ri, qi) in r.iter_mut().zip(qk) {
                    *ri -= p * qi;
                }
            }
        }
        let nr = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = self.accepted.len();
        // combination of accepted inputs reproducing the projection
        let mut coef = vec![0.0; m];
        for (k, ak) in a.iter().enumerate() {
            for (j, tkj) in self.t[k].iter().enumerate() {
                coef[j] += ak * tkj;
            }
        }
        if nr <= DEP_TOL * norm0.max(1e-300) || norm0 == 0.0 {
            return Insert::Dependent(coef);
        }
        let mut tnew: Vec<f64> = coef.iter().map(|c| -c / nr).collect();
        tnew.push(1.0 / nr);
        for tk in &mut self.t {
            tk.push(0.0);
        }
        self.q.push(r.iter().map(|x| x / nr).collect());
        self.t.push(tnew);
        self.accepted.push(id);
        Insert::Independent
    }
}

pub(crate) struct Presolved {
    original_rows: usize,
    original_dim: usize,
    kept_rows: Vec<usize>,
    kept_cols: Vec<usize>,
    reduced: ConicProblem,
    early: Option<ConicSolution>,
}

fn empty_solution(status: SolveStatus, n: usize, m: usize) -> ConicSolution {
    ConicSolution {
        status,
        primal: vec![0.0; n],
        dual: vec![0.0; m],
        slack: vec![0.0; n],
        primal_obj: 0.0,
        dual_obj: 0.0,
        residuals: Residuals::default(),
        certificate_residual: None,
        iterations: 0,
        reduced_columns: 0,
    }
}

impl Presolved {
    pub fn new(problem: &ConicProblem) -> Result<Self> {
        let a = problem.dense_a();
        let b = problem.rhs();
        let m = problem.num_rows();
        let n = problem.dim();

        let mut rows = Basis::new();
        for i in 0..m {
            let ai: Vec<f64> = a.row(i).iter().copied().collect();
            if let Insert::Dependent(coef) = rows.insert(i, &ai) {
                let implied: f64 = coef.iter().zip(&rows.accepted).map(|(c, &j)| c * b[j]).sum();
                let mismatch = b[i] - implied;
                if mismatch.abs() > 1e-9 * (1.0 + b[i].abs()) {
                    // y = e_i − Σ coef_j e_j gives A'y ≈ 0 and b'y = mismatch
                    let mut y = vec![0.0; m];
                    y[i] = 1.0;
                    for (c, &j) in coef.iter().zip(&rows.accepted) {
                        y[j] -= c;
                    }
                    let scale = 1.0 / mismatch;
                    y.iter_mut().for_each(|v| *v *= scale);
                    let mut sol = empty_solution(SolveStatus::PrimalInfeasible, n, m);
                    sol.dual = y;
                    return Ok(Self::early(problem, sol));
                }
            }
        }
        let kept_rows = rows.accepted.clone();

        let free_off = problem.cone.free_offset();
        let mut cols = Basis::new();
        let mut kept_free = Vec::new();
        for j in free_off..n {
            let col: Vec<f64> = kept_rows.iter().map(|&i| a[(i, j)]).collect();
            match cols.insert(j, &col) {
                Insert::Independent => kept_free.push(j),
                Insert::Dependent(coef) => {
                    let c = &problem.objective;
                    let implied: f64 = coef.iter().zip(&cols.accepted).map(|(w, &k)| w * c[k]).sum();
                    let mismatch = c[j] - implied;
                    if mismatch.abs() > 1e-9 * (1.0 + c[j].abs()) {
                        // x = e_j − Σ coef_k e_k with A x ≈ 0 and c'x = mismatch
                        let mut x = vec![0.0; n];
                        x[j] = 1.0;
                        for (w, &k) in coef.iter().zip(&cols.accepted) {
                            x[k] -= w;
                        }
                        let scale = -1.0 / mismatch;
                        x.iter_mut().for_each(|v| *v *= scale);
                        let mut sol = empty_solution(SolveStatus::DualInfeasible, n, m);
                        sol.primal = x;
                        return Ok(Self::early(problem, sol));
                    }
                }
            }
        }
        let mut kept_cols: Vec<usize> = (0..free_off).collect();
        kept_cols.extend(&kept_free);

        let mut col_pos = vec![usize::MAX; n];
        for (p, &j) in kept_cols.iter().enumerate() {
            col_pos[j] = p;
        }
        let constraints = kept_rows
            .iter()
            .map(|&i| LinearConstraint {
                row: problem.constraints[i]
                    .row
                    .iter()
                    .filter(|(j, _)| col_pos[*j] != usize::MAX)
                    .map(|&(j, v)| (col_pos[j], v))
                    .collect(),
                rhs: b[i],
            })
            .collect();
        let reduced = ConicProblem {
            cone: ConeSpec {
                psd_block_sizes: problem.cone.psd_block_sizes.clone(),
                nonneg_count: problem.cone.nonneg_count,
                free_count: kept_free.len(),
            },
            objective: kept_cols.iter().map(|&j| problem.objective[j]).collect(),
            constraints,
        };
        Ok(Self {
            original_rows: m,
            original_dim: n,
            kept_rows,
            kept_cols,
            reduced,
            early: None,
        })
    }

    fn early(problem: &ConicProblem, sol: ConicSolution) -> Self {
        Self {
            original_rows: problem.num_rows(),
            original_dim: problem.dim(),
            kept_rows: Vec::new(),
            kept_cols: Vec::new(),
            reduced: ConicProblem {
                cone: ConeSpec::default(),
                objective: Vec::new(),
                constraints: Vec::new(),
            },
            early: Some(sol),
        }
    }

    pub fn early_exit(&self) -> Option<ConicSolution> {
        self.early.clone()
    }

    pub fn reduced(&self) -> &ConicProblem {
        &self.reduced
    }

    /// Maps a solution of the reduced problem back to the original layout.
    pub fn restore(&self, red: ConicSolution) -> ConicSolution {
        let mut sol = empty_solution(red.status, self.original_dim, self.original_rows);
        for (p, &j) in self.kept_cols.iter().enumerate() {
            sol.primal[j] = red.primal[p];
            sol.slack[j] = red.slack[p];
        }
        for (p, &i) in self.kept_rows.iter().enumerate() {
            sol.dual[i] = red.dual[p];
        }
        sol.iterations = red.iterations;
        sol
    }
}

#[allow(dead_code)]
pub(crate) fn rank(a: &DMatrix<f64>) -> usize {
    let mut basis = Basis::new();
    (0..a.nrows())
        .filter(|&i| {
            let r: Vec<f64> = a.row(i).iter().copied().collect();
            matches!(basis.insert(i, &r), Insert::Independent)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_detects_combination() {
        let mut b = Basis::new();
        assert!(matches!(b.insert(0, &[1.0, 1.0, 0.0]), Insert::Independent));
        assert!(matches!(b.insert(1, &[0.0, 1.0, 1.0]), Insert::Independent));
        match b.insert(2, &[2.0, 5.0, 3.0]) {
            Insert::Dependent(c) => {
                assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 3.0).abs() < 1e-12, "{c:?}");
            }
            Insert::Independent => panic!("should be dependent"),
        }
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(rank(&a), 2);
    }

    #[test]
    fn inconsistent_duplicate_rows_are_infeasible() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![], nonneg_count: 2, free_count: 0 },
            vec![1.0, 1.0],
            vec![
                LinearConstraint { row: vec![(0, 1.0), (1, 1.0)], rhs: 1.0 },
                LinearConstraint { row: vec![(0, 2.0), (1, 2.0)], rhs: 3.0 },
            ],
        )
        .unwrap();
        let pre = Presolved::new(&p).unwrap();
        let sol = pre.early_exit().unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(super::super::farkas_residual(&p, &sol.dual) < 1e-12);
    }

    #[test]
    fn consistent_duplicate_rows_and_free_columns_dropped() {
        let p = ConicProblem::new(
            ConeSpec { psd_block_sizes: vec![], nonneg_count: 1, free_count: 2 },
            vec![1.0, 0.0, 0.0],
            vec![
                LinearConstraint { row: vec![(0, 1.0), (1, 1.0), (2, 1.0)], rhs: 1.0 },
                LinearConstraint { row: vec![(0, -1.0), (1, -1.0), (2, -1.0)], rhs: -1.0 },
            ],
        )
        .unwrap();
        let pre = Presolved::new(&p).unwrap();
        assert!(pre.early_exit().is_none());
        assert_eq!(pre.reduced().num_rows(), 1);
        assert_eq!(pre.reduced().cone.free_count, 1);
    }
}
