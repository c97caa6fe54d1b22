//! Randomized conic programs with known optimal value.
//!
//! Each instance starts from a strictly complementary pair: a primal `x*`
//! and dual slack `s*` whose PSD blocks share eigenvectors with complementary
//! supports. Then `b = A x*` and `c = A'y* + s*` for random `A` and `y*`,
//! so `c'x* = b'y*` is the optimal value.

use momsos_core::conic::{check_residuals, solve, svec, ConeSpec, ConicProblem, LinearConstraint};
use momsos_core::conic::{SolveStatus, SolverSettings};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub problem: ConicProblem,
    pub optimal_value: f64,
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

pub fn complementary_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nblocks = rng.random_range(1..=2);
    let sizes: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=4)).collect();
    let nonneg = rng.random_range(0..=3);
    let free = rng.random_range(0..=2);
    let cone = ConeSpec { psd_block_sizes: sizes.clone(), nonneg_count: nonneg, free_count: free };
    let dim = cone.dim();

    let mut x = Vec::with_capacity(dim);
    let mut s = Vec::with_capacity(dim);
    for &n in &sizes {
        let q = random_orthogonal(&mut rng, n);
        let rank = rng.random_range(0..=n);
        let lx: Vec<f64> = (0..n).map(|i| if i < rank { rng.random_range(0.5..2.0) } else { 0.0 }).collect();
        let ls: Vec<f64> = (0..n).map(|i| if i < rank { 0.0 } else { rng.random_range(0.5..2.0) }).collect();
        let xm = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lx)) * q.transpose();
        let sm = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(ls)) * q.transpose();
        x.extend(svec(&xm));
        s.extend(svec(&sm));
    }
    for _ in 0..nonneg {
        if rng.random_bool(0.5) {
            x.push(rng.random_range(0.5..2.0));
            s.push(0.0);
        } else {
            x.push(0.0);
            s.push(rng.random_range(0.5..2.0));
        }
    }
    for _ in 0..free {
        x.push(rng.random_range(-1.0..1.0));
        s.push(0.0);
    }

    let m = free + rng.random_range(1..=dim.saturating_sub(free).max(1));
    let m = m.min(dim);
    let a = DMatrix::from_fn(m, dim, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xv = nalgebra::DVector::from_vec(x.clone());
    let b = &a * &xv;
    let aty = a.transpose() * nalgebra::DVector::from_vec(y);
    let c: Vec<f64> = (0..dim).map(|j| aty[j] + s[j]).collect();
    let constraints = (0..m)
        .map(|i| LinearConstraint { row: (0..dim).map(|j| (j, a[(i, j)])).collect(), rhs: b[i] })
        .collect();
    let optimal_value = c.iter().zip(&x).map(|(u, v)| u * v).sum();
    Instance { problem: ConicProblem::new(cone, c, constraints).unwrap(), optimal_value }
}

#[test]
fn twenty_random_complementary_sdps() {
    let settings = SolverSettings::default();
    for seed in 0..20 {
        let inst = complementary_instance(seed);
        let sol = solve(&inst.problem, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}: {:?}", sol.residuals);
        let r = check_residuals(&inst.problem, &sol).unwrap();
        assert!(r.max() <= 1e-8, "seed {seed}: {r:?}");
        let err = (sol.primal_obj - inst.optimal_value).abs() / (1.0 + inst.optimal_value.abs());
        assert!(err <= 1e-7, "seed {seed}: {} vs {}", sol.primal_obj, inst.optimal_value);
    }
}

#[test]
fn solves_are_deterministic() {
    let inst = complementary_instance(3);
    let a = solve(&inst.problem, &SolverSettings::default()).unwrap();
    let b = solve(&inst.problem, &SolverSettings::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn returned_psd_blocks_have_nonnegative_spectrum() {
    let settings = SolverSettings::default();
    for seed in 20..30 {
        let inst = complementary_instance(seed);
        let sol = solve(&inst.problem, &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        for (off, &n) in inst.problem.cone.psd_offsets().iter().zip(&inst.problem.cone.psd_block_sizes) {
            let block = momsos_core::conic::smat(&sol.primal[*off..*off + n * (n + 1) / 2], n);
            let trace = block.trace();
            let lmin = block.symmetric_eigenvalues().min();
            assert!(lmin >= -settings.tol * (1.0 + trace), "seed {seed}: {lmin}");
        }
        // weak duality
        assert!(sol.primal_obj >= sol.dual_obj - settings.tol * (1.0 + sol.primal_obj.abs()));
    }
}
