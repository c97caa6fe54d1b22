//! Scalarization of symmetric blocks and Nesterov–Todd scaling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Stacks the lower triangle column by column, scaling off-diagonals by √2.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * SQRT2 });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(n), "svec length does not match block order");
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Symmetric square root and inverse square root of a positive definite matrix.
fn sqrt_and_inv_sqrt(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let q = &eig.eigenvectors;
    let d = eig.eigenvalues.map(f64::sqrt);
    let di = d.map(|v| 1.0 / v);
    let sq = q * DMatrix::from_diagonal(&d) * q.transpose();
    let isq = q * DMatrix::from_diagonal(&di) * q.transpose();
    Some((sq, isq))
}

/// Nesterov–Todd scaling of one PSD block.
///
/// `R` satisfies `R⁻¹ X R⁻ᵀ = R' S R = Λ` with `Λ` diagonal; the Newton
/// system uses `H(dX) = W⁻¹ dX W⁻¹` with `W⁻¹ = R⁻ᵀ R⁻¹`.
pub(crate) struct PsdScaling {
    pub n: usize,
    pub r: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub w_inv: DMatrix<f64>,
    pub x_isqrt: DMatrix<f64>,
    pub s_isqrt: DMatrix<f64>,
}

impl PsdScaling {
    pub fn new(x: &[f64], s: &[f64], n: usize) -> Option<Self> {
        let xm = smat(x, n);
        let sm = smat(s, n);
        let (lx, lx_inv) = sqrt_and_inv_sqrt(&xm)?;
        let (ls, ls_inv) = sqrt_and_inv_sqrt(&sm)?;
        // Ls' Lx = U Λ V'
        let prod = ls.transpose() * &lx;
        let svd = prod.svd(false, true);
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let lam_isqrt = lambda.map(|l| 1.0 / l.sqrt());
        let lam_sqrt = lambda.map(f64::sqrt);
        let r = &lx * &v * DMatrix::from_diagonal(&lam_isqrt);
        // R⁻¹ = Λ^{1/2} V' Lx⁻¹
        let r_inv = DMatrix::from_diagonal(&lam_sqrt) * v.transpose() * &lx_inv;
        let w_inv = r_inv.transpose() * &r_inv;
        Some(Self { n, r, r_inv, lambda, w_inv, x_isqrt: lx_inv, s_isqrt: ls_inv })
    }

    /// Scaled primal direction `R⁻¹ dX R⁻ᵀ`.
    pub fn scale_primal(&self, dx: &[f64]) -> DMatrix<f64> {
        &self.r_inv * smat(dx, self.n) * self.r_inv.transpose()
    }

    /// Scaled dual direction `R' dS R`.
    pub fn scale_dual(&self, ds: &[f64]) -> DMatrix<f64> {
        self.r.transpose() * smat(ds, self.n) * &self.r
    }

    /// Given the right-hand side of `Λ∘(dX̃ + dS̃) = rhs`, returns
    /// `rc = R⁻ᵀ D R⁻¹` so that `dS + H(dX) = rc`.
    pub fn complementarity_rhs(&self, rhs: &DMatrix<f64>) -> Vec<f64> {
        let n = self.n;
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] = 2.0 * rhs[(i, j)] / (self.lambda[i] + self.lambda[j]);
            }
        }
        svec(&(self.r_inv.transpose() * d * &self.r_inv))
    }

    /// `H(dX) = W⁻¹ dX W⁻¹` in svec coordinates.
    pub fn apply_h(&self, dx: &[f64]) -> Vec<f64> {
        svec(&(&self.w_inv * smat(dx, self.n) * &self.w_inv))
    }

    /// Dense matrix of `H` on svec coordinates.
    pub fn h_matrix(&self) -> DMatrix<f64> {
        sym_kron(&self.w_inv)
    }

    /// Dense matrix of `G: v ↦ svec(R smat(v) R')`, a factor of `H⁻¹ = G G'`.
    pub fn g_matrix(&self) -> DMatrix<f64> {
        sym_kron(&self.r)
    }

    /// Largest step keeping `X + α dX ≻ 0`.
    pub fn max_step_primal(&self, dx: &[f64]) -> f64 {
        max_step(&self.x_isqrt, dx, self.n)
    }

    pub fn max_step_dual(&self, ds: &[f64]) -> f64 {
        max_step(&self.s_isqrt, ds, self.n)
    }
}

/// Matrix of `v ↦ svec(M smat(v) M')` in svec coordinates.
fn sym_kron(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let t = svec_len(n);
    let mut pairs = Vec::with_capacity(t);
    for j in 0..n {
        for i in j..n {
            pairs.push((i, j));
        }
    }
    let scale = |i: usize, j: usize| if i == j { 1.0 } else { SQRT2 };
    let mut out = DMatrix::zeros(t, t);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            out[(a, b)] = scale(i, j) * scale(k, l) * 0.5 * (m[(i, k)] * m[(j, l)] + m[(i, l)] * m[(j, k)]);
        }
    }
    out
}

fn max_step(isqrt: &DMatrix<f64>, d: &[f64], n: usize) -> f64 {
    let m = isqrt * smat(d, n) * isqrt;
    let m = 0.5 * (&m + m.transpose());
    let lmin = SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !lmin.is_finite() {
        0.0
    } else if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Identity element of a PSD block in svec form.
pub(crate) fn svec_identity(n: usize, out: &mut [f64]) {
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            out[k] = if i == j { 1.0 } else { 0.0 };
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| next());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn svec_preserves_inner_product() {
        let a = spd(4, 1);
        let b = spd(4, 2);
        let ip: f64 = a.component_mul(&b).sum();
        let va = svec(&a);
        let vb = svec(&b);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((ip - dot).abs() < 1e-12);
        assert!((smat(&va, 4) - a).abs().max() < 1e-14);
    }

    #[test]
    fn nt_scaling_identities() {
        let x = spd(3, 7);
        let s = spd(3, 11);
        let sc = PsdScaling::new(&svec(&x), &svec(&s), 3).unwrap();
        let lam = DMatrix::from_diagonal(&sc.lambda);
        assert!((&sc.r_inv * &x * sc.r_inv.transpose() - &lam).abs().max() < 1e-10);
        assert!((sc.r.transpose() * &s * &sc.r - &lam).abs().max() < 1e-10);
        // W⁻¹ X W⁻¹ = S
        let hx = smat(&sc.apply_h(&svec(&x)), 3);
        assert!((hx - &s).abs().max() < 1e-10);
        // dense H agrees with the operator, and G G' inverts it
        let dx = svec(&spd(3, 5));
        let h = sc.h_matrix();
        let dense = &h * DVector::from_column_slice(&dx);
        let op = sc.apply_h(&dx);
        for (a, b) in dense.iter().zip(&op) {
            assert!((a - b).abs() < 1e-10);
        }
        let g = sc.g_matrix();
        let id = &g * g.transpose() * &h;
        assert!((id - DMatrix::identity(6, 6)).abs().max() < 1e-9);
    }

    #[test]
    fn step_to_boundary() {
        let x = DMatrix::identity(2, 2);
        let s = DMatrix::identity(2, 2);
        let sc = PsdScaling::new(&svec(&x), &svec(&s), 2).unwrap();
        let d = svec(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]));
        assert!((sc.max_step_primal(&d) - 0.5).abs() < 1e-12);
        let up = svec(&DMatrix::identity(2, 2));
        assert!(sc.max_step_dual(&up).is_infinite());
    }
}
