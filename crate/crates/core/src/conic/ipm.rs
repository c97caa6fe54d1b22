//! Homogeneous self-dual embedding, Mehrotra predictor-corrector.
//!
//! Iterates `(x, y, s, τ, κ)` on
//!
//! ```text
//!   A x − b τ = 0,   A'y + s − c τ = 0,   c'x − b'y + κ = 0,
//!   x ∈ K, s ∈ K*, τ, κ ≥ 0,
//! ```
//!
//! whose solutions either have `τ > 0` (an optimal pair `(x, y, s)/τ`) or
//! `κ > 0` (a primal or dual improving ray).

use nalgebra::{DMatrix, DVector};

use super::cones::{svec_identity, svec_len, PsdScaling};
use super::{farkas_residual, ray_residual, residuals_of, ConicProblem, ConicSolution, Residuals};
use super::{SolveStatus, SolverSettings};

const STEP_FRACTION: f64 = 0.99;
const REFINE_STEPS: usize = 2;

struct Layout {
    psd: Vec<(usize, usize)>,
    nn_off: usize,
    nn: usize,
    free_off: usize,
    n: usize,
    nu: f64,
}

impl Layout {
    fn new(p: &ConicProblem) -> Self {
        let offs = p.cone.psd_offsets();
        Self {
            psd: offs.into_iter().zip(p.cone.psd_block_sizes.iter().copied()).collect(),
            nn_off: p.cone.nonneg_offset(),
            nn: p.cone.nonneg_count,
            free_off: p.cone.free_offset(),
            n: p.dim(),
            nu: p.cone.degree() as f64,
        }
    }

    fn cone_dot(&self, x: &[f64], s: &[f64]) -> f64 {
        x[..self.free_off].iter().zip(&s[..self.free_off]).map(|(a, b)| a * b).sum()
    }
}

struct Scaling {
    psd: Vec<PsdScaling>,
    // per nonneg entry: x, s
    nn_x: Vec<f64>,
    nn_s: Vec<f64>,
}

/// Blockwise right-hand side of the linearized complementarity condition.
struct CompRhs {
    psd: Vec<DMatrix<f64>>,
    nn: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Orthogonal split of the equality rows against the free columns:
/// `A_f = Q1 R` with `Q2` spanning the complement of `range(A_f)`.
struct FreeSplit {
    a_cone: DMatrix<f64>,
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl FreeSplit {
    fn new(a: &DMatrix<f64>, free_off: usize) -> Self {
        let m = a.nrows();
        let nf = a.ncols() - free_off;
        let a_cone = a.columns(0, free_off).into_owned();
        // QR of [A_f | I] yields a full orthonormal basis whose leading
        // columns span range(A_f).
        let mut aug = DMatrix::zeros(m, nf + m);
        aug.view_mut((0, 0), (m, nf)).copy_from(&a.columns(free_off, nf));
        aug.view_mut((0, nf), (m, m)).fill_with_identity();
        let qr = aug.qr();
        let q = qr.q();
        let r = qr.r().view((0, 0), (nf.min(m), nf)).into_owned();
        Self { a_cone, q1: q.columns(0, nf.min(m)).into_owned(), q2: q.columns(nf.min(m), m - nf.min(m)).into_owned(), r }
    }
}

/// Factorization of the Newton system
///
/// ```text
///   −H dx + A' dy = t,   A dx = u
/// ```
///
/// with `H = 0` on free columns. Writing `H⁻¹ = G G'` on the cone columns
/// and `B = A_c G`, the system reduces to a least-squares problem in
/// `C = B' Q2`, which is factored by QR so the condition number of the
/// scaling enters only once.
struct Kkt<'a> {
    split: &'a FreeSplit,
    h: DMatrix<f64>,
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    qc: DMatrix<f64>,
    rc: DMatrix<f64>,
    a: &'a DMatrix<f64>,
    nc: usize,
}

impl<'a> Kkt<'a> {
    fn build(a: &'a DMatrix<f64>, split: &'a FreeSplit, h: DMatrix<f64>, g: DMatrix<f64>) -> Option<Self> {
        let nc = g.nrows();
        let b = &split.a_cone * &g;
        let c = b.transpose() * &split.q2;
        let (qc, rc) = if c.ncols() == 0 {
            (DMatrix::zeros(nc, 0), DMatrix::zeros(0, 0))
        } else {
            if c.nrows() < c.ncols() {
                return None;
            }
            let qr = c.qr();
            (qr.q(), qr.r())
        };
        let scale = rc.diagonal().amax();
        if rc.diagonal().iter().any(|d| !(d.abs() > 1e-14 * scale)) {
            return None;
        }
        if split.r.diagonal().iter().any(|d| *d == 0.0) {
            return None;
        }
        Some(Self { split, h, g, b, qc, rc, a, nc })
    }

    fn solve_once(&self, t: &[f64], u: &[f64]) -> Option<(DVector<f64>, DVector<f64>)> {
        let sp = self.split;
        let nc = self.nc;
        let t_c = DVector::from_column_slice(&t[..nc]);
        let t_f = DVector::from_column_slice(&t[nc..]);
        let u = DVector::from_column_slice(u);
        let gtc = self.g.transpose() * &t_c;
        let a_coef = sp.r.transpose().solve_lower_triangular(&t_f)?;
        let q1a = &sp.q1 * &a_coef;
        let v = &gtc - self.b.transpose() * &q1a;
        let w0 = sp.q2.transpose() * &u;
        let sv = self.rc.transpose().solve_lower_triangular(&w0)?;
        let z = self.rc.solve_upper_triangular(&(sv + self.qc.transpose() * &v))?;
        let dy = q1a + &sp.q2 * z;
        let w = self.b.transpose() * &dy - gtc;
        let dx_f = sp.r.solve_upper_triangular(&(sp.q1.transpose() * (&u - &self.b * &w)))?;
        let dx_c = &self.g * w;
        let mut dx = DVector::zeros(t.len());
        dx.rows_mut(0, nc).copy_from(&dx_c);
        dx.rows_mut(nc, t.len() - nc).copy_from(&dx_f);
        Some((dx, dy))
    }

    fn solve(&self, top: &[f64], bot: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut dx, mut dy) = self.solve_once(top, bot)?;
        for _ in 0..REFINE_STEPS {
            let mut hdx = DVector::zeros(top.len());
            hdx.rows_mut(0, self.nc).copy_from(&(&self.h * dx.rows(0, self.nc)));
            let rt = DVector::from_column_slice(top) + hdx - self.a.transpose() * &dy;
            let ru = DVector::from_column_slice(bot) - self.a * &dx;
            let (cx, cy) = self.solve_once(rt.as_slice(), ru.as_slice())?;
            dx += cx;
            dy += cy;
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((dx.as_slice().to_vec(), dy.as_slice().to_vec()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn mat_t_vec(a: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    (a.transpose() * DVector::from_column_slice(y)).as_slice().to_vec()
}

pub(crate) fn solve_hsde(problem: &ConicProblem, settings: &SolverSettings) -> ConicSolution {
    let lay = Layout::new(problem);
    let a = problem.dense_a();
    let b = problem.rhs();
    let c = &problem.objective;
    let n = lay.n;
    let m = problem.num_rows();
    let split = FreeSplit::new(&a, lay.free_off);

    let mut x = vec![0.0; n];
    let mut s = vec![0.0; n];
    for &(off, sz) in &lay.psd {
        svec_identity(sz, &mut x[off..off + svec_len(sz)]);
        svec_identity(sz, &mut s[off..off + svec_len(sz)]);
    }
    for j in lay.nn_off..lay.nn_off + lay.nn {
        x[j] = 1.0;
        s[j] = 1.0;
    }
    let mut y = vec![0.0; m];
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut status = SolveStatus::NumericalTrouble;
    let mut iterations = 0;
    let mut small_steps = 0;

    for it in 0..=settings.max_iter {
        iterations = it;
        if let Some(st) = check_termination(problem, &x, &y, &s, tau, kappa, settings.tol) {
            status = st;
            break;
        }
        if it == settings.max_iter {
            break;
        }

        let ax = mat_vec(&a, &x);
        let aty = mat_t_vec(&a, &y);
        let rp: Vec<f64> = ax.iter().zip(&b).map(|(u, v)| u - v * tau).collect();
        let rd: Vec<f64> = (0..n).map(|j| aty[j] + s[j] - c[j] * tau).collect();
        let rg = dot(c, &x) - dot(&b, &y) + kappa;
        let mu = (lay.cone_dot(&x, &s) + tau * kappa) / (lay.nu + 1.0);

        let scaling = match compute_scaling(&lay, &x, &s) {
            Some(sc) => sc,
            None => break,
        };
        let (h, g) = assemble_h(&lay, &scaling);
        let kkt = match Kkt::build(&a, &split, h, g) {
            Some(k) => k,
            None => break,
        };
        let (p1, q1) = match kkt.solve(c, &b) {
            Some(v) => v,
            None => break,
        };

        // predictor
        let aff_rhs = comp_rhs(&scaling, 0.0, 0.0, None);
        let aff_rtau = -tau * kappa;
        let Some(aff) = direction(
            &lay, &kkt, &scaling, &p1, &q1, c, &b, &rp, &rd, rg, tau, kappa, 1.0, &aff_rhs, aff_rtau,
        ) else {
            break;
        };
        let alpha_aff = max_step(&lay, &scaling, &aff, tau, kappa).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let cor_rhs = comp_rhs(&scaling, sigma, mu, Some(&aff));
        let cor_rtau = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let Some(dir) = direction(
            &lay,
            &kkt,
            &scaling,
            &p1,
            &q1,
            c,
            &b,
            &rp,
            &rd,
            rg,
            tau,
            kappa,
            1.0 - sigma,
            &cor_rhs,
            cor_rtau,
        ) else {
            break;
        };
        let alpha = (STEP_FRACTION * max_step(&lay, &scaling, &dir, tau, kappa)).min(1.0);
        if !(alpha > 1e-10) {
            small_steps += 1;
            if small_steps > 3 {
                break;
            }
            continue;
        }
        small_steps = 0;
        for j in 0..n {
            x[j] += alpha * dir.dx[j];
            s[j] += alpha * dir.ds[j];
        }
        for i in 0..m {
            y[i] += alpha * dir.dy[i];
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        // keep the embedding scale bounded
        let norm = (dot(&x, &x) + dot(&y, &y) + dot(&s, &s) + tau * tau + kappa * kappa).sqrt();
        if norm > 1e8 {
            let f = 1.0 / norm;
            x.iter_mut().chain(y.iter_mut()).chain(s.iter_mut()).for_each(|v| *v *= f);
            tau *= f;
            kappa *= f;
        }
    }

    build_solution(problem, status, &x, &y, &s, tau, iterations)
}

fn compute_scaling(lay: &Layout, x: &[f64], s: &[f64]) -> Option<Scaling> {
    let mut psd = Vec::with_capacity(lay.psd.len());
    for &(off, sz) in &lay.psd {
        let t = svec_len(sz);
        psd.push(PsdScaling::new(&x[off..off + t], &s[off..off + t], sz)?);
    }
    let nn_x = x[lay.nn_off..lay.nn_off + lay.nn].to_vec();
    let nn_s = s[lay.nn_off..lay.nn_off + lay.nn].to_vec();
    if nn_x.iter().chain(&nn_s).any(|v| !(*v > 0.0)) {
        return None;
    }
    Some(Scaling { psd, nn_x, nn_s })
}

/// Blockwise `H` and its inverse factor `G` on the cone columns.
fn assemble_h(lay: &Layout, sc: &Scaling) -> (DMatrix<f64>, DMatrix<f64>) {
    let nc = lay.free_off;
    let mut h = DMatrix::zeros(nc, nc);
    let mut g = DMatrix::zeros(nc, nc);
    for (blk, &(off, sz)) in sc.psd.iter().zip(&lay.psd) {
        let t = svec_len(sz);
        h.view_mut((off, off), (t, t)).copy_from(&blk.h_matrix());
        g.view_mut((off, off), (t, t)).copy_from(&blk.g_matrix());
    }
    for k in 0..lay.nn {
        let j = lay.nn_off + k;
        h[(j, j)] = sc.nn_s[k] / sc.nn_x[k];
        g[(j, j)] = (sc.nn_x[k] / sc.nn_s[k]).sqrt();
    }
    (h, g)
}

/// `σμ I − Λ² − (dX̃ₐ ∘ dS̃ₐ)` blockwise; the corrector term only when `aff` is given.
fn comp_rhs(sc: &Scaling, sigma: f64, mu: f64, aff: Option<&Direction>) -> CompRhs {
    let lay_psd: Vec<usize> = {
        let mut off = 0;
        sc.psd
            .iter()
            .map(|b| {
                let o = off;
                off += svec_len(b.n);
                o
            })
            .collect()
    };
    let psd = sc
        .psd
        .iter()
        .zip(&lay_psd)
        .map(|(blk, &off)| {
            let n = blk.n;
            let mut r = DMatrix::zeros(n, n);
            for i in 0..n {
                r[(i, i)] = sigma * mu - blk.lambda[i] * blk.lambda[i];
            }
            if let Some(d) = aff {
                let t = svec_len(n);
                let dxs = blk.scale_primal(&d.dx[off..off + t]);
                let dss = blk.scale_dual(&d.ds[off..off + t]);
                let prod = &dxs * &dss;
                r -= 0.5 * (&prod + prod.transpose());
            }
            r
        })
        .collect();
    let psd_dim: usize = lay_psd.last().map(|&o| o + svec_len(sc.psd.last().unwrap().n)).unwrap_or(0);
    let nn = (0..sc.nn_x.len())
        .map(|k| {
            let mut v = sigma * mu - sc.nn_x[k] * sc.nn_s[k];
            if let Some(d) = aff {
                v -= d.dx[psd_dim + k] * d.ds[psd_dim + k];
            }
            v
        })
        .collect();
    CompRhs { psd, nn }
}

#[allow(clippy::too_many_arguments)]
fn direction(
    lay: &Layout,
    kkt: &Kkt,
    sc: &Scaling,
    p1: &[f64],
    q1: &[f64],
    c: &[f64],
    b: &[f64],
    rp: &[f64],
    rd: &[f64],
    rg: f64,
    tau: f64,
    kappa: f64,
    eta: f64,
    comp: &CompRhs,
    rtau: f64,
) -> Option<Direction> {
    let n = lay.n;
    let mut rc = vec![0.0; n];
    for ((blk, &(off, sz)), rhs) in sc.psd.iter().zip(&lay.psd).zip(&comp.psd) {
        let t = svec_len(sz);
        rc[off..off + t].copy_from_slice(&blk.complementarity_rhs(rhs));
    }
    for k in 0..lay.nn {
        rc[lay.nn_off + k] = comp.nn[k] / sc.nn_x[k];
    }
    let top: Vec<f64> = (0..n).map(|j| -eta * rd[j] - rc[j]).collect();
    let bot: Vec<f64> = rp.iter().map(|v| -eta * v).collect();
    let (p2, q2) = kkt.solve(&top, &bot)?;

    let denom = dot(c, p1) - dot(b, q1) - kappa / tau;
    let num = -eta * rg - rtau / tau - dot(c, &p2) + dot(b, &q2);
    let dtau = num / denom;
    if !dtau.is_finite() {
        return None;
    }
    let dx: Vec<f64> = p2.iter().zip(p1).map(|(u, v)| u + dtau * v).collect();
    let dy: Vec<f64> = q2.iter().zip(q1).map(|(u, v)| u + dtau * v).collect();

    let mut ds = vec![0.0; n];
    for (blk, &(off, sz)) in sc.psd.iter().zip(&lay.psd) {
        let t = svec_len(sz);
        let hdx = blk.apply_h(&dx[off..off + t]);
        for k in 0..t {
            ds[off + k] = rc[off + k] - hdx[k];
        }
    }
    for k in 0..lay.nn {
        let j = lay.nn_off + k;
        ds[j] = rc[j] - sc.nn_s[k] / sc.nn_x[k] * dx[j];
    }
    let dkappa = (rtau - kappa * dtau) / tau;
    Some(Direction { dx, dy, ds, dtau, dkappa })
}

fn max_step(lay: &Layout, sc: &Scaling, d: &Direction, tau: f64, kappa: f64) -> f64 {
    let mut alpha = f64::INFINITY;
    for (blk, &(off, sz)) in sc.psd.iter().zip(&lay.psd) {
        let t = svec_len(sz);
        alpha = alpha.min(blk.max_step_primal(&d.dx[off..off + t]));
        alpha = alpha.min(blk.max_step_dual(&d.ds[off..off + t]));
    }
    for k in 0..lay.nn {
        let j = lay.nn_off + k;
        if d.dx[j] < 0.0 {
            alpha = alpha.min(-sc.nn_x[k] / d.dx[j]);
        }
        if d.ds[j] < 0.0 {
            alpha = alpha.min(-sc.nn_s[k] / d.ds[j]);
        }
    }
    if d.dtau < 0.0 {
        alpha = alpha.min(-tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-kappa / d.dkappa);
    }
    alpha
}

fn check_termination(
    p: &ConicProblem,
    x: &[f64],
    y: &[f64],
    s: &[f64],
    tau: f64,
    kappa: f64,
    tol: f64,
) -> Option<SolveStatus> {
    if x.iter().chain(y).chain(s).any(|v| !v.is_finite()) || !tau.is_finite() || !kappa.is_finite() {
        return None;
    }
    if tau > 0.0 {
        let xh: Vec<f64> = x.iter().map(|v| v / tau).collect();
        let yh: Vec<f64> = y.iter().map(|v| v / tau).collect();
        if let Ok(r) = residuals_of(p, &xh, &yh) {
            if r.max() <= tol {
                return Some(SolveStatus::Optimal);
            }
        }
    }
    if farkas_residual(p, y) <= tol {
        return Some(SolveStatus::PrimalInfeasible);
    }
    if ray_residual(p, x) <= tol {
        return Some(SolveStatus::DualInfeasible);
    }
    None
}

fn build_solution(
    p: &ConicProblem,
    status: SolveStatus,
    x: &[f64],
    y: &[f64],
    s: &[f64],
    tau: f64,
    iterations: usize,
) -> ConicSolution {
    let (primal, dual, slack) = match status {
        SolveStatus::PrimalInfeasible => {
            let by = dot(&p.rhs(), y);
            (vec![0.0; x.len()], y.iter().map(|v| v / by).collect(), s.iter().map(|v| v / by).collect())
        }
        SolveStatus::DualInfeasible => {
            let cx = -dot(&p.objective, x);
            (x.iter().map(|v| v / cx).collect(), vec![0.0; y.len()], vec![0.0; s.len()])
        }
        _ => {
            let t = if tau > 0.0 { tau } else { 1.0 };
            (
                x.iter().map(|v| v / t).collect(),
                y.iter().map(|v| v / t).collect(),
                s.iter().map(|v| v / t).collect(),
            )
        }
    };
    ConicSolution {
        status,
        primal,
        dual,
        slack,
        primal_obj: 0.0,
        dual_obj: 0.0,
        residuals: Residuals::default(),
        certificate_residual: None,
        iterations,
        reduced_columns: 0,
    }
}
