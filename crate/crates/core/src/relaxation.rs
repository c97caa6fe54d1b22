//! Moment relaxations of polynomial optimization problems and membership
//! programs for truncated quadratic modules.
//!
//! For `𝒳 = {x : g_i(x) ≥ 0 (GE) or g_i(x) = 0 (EQ)}` the truncated
//! quadratic module of order `r` is
//!
//! ```text
//!   Q(g)^r = { s_0 + Σ_i s_i g_i : s_i SOS for GE and g_0 = 1,
//!              s_i arbitrary for EQ,  deg(s_i g_i) ≤ 2r }
//! ```
//!
//! and the moment relaxation is its dual: linear functionals `ℓ_y` on
//! `ℝ[x]_{2r}` with `ℓ_y(1) = 1`, a PSD moment matrix, PSD localizing
//! matrices for GE constraints and vanishing localizing rows for EQ ones.
//!
//! Both programs use a lifted layout: moment variables (respectively Gram
//! entries and free weights) are conic columns linked by equality rows.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{self, smat, svec_len, ConeSpec, ConicProblem, ConicSolution, LinearConstraint};
use crate::conic::{SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::poly::{basis_len, monomial_basis, Monomial, Polynomial};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// `g(x) ≥ 0`
    Ge,
    /// `g(x) = 0`
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub poly: Polynomial,
    pub sense: Sense,
}

impl Constraint {
    pub fn ge(poly: Polynomial) -> Self {
        Self { poly, sense: Sense::Ge }
    }

    pub fn eq(poly: Polynomial) -> Self {
        Self { poly, sense: Sense::Eq }
    }
}

/// Axis-aligned box `[lower_k, upper_k]` assumed to contain `𝒳`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch { expected: self.lower.len(), found: self.upper.len() });
        }
        if self.lower.is_empty() {
            return Err(Error::Invalid("bounding box needs at least one coordinate".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Invalid(format!("bounding box interval [{l}, {u}] is not proper")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }
}

/// A polynomial optimization problem's feasible set `𝒳`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopRepr")]
pub struct Pop {
    pub n: usize,
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Optional box containing `𝒳`, used by brute-force reference values.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundingBox>,
}

#[derive(Deserialize)]
struct PopRepr {
    n: usize,
    constraints: Vec<Constraint>,
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "box", default)]
    bounds: Option<BoundingBox>,
}

impl TryFrom<PopRepr> for Pop {
    type Error = Error;

    fn try_from(r: PopRepr) -> Result<Self> {
        let pop = Pop { n: r.n, constraints: r.constraints, name: r.name, bounds: r.bounds };
        pop.validate()?;
        Ok(pop)
    }
}

impl Pop {
    pub fn new(n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        let pop = Self { n, constraints, name: None, bounds: None };
        pop.validate()?;
        Ok(pop)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_bounds(mut self, bounds: BoundingBox) -> Result<Self> {
        if bounds.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: bounds.dim() });
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("a POP needs at least one variable".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.poly.nvars() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: c.poly.nvars() });
            }
            if c.poly.is_zero() {
                return Err(Error::Invalid(format!("constraint {} is the zero polynomial", i + 1)));
            }
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
            if b.dim() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: b.dim() });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Largest constraint degree (0 without constraints).
    pub fn max_degree(&self) -> u32 {
        self.constraints.iter().map(|c| c.poly.degree()).max().unwrap_or(0)
    }

    /// Worst constraint violation at `x`: `max(−g_i(x))` over GE and
    /// `max |g_i(x)|` over EQ constraints, clipped at zero.
    pub fn violation(&self, x: &[f64]) -> Result<f64> {
        let mut v: f64 = 0.0;
        for c in &self.constraints {
            let g = c.poly.evaluate(x)?;
            v = v.max(match c.sense {
                Sense::Ge => -g,
                Sense::Eq => g.abs(),
            });
        }
        Ok(v.max(0.0))
    }

    fn check_objective(&self, f: &Polynomial) -> Result<()> {
        if f.nvars() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: f.nvars() });
        }
        Ok(())
    }
}

fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
    Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).expect("fixture polynomial is well formed")
}

/// The finite set `{(0,0), (0,1), (1,0), (2,2)}` cut out by two quadratic
/// equations.
pub fn four_points() -> Pop {
    let g1 = poly(2, &[(&[0, 1], 2.0), (&[0, 2], -2.0), (&[1, 1], 1.0)]);
    let g2 = poly(2, &[(&[1, 0], -1.0), (&[0, 1], 1.0), (&[2, 0], 1.0), (&[0, 2], -1.0)]);
    Pop {
        n: 2,
        constraints: vec![Constraint::eq(g1), Constraint::eq(g2)],
        name: Some("four-points".into()),
        bounds: Some(BoundingBox { lower: vec![-0.5, -0.5], upper: vec![2.5, 2.5] }),
    }
}

/// A non-convex planar region inside the disk of radius 2.
pub fn nonconvex() -> Pop {
    let g1 = poly(2, &[(&[0, 0], 4.0), (&[2, 0], -1.0), (&[0, 2], -1.0)]);
    let g2 = poly(2, &[(&[0, 0], -1.0), (&[1, 0], -2.0), (&[0, 1], -1.0), (&[1, 1], -1.0)]);
    let g3 = poly(2, &[(&[0, 0], 1.0), (&[1, 0], 1.0), (&[1, 1], 1.0)]);
    Pop {
        n: 2,
        constraints: vec![Constraint::ge(g1), Constraint::ge(g2), Constraint::ge(g3)],
        name: Some("nonconvex".into()),
        bounds: Some(BoundingBox { lower: vec![-2.0, -2.0], upper: vec![2.0, 2.0] }),
    }
}

/// `𝒳 = {x ∈ ℝ : −x² ≥ 0} = {0}`, whose relaxations have unattained duals.
pub fn remark4() -> Pop {
    Pop {
        n: 1,
        constraints: vec![Constraint::ge(poly(1, &[(&[2], -1.0)]))],
        name: Some("remark4".into()),
        bounds: Some(BoundingBox { lower: vec![-1.0], upper: vec![1.0] }),
    }
}

pub const FIXTURE_NAMES: [&str; 3] = ["four-points", "nonconvex", "remark4"];

pub fn fixture(name: &str) -> Result<Pop> {
    match name {
        "four-points" => Ok(four_points()),
        "nonconvex" => Ok(nonconvex()),
        "remark4" => Ok(remark4()),
        other => Err(Error::Invalid(format!(
            "unknown fixture '{other}' (expected one of {})",
            FIXTURE_NAMES.join(", ")
        ))),
    }
}

/// Bijection between the monomials of degree `≤ two_r` and moment positions.
#[derive(Clone, Debug)]
pub struct MomentIndex {
    n: usize,
    two_r: u32,
    backward: Vec<Monomial>,
    forward: HashMap<Monomial, usize>,
}

impl MomentIndex {
    pub fn new(n: usize, two_r: u32) -> Self {
        let backward = monomial_basis(n, two_r);
        let forward = backward.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        Self { n, two_r, backward, forward }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> u32 {
        self.two_r
    }

    pub fn len(&self) -> usize {
        self.backward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backward.is_empty()
    }

    pub fn position(&self, m: &Monomial) -> Option<usize> {
        self.forward.get(m).copied()
    }

    pub fn monomial(&self, pos: usize) -> &Monomial {
        &self.backward[pos]
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.backward
    }

    fn pos(&self, m: &Monomial) -> usize {
        self.forward[m]
    }

    /// `ℓ_y(p) = Σ_α p_α y_α`.
    pub fn functional(&self, p: &Polynomial, y: &[f64]) -> Result<f64> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: y.len() });
        }
        p.terms()
            .map(|(m, c)| {
                self.position(m)
                    .map(|i| c * y[i])
                    .ok_or(Error::DegreeOverflow { degree: m.degree(), limit: self.two_r })
            })
            .sum()
    }

    /// Moment vector of the Dirac measure at `x`.
    pub fn dirac(&self, x: &[f64]) -> Vec<f64> {
        self.backward.iter().map(|m| m.eval(x)).collect()
    }
}

/// Half-degree available to the Gram basis of a weight multiplying a
/// constraint of degree `deg_g` at relaxation order `r`.
pub fn localizing_order(r: u32, deg_g: u32) -> Result<u32> {
    if 2 * r < deg_g {
        return Err(Error::OrderTooSmall { order: r, degree: deg_g });
    }
    Ok((2 * r - deg_g) / 2)
}

fn check_order(pop: &Pop, r: u32, extra_degree: u32) -> Result<()> {
    if r == 0 {
        return Err(Error::OrderTooSmall { order: r, degree: extra_degree.max(pop.max_degree()).max(1) });
    }
    let need = extra_degree.max(pop.max_degree());
    if 2 * r < need {
        return Err(Error::OrderTooSmall { order: r, degree: need });
    }
    Ok(())
}

/// Where a constraint's localizer lives in the moment relaxation.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalizerSlot {
    /// PSD block `block` of the conic cone with Gram basis `basis`.
    Psd { block: usize, basis: Vec<Monomial> },
    /// Scalar localizer stored as one orthant column.
    Scalar { column: usize },
    /// Vanishing rows `ℓ_y(x^α g) = 0`, one per shift `α`.
    EqRows { rows: Range<usize>, shifts: Vec<Monomial> },
}

/// Assembled moment relaxation of order `r`.
///
/// Columns are `[PSD blocks | orthant | moments y]`. Row 0 enforces
/// `y_0 = 1`, so its multiplier is the dual lower bound.
#[derive(Clone, Debug)]
pub struct RelaxationProblem {
    pub conic: ConicProblem,
    pub index: MomentIndex,
    pub order: u32,
    /// PSD block holding the moment matrix `M_r(y)`.
    pub moment_block: usize,
    pub moment_basis: Vec<Monomial>,
    pub localizers: Vec<LocalizerSlot>,
    pub objective_poly: Polynomial,
}

impl RelaxationProblem {
    /// Offset of the moment variables among the conic columns.
    pub fn moment_offset(&self) -> usize {
        self.conic.cone.free_offset()
    }

    /// Moment vector of a conic primal point.
    pub fn moments<'a>(&self, primal: &'a [f64]) -> &'a [f64] {
        let off = self.moment_offset();
        &primal[off..off + self.index.len()]
    }

    /// First-order moments `(y_{e_1}, …, y_{e_n})`.
    pub fn first_order(&self, primal: &[f64]) -> Vec<f64> {
        let y = self.moments(primal);
        let n = self.index.nvars();
        (0..n).map(|k| y[self.index.pos(&Monomial::var(n, k))]).collect()
    }

    /// Same constraints with a different objective, keeping the assembly.
    pub fn with_objective(&self, f: &Polynomial) -> Result<Self> {
        let mut out = self.clone();
        out.conic.objective = objective_vector(&self.index, f, self.conic.dim(), self.moment_offset())?;
        out.objective_poly = f.clone();
        Ok(out)
    }

    /// Reconstructs the weights `s_i` with `f − v = Σ s_i g_i` from the dual
    /// of a solve, where `v` is the multiplier of the normalization row.
    pub fn dual_certificate(&self, sol: &ConicSolution) -> QWitness {
        let n = self.index.nvars();
        let offsets = self.conic.cone.psd_offsets();
        let sizes = &self.conic.cone.psd_block_sizes;
        let gram = |block: usize, basis: &[Monomial]| -> GramWeight {
            let off = offsets[block];
            let m = smat(&sol.slack[off..off + svec_len(sizes[block])], sizes[block]);
            GramWeight::new(basis, &m)
        };
        let mut weights = vec![Weight::Gram(gram(self.moment_block, &self.moment_basis))];
        for slot in &self.localizers {
            weights.push(match slot {
                LocalizerSlot::Psd { block, basis } => Weight::Gram(gram(*block, basis)),
                LocalizerSlot::Scalar { column } => {
                    Weight::Gram(GramWeight::new(&[Monomial::one(n)], &DMatrix::from_element(1, 1, sol.slack[*column])))
                }
                LocalizerSlot::EqRows { rows, shifts } => {
                    let terms = shifts.iter().zip(rows.clone()).map(|(m, i)| (m.exponents().to_vec(), sol.dual[i]));
                    Weight::Free(Polynomial::from_terms(n, terms).expect("shift monomials have n variables"))
                }
            });
        }
        QWitness { n, weights }
    }
}

fn objective_vector(index: &MomentIndex, f: &Polynomial, dim: usize, offset: usize) -> Result<Vec<f64>> {
    if f.nvars() != index.nvars() {
        return Err(Error::DimensionMismatch { expected: index.nvars(), found: f.nvars() });
    }
    let mut c = vec![0.0; dim];
    for (m, v) in f.terms() {
        let p = index.position(m).ok_or(Error::DegreeOverflow { degree: f.degree(), limit: index.max_degree() })?;
        c[offset + p] = v;
    }
    Ok(c)
}

/// Builds the order-`r` moment relaxation of `min f` over `pop`.
pub fn build_moment_relaxation(pop: &Pop, f: &Polynomial, r: u32) -> Result<RelaxationProblem> {
    pop.validate()?;
    pop.check_objective(f)?;
    check_order(pop, r, f.degree())?;
    let n = pop.n;
    let index = MomentIndex::new(n, 2 * r);
    let moment_basis = monomial_basis(n, r);

    // cone layout
    let mut psd_sizes = vec![moment_basis.len()];
    let mut psd_bases = vec![moment_basis.clone()];
    let mut nonneg_owner = Vec::new();
    enum Pending {
        Psd(usize),
        Scalar(usize),
        Eq,
    }
    let mut pending = Vec::new();
    for (i, c) in pop.constraints.iter().enumerate() {
        let k = localizing_order(r, c.poly.degree())?;
        match c.sense {
            Sense::Ge if basis_len(n, k) > 1 => {
                pending.push(Pending::Psd(psd_sizes.len()));
                psd_sizes.push(basis_len(n, k));
                psd_bases.push(monomial_basis(n, k));
            }
            Sense::Ge => {
                pending.push(Pending::Scalar(nonneg_owner.len()));
                nonneg_owner.push(i);
            }
            Sense::Eq => pending.push(Pending::Eq),
        }
    }
    let cone = ConeSpec { psd_block_sizes: psd_sizes.clone(), nonneg_count: nonneg_owner.len(), free_count: index.len() };
    let offsets = cone.psd_offsets();
    let nn_off = cone.nonneg_offset();
    let y_off = cone.free_offset();

    let mut rows = vec![LinearConstraint { row: vec![(y_off, 1.0)], rhs: 1.0 }];
    // g·y over a product monomial: Σ_γ g_γ y_{base·γ}
    let shifted = |g: &Polynomial, base: &Monomial, scale: f64| -> Vec<(usize, f64)> {
        g.terms().map(|(m, v)| (y_off + index.pos(&base.mul(m)), scale * v)).collect()
    };
    let one = Polynomial::constant(n, 1.0);
    let psd_rows = |block: usize, g: &Polynomial, rows: &mut Vec<LinearConstraint>| {
        let basis = &psd_bases[block];
        let mut k = offsets[block];
        for j in 0..basis.len() {
            for i in j..basis.len() {
                let s = if i == j { 1.0 } else { SQRT2 };
                let mut row = vec![(k, 1.0)];
                row.extend(shifted(g, &basis[i].mul(&basis[j]), -s));
                rows.push(LinearConstraint { row, rhs: 0.0 });
                k += 1;
            }
        }
    };
    psd_rows(0, &one, &mut rows);
    let mut localizers = Vec::with_capacity(pop.constraints.len());
    for (c, p) in pop.constraints.iter().zip(&pending) {
        match *p {
            Pending::Psd(block) => {
                psd_rows(block, &c.poly, &mut rows);
                localizers.push(LocalizerSlot::Psd { block, basis: psd_bases[block].clone() });
            }
            Pending::Scalar(j) => {
                let mut row = vec![(nn_off + j, 1.0)];
                row.extend(shifted(&c.poly, &Monomial::one(n), -1.0));
                rows.push(LinearConstraint { row, rhs: 0.0 });
                localizers.push(LocalizerSlot::Scalar { column: nn_off + j });
            }
            Pending::Eq => {
                let shifts = monomial_basis(n, 2 * r - c.poly.degree());
                let start = rows.len();
                for a in &shifts {
                    rows.push(LinearConstraint { row: shifted(&c.poly, a, 1.0), rhs: 0.0 });
                }
                localizers.push(LocalizerSlot::EqRows { rows: start..rows.len(), shifts });
            }
        }
    }
    let objective = objective_vector(&index, f, cone.dim(), y_off)?;
    let conic = ConicProblem::new(cone, objective, rows)?;
    Ok(RelaxationProblem {
        conic,
        index,
        order: r,
        moment_block: 0,
        moment_basis,
        localizers,
        objective_poly: f.clone(),
    })
}

/// Symmetric Gram matrix of an SOS weight `m(x)' G m(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramWeight {
    /// Exponent vectors of the basis `m(x)`.
    pub basis: Vec<Vec<u32>>,
    /// Dense row-major matrix.
    pub matrix: Vec<Vec<f64>>,
}

impl GramWeight {
    fn new(basis: &[Monomial], m: &DMatrix<f64>) -> Self {
        Self {
            basis: basis.iter().map(|b| b.exponents().to_vec()).collect(),
            matrix: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.matrix.len();
        DMatrix::from_fn(k, k, |i, j| self.matrix[i][j])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        if m.is_empty() {
            return 0.0;
        }
        m.symmetric_eigenvalues().min()
    }

    /// The polynomial `m(x)' G m(x)`.
    pub fn polynomial(&self, n: usize) -> Polynomial {
        let mut terms = Vec::new();
        for (i, bi) in self.basis.iter().enumerate() {
            for (j, bj) in self.basis.iter().enumerate() {
                let e: Vec<u32> = bi.iter().zip(bj).map(|(a, b)| a + b).collect();
                terms.push((e, self.matrix[i][j]));
            }
        }
        Polynomial::from_terms(n, terms).expect("basis exponents have n entries")
    }
}

/// Weight multiplying one generator in a certificate `Σ s_i g_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// SOS weight given by a Gram matrix (for `g_0 = 1` and GE constraints).
    Gram(GramWeight),
    /// Sign-free weight of an EQ constraint.
    Free(Polynomial),
}

impl Weight {
    pub fn polynomial(&self, n: usize) -> Polynomial {
        match self {
            Weight::Gram(g) => g.polynomial(n),
            Weight::Free(p) => p.clone(),
        }
    }
}

/// A certificate `p = s_0 + Σ_i s_i g_i`; `weights[0]` multiplies `g_0 = 1`
/// and `weights[i]` the `i`-th constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QWitness {
    pub n: usize,
    pub weights: Vec<Weight>,
}

impl QWitness {
    /// Evaluates `Σ s_i g_i`.
    pub fn reconstruct(&self, pop: &Pop) -> Result<Polynomial> {
        if self.weights.len() != pop.constraints.len() + 1 {
            return Err(Error::DimensionMismatch { expected: pop.constraints.len() + 1, found: self.weights.len() });
        }
        let mut acc = self.weights[0].polynomial(self.n);
        for (w, c) in self.weights[1..].iter().zip(&pop.constraints) {
            acc = acc.add_scaled(1.0, &w.polynomial(self.n).multiply(&c.poly)?)?;
        }
        Ok(acc)
    }

    /// Largest coefficient of `Σ s_i g_i − p`.
    pub fn coefficient_error(&self, pop: &Pop, p: &Polynomial) -> Result<f64> {
        Ok(self.reconstruct(pop)?.add_scaled(-1.0, p)?.max_abs_coeff())
    }

    /// Smallest eigenvalue over all Gram weights.
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.weights
            .iter()
            .filter_map(|w| match w {
                Weight::Gram(g) => Some(g.min_eigenvalue()),
                Weight::Free(_) => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest Gram or weight coefficient in absolute value.
    pub fn max_abs_entry(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| match w {
                Weight::Gram(g) => g.matrix.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())),
                Weight::Free(p) => p.max_abs_coeff(),
            })
            .fold(0.0, f64::max)
    }
}

/// Placement of a weight's unknowns among the conic columns.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSlot {
    Psd { block: usize, basis: Vec<Monomial> },
    Scalar { column: usize },
    Free { columns: Range<usize>, basis: Vec<Monomial> },
}

/// Feasibility program for `target ∈ Q(g)^r`.
///
/// Columns are `[Gram blocks | scalar weights | EQ weight coefficients]`
/// and there is one coefficient-matching row per monomial of degree `≤ 2r`.
#[derive(Clone, Debug)]
pub struct QMembershipProblem {
    pub conic: ConicProblem,
    /// Gram side lengths for `g_0` and each GE constraint, in constraint order.
    pub gram_block_sizes: Vec<usize>,
    pub target: Polynomial,
    pub order: u32,
    /// One slot per generator, `g_0 = 1` first.
    pub slots: Vec<WeightSlot>,
    pub row_monomials: Vec<Monomial>,
}

/// Three-valued membership answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    NonMember,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipResult {
    pub verdict: Verdict,
    /// Solver status, absent when the verdict needed no solve.
    pub status: Option<SolveStatus>,
    /// Residual behind the verdict: the solver residual for members and
    /// undetermined answers, the Farkas residual for non-members.
    pub residual: f64,
    /// Largest coefficient error of the witness, for members.
    pub coefficient_error: Option<f64>,
    /// Witness certificate when the verdict is `member`.
    pub witness: Option<QWitness>,
}

/// Builds the feasibility program deciding `p ∈ Q(g)^r`.
pub fn build_q_membership(pop: &Pop, p: &Polynomial, r: u32) -> Result<QMembershipProblem> {
    pop.validate()?;
    pop.check_objective(p)?;
    if p.degree() > 2 * r {
        return Err(Error::DegreeOverflow { degree: p.degree(), limit: 2 * r });
    }
    check_order(pop, r, 0)?;
    let n = pop.n;
    let rows_basis = monomial_basis(n, 2 * r);
    let index = MomentIndex::new(n, 2 * r);

    let mut psd_sizes = Vec::new();
    let mut nonneg = 0usize;
    let mut free = 0usize;
    enum Pending {
        Psd(usize, Vec<Monomial>),
        Scalar(usize),
        Free(Range<usize>, Vec<Monomial>),
    }
    let mut pending = Vec::new();
    let mut gram_block_sizes = Vec::new();
    let gens: Vec<(Polynomial, Sense)> = std::iter::once((Polynomial::constant(n, 1.0), Sense::Ge))
        .chain(pop.constraints.iter().map(|c| (c.poly.clone(), c.sense)))
        .collect();
    for (g, sense) in &gens {
        match sense {
            Sense::Ge => {
                let basis = monomial_basis(n, localizing_order(r, g.degree())?);
                gram_block_sizes.push(basis.len());
                if basis.len() > 1 {
                    pending.push(Pending::Psd(psd_sizes.len(), basis.clone()));
                    psd_sizes.push(basis.len());
                } else {
                    pending.push(Pending::Scalar(nonneg));
                    nonneg += 1;
                }
            }
            Sense::Eq => {
                let basis = monomial_basis(n, 2 * r - g.degree());
                let len = basis.len();
                pending.push(Pending::Free(free..free + len, basis));
                free += len;
            }
        }
    }
    let cone = ConeSpec { psd_block_sizes: psd_sizes, nonneg_count: nonneg, free_count: free };
    let offsets = cone.psd_offsets();
    let nn_off = cone.nonneg_offset();
    let fr_off = cone.free_offset();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows_basis.len()];
    let mut slots = Vec::with_capacity(gens.len());
    for ((g, _), p) in gens.iter().zip(pending) {
        match p {
            Pending::Psd(block, basis) => {
                let mut k = offsets[block];
                for j in 0..basis.len() {
                    for i in j..basis.len() {
                        let s = if i == j { 1.0 } else { SQRT2 };
                        let base = basis[i].mul(&basis[j]);
                        for (m, v) in g.terms() {
                            rows[index.pos(&base.mul(m))].push((k, s * v));
                        }
                        k += 1;
                    }
                }
                slots.push(WeightSlot::Psd { block, basis });
            }
            Pending::Scalar(j) => {
                for (m, v) in g.terms() {
                    rows[index.pos(m)].push((nn_off + j, v));
                }
                slots.push(WeightSlot::Scalar { column: nn_off + j });
            }
            Pending::Free(range, basis) => {
                for (col, a) in range.clone().zip(&basis) {
                    for (m, v) in g.terms() {
                        rows[index.pos(&a.mul(m))].push((fr_off + col, v));
                    }
                }
                slots.push(WeightSlot::Free { columns: fr_off + range.start..fr_off + range.end, basis });
            }
        }
    }
    let constraints = rows
        .into_iter()
        .zip(&rows_basis)
        .map(|(row, m)| LinearConstraint { row, rhs: p.coeff(m) })
        .collect();
    let dim = cone.dim();
    let conic = ConicProblem::new(cone, vec![0.0; dim], constraints)?;
    Ok(QMembershipProblem { conic, gram_block_sizes, target: p.clone(), order: r, slots, row_monomials: rows_basis })
}

impl QMembershipProblem {
    /// Witness encoded by a primal point of the conic program.
    pub fn witness(&self, primal: &[f64]) -> QWitness {
        let n = self.target.nvars();
        let offsets = self.conic.cone.psd_offsets();
        let weights = self
            .slots
            .iter()
            .map(|slot| match slot {
                WeightSlot::Psd { block, basis } => {
                    let k = basis.len();
                    let off = offsets[*block];
                    Weight::Gram(GramWeight::new(basis, &smat(&primal[off..off + svec_len(k)], k)))
                }
                WeightSlot::Scalar { column } => {
                    Weight::Gram(GramWeight::new(&[Monomial::one(n)], &DMatrix::from_element(1, 1, primal[*column])))
                }
                WeightSlot::Free { columns, basis } => {
                    let terms = basis.iter().zip(columns.clone()).map(|(m, j)| (m.exponents().to_vec(), primal[j]));
                    Weight::Free(Polynomial::from_terms(n, terms).expect("basis monomials have n variables"))
                }
            })
            .collect();
        QWitness { n, weights }
    }

    /// Row expressing `Σ_i s_i(x) g_i(x) = 0` in the conic unknowns.
    pub fn vanishing_row(&self, pop: &Pop, x: &[f64]) -> Result<LinearConstraint> {
        let gvals: Vec<f64> = std::iter::once(Ok(1.0))
            .chain(pop.constraints.iter().map(|c| c.poly.evaluate(x)))
            .collect::<Result<_>>()?;
        let offsets = self.conic.cone.psd_offsets();
        let mut row = Vec::new();
        for (slot, g) in self.slots.iter().zip(&gvals) {
            match slot {
                WeightSlot::Psd { block, basis } => {
                    let mx: Vec<f64> = basis.iter().map(|m| m.eval(x)).collect();
                    let mut k = offsets[*block];
                    for j in 0..basis.len() {
                        for i in j..basis.len() {
                            let s = if i == j { 1.0 } else { SQRT2 };
                            row.push((k, g * s * mx[i] * mx[j]));
                            k += 1;
                        }
                    }
                }
                WeightSlot::Scalar { column } => row.push((*column, *g)),
                WeightSlot::Free { columns, basis } => {
                    for (j, m) in columns.clone().zip(basis) {
                        row.push((j, g * m.eval(x)));
                    }
                }
            }
        }
        Ok(LinearConstraint { row, rhs: 0.0 })
    }

    /// Appends an extra linear row to the matching system.
    pub fn push_row(&mut self, row: LinearConstraint) -> Result<()> {
        self.conic.constraints.push(row);
        self.conic.validate()
    }

    /// Solves the feasibility program and applies the three-valued rule:
    /// member needs optimal status with residuals `≤ tol`, non-member a
    /// Farkas certificate with residual `≤ tol`.
    ///
    /// `Q(g)ʳ` is a cone, so the target is normalized to unit largest
    /// coefficient before solving and the witness scaled back; verdicts are
    /// then invariant under positive scaling of the target.
    pub fn decide(&self, pop: &Pop, tol: f64) -> Result<MembershipResult> {
        let settings = SolverSettings { tol, facial_reduction: true, ..SolverSettings::default() };
        let scale = self.conic.constraints.iter().fold(0.0_f64, |m, c| m.max(c.rhs.abs()));
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        let mut normalized = self.conic.clone();
        for c in &mut normalized.constraints {
            c.rhs /= scale;
        }
        let mut sol = conic::solve(&normalized, &settings)?;
        if sol.status == SolveStatus::Optimal {
            sol.primal.iter_mut().for_each(|v| *v *= scale);
        }
        let result = match sol.status {
            SolveStatus::Optimal if sol.residuals.max() <= tol => {
                let witness = self.witness(&sol.primal);
                let err = witness.coefficient_error(pop, &self.target)?;
                MembershipResult {
                    verdict: Verdict::Member,
                    status: Some(sol.status),
                    residual: sol.residuals.max(),
                    coefficient_error: Some(err),
                    witness: Some(witness),
                }
            }
            SolveStatus::PrimalInfeasible
                if sol.certificate_residual.is_some_and(|c| c <= tol) && robust_ray(&normalized, &sol.dual, tol) =>
            {
                MembershipResult {
                verdict: Verdict::NonMember,
                status: Some(sol.status),
                    residual: sol.certificate_residual.unwrap_or(f64::INFINITY),
                    coefficient_error: None,
                    witness: None,
                }
            }
            _ => MembershipResult {
                verdict: Verdict::Undetermined,
                status: Some(sol.status),
                residual: sol.residuals.max(),
                coefficient_error: None,
                witness: None,
            },
        };
        Ok(result)
    }
}

/// Whether a Farkas ray `y` (`b'y > 0`, `A'y ∈ −K*`) still proves
/// infeasibility after any perturbation of `b` of relative size `tol`:
/// `(b + Δ)'y > 0` for all `‖Δ‖∞ ≤ tol · (1 + ‖b‖∞)` iff
/// `‖y‖₁ · tol · (1 + ‖b‖∞) < b'y`. Near-dependent rows produce huge rays
/// that pass the residual test yet certify nothing beyond rounding.
fn robust_ray(problem: &ConicProblem, y: &[f64], tol: f64) -> bool {
    let b = problem.rhs();
    let by: f64 = b.iter().zip(y).map(|(u, v)| u * v).sum();
    let l1: f64 = y.iter().map(|v| v.abs()).sum();
    let bmax = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    by > 0.0 && l1 * tol * (1.0 + bmax) < by
}

/// Whether `R² − Σ x_k²` has a certificate in `Q(g)^r`.
pub fn assumption_radius_check(pop: &Pop, radius: f64, r: u32, tol: f64) -> Result<bool> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Invalid("radius must be positive".into()));
    }
    let n = pop.n;
    let mut p = Polynomial::constant(n, radius * radius);
    for k in 0..n {
        let xk = Polynomial::var(n, k);
        p = p.add_scaled(-1.0, &xk.multiply(&xk)?)?;
    }
    let q = build_q_membership(pop, &p, r)?;
    Ok(q.decide(pop, tol)?.verdict == Verdict::Member)
}
