//! Exactness certificates for moment-SOS relaxations.
//!
//! A relaxation of order `r` is exact for `f` when its value `vʳ(f)` is
//! attained by a Dirac moment vector `y_x̂` with `x̂ ∈ 𝒳` and the dual is
//! attained, i.e. `f − vʳ ∈ Q(g)ʳ`. The certificate pipeline solves the
//! moment relaxation, extracts a candidate `x̂` from the first-order moments,
//! checks `x̂ ∈ 𝒳` and `f(x̂) = vʳ`, and finally decides the membership
//! `f − v̂ ∈ Q(g)ʳ` with `v̂ = f(x̂)`. Using `f(x̂)` rather than the solver's
//! `vʳ` keeps the target on the face of polynomials vanishing at `x̂`,
//! where the membership program lives when the certificate exists.
//!
//! The exact objectives at a given point `x̂` form the spectrahedral cone
//! `S_x̂ = {f ∈ Q(g)ʳ : f(x̂) = 0}` (up to adding constants), decided by
//! [`s_cone_member`].

mod oracle;

pub use oracle::{descend, repair, value_oracle_grid, FeasibleGrid, GridOracle, REPAIR_TOL};

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conic::{self, Residuals, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::relaxation::{
    build_moment_relaxation, build_q_membership, MembershipResult, Pop, QWitness, RelaxationProblem, Verdict,
    Weight,
};

/// Solver tolerance of relaxation solves.
const RELAXATION_TOL: f64 = 1e-9;
/// Size of the linear tie-breaking perturbation, relative to `1 + max |f_α|`.
const TIE_BREAK_SCALE: f64 = 1e-3;
const TIE_BREAK_SEED: u64 = 0x6d6f_6d73_6f73;
/// Grid resolution used when no explicit one is configured.
pub const DEFAULT_GRID: usize = 801;

/// Acceptance thresholds of the certificate checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Allowed constraint violation of the candidate.
    pub feas_tol: f64,
    /// Allowed `|f(x̂) − vʳ|`.
    pub value_tol: f64,
    /// Solver tolerance of membership decisions.
    pub member_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-6, value_tol: 1e-6, member_tol: 1e-7 }
    }
}

impl Tolerances {
    pub fn new(feas_tol: f64, value_tol: f64, member_tol: f64) -> Result<Self> {
        let t = Self { feas_tol, value_tol, member_tol };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("feas_tol", self.feas_tol), ("value_tol", self.value_tol), ("member_tol", self.member_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Primal optimum of a relaxation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxationOutcome {
    /// `vʳ(f)`, the primal optimal value.
    pub value: f64,
    /// Normalization multiplier, the dual lower bound.
    pub dual_value: f64,
    /// Moment vector over the relaxation's monomial index.
    pub moments: Vec<f64>,
    /// First-order moments `(y_{e_1}, …, y_{e_n})`.
    pub candidate: Vec<f64>,
    pub solver_status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Outcome class of an exactness certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Exact,
    /// Value attained by a point of `𝒳`, but `f − vʳ ∈ Q(g)ʳ` not found.
    ValueExactDualUnattained,
    NotExact,
    Undetermined,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::ValueExactDualUnattained => "value_exact_dual_unattained",
            Self::NotExact => "not_exact",
            Self::Undetermined => "undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Exact, Self::ValueExactDualUnattained, Self::NotExact, Self::Undetermined]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

/// Where a certified candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// First-order moments of the relaxation.
    Moments,
    /// First-order moments after the tie-breaking perturbation.
    PerturbedMoments,
    /// Minimizer of the grid oracle.
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateResiduals {
    /// Worst constraint violation at `x̂`.
    pub candidate_feasibility: f64,
    /// `|f(x̂) − vʳ|`.
    pub value_gap: f64,
    /// Residual of the membership decision for `f − v̂`, when one was made.
    pub membership_residual: Option<f64>,
}

/// One weight `s_i` of a certificate in dense form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateBlock {
    /// `s0` for the constant generator, `s{i}` for constraint `i`.
    pub label: String,
    /// Exponent vectors of the Gram basis, or of the free coefficients.
    pub basis: Vec<Vec<u32>>,
    /// Gram matrix rows for SOS weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Coefficients of sign-free weights of equality constraints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

/// Dense blocks of a witness, one per generator.
pub fn certificate_blocks(w: &QWitness) -> Vec<CertificateBlock> {
    w.weights
        .iter()
        .enumerate()
        .map(|(i, weight)| match weight {
            Weight::Gram(g) => CertificateBlock {
                label: format!("s{i}"),
                basis: g.basis.clone(),
                matrix: Some(g.matrix.clone()),
                coefficients: None,
            },
            Weight::Free(p) => CertificateBlock {
                label: format!("s{i}"),
                basis: p.terms().map(|(m, _)| m.exponents().to_vec()).collect(),
                matrix: None,
                coefficients: Some(p.terms().map(|(_, c)| c).collect()),
            },
        })
        .collect()
}

/// Result of [`certify_exactness`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactnessCertificate {
    pub classification: Classification,
    pub order: u32,
    pub x_hat: Vec<f64>,
    /// `f(x̂)` for a certified candidate, otherwise the relaxation value.
    pub v_hat: f64,
    /// `vʳ(f)`, the relaxation value.
    pub v_relax: f64,
    pub residuals: CertificateResiduals,
    /// Weights `s_i` with `f − v̂ = Σ s_i g_i`, for exact certificates.
    pub gram_data: Option<Vec<CertificateBlock>>,
    pub candidate_source: Option<CandidateSource>,
    pub relaxation_status: SolveStatus,
    /// Grid-oracle value, when the oracle was consulted.
    pub oracle_value: Option<f64>,
    /// Grid-oracle minimizer, when the oracle was consulted.
    pub oracle_point: Option<Vec<f64>>,
    #[serde(skip)]
    pub witness: Option<QWitness>,
}

impl ExactnessCertificate {
    pub fn is_exact(&self) -> bool {
        self.classification == Classification::Exact
    }
}

/// An accepted candidate with its `(violation, value gap)`.
type Accepted = (Vec<f64>, (f64, f64));
/// An accepted candidate and where it came from.
type Found = (Vec<f64>, (f64, f64), CandidateSource);

/// Fixed pseudo-random unit direction of the tie-breaking perturbation.
pub fn tie_break_direction(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(TIE_BREAK_SEED);
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.into_iter().map(|v| v / norm).collect()
}

fn linear_form(u: &[f64]) -> Polynomial {
    let mut c = vec![0.0];
    c.extend_from_slice(u);
    Polynomial::linear(&c).expect("finite coefficients")
}

/// Reusable certification context for one POP and order: the relaxation is
/// assembled once and the grid oracle is built on first use.
pub struct Certifier<'p> {
    pop: &'p Pop,
    order: u32,
    tols: Tolerances,
    base: RelaxationProblem,
    grid_resolution: usize,
    grid: OnceLock<Option<FeasibleGrid>>,
}

impl<'p> Certifier<'p> {
    pub fn new(pop: &'p Pop, order: u32, tols: Tolerances) -> Result<Self> {
        tols.validate()?;
        let base = build_moment_relaxation(pop, &Polynomial::zero(pop.n), order)?;
        Ok(Self { pop, order, tols, base, grid_resolution: DEFAULT_GRID, grid: OnceLock::new() })
    }

    /// Grid resolution of the oracle used by the not-exact decision.
    pub fn with_grid_resolution(mut self, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Invalid("grid resolution must be at least 2".into()));
        }
        self.grid_resolution = resolution;
        self.grid = OnceLock::new();
        Ok(self)
    }

    pub fn pop(&self) -> &Pop {
        self.pop
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tols
    }

    pub fn relaxation(&self) -> &RelaxationProblem {
        &self.base
    }

    /// The feasible grid over the POP's box, `None` without a box.
    pub fn grid(&self) -> Result<Option<&FeasibleGrid>> {
        if let Some(g) = self.grid.get() {
            return Ok(g.as_ref());
        }
        let built = match &self.pop.bounds {
            Some(b) => Some(FeasibleGrid::new(self.pop, b, self.grid_resolution)?),
            None => None,
        };
        Ok(self.grid.get_or_init(|| built).as_ref())
    }

    /// Grid oracle for `f`, `None` without a box.
    pub fn oracle(&self, f: &Polynomial) -> Result<Option<GridOracle>> {
        self.grid()?.map(|g| g.oracle(self.pop, f)).transpose()
    }

    fn check_objective(&self, f: &Polynomial) -> Result<()> {
        if f.nvars() != self.pop.n {
            return Err(Error::DimensionMismatch { expected: self.pop.n, found: f.nvars() });
        }
        if f.degree() > 2 * self.order {
            return Err(Error::OrderTooSmall { order: self.order, degree: f.degree() });
        }
        Ok(())
    }

    /// Solves the order-`r` moment relaxation of `min f`.
    pub fn solve(&self, f: &Polynomial) -> Result<RelaxationOutcome> {
        self.check_objective(f)?;
        let rel = self.base.with_objective(f)?;
        let settings = SolverSettings { tol: RELAXATION_TOL, facial_reduction: true, ..SolverSettings::default() };
        let sol = conic::solve(&rel.conic, &settings)?;
        match sol.status {
            SolveStatus::PrimalInfeasible => return Err(Error::RelaxationInfeasible),
            SolveStatus::DualInfeasible => return Err(Error::RelaxationUnbounded),
            _ => {}
        }
        Ok(RelaxationOutcome {
            value: sol.primal_obj,
            dual_value: sol.dual_obj,
            moments: rel.moments(&sol.primal).to_vec(),
            candidate: rel.first_order(&sol.primal),
            solver_status: sol.status,
            residuals: sol.residuals,
            iterations: sol.iterations,
        })
    }

    /// `(violation, |f(x) − v|)` of a candidate.
    fn candidate_errors(&self, f: &Polynomial, x: &[f64], v: f64) -> Result<(f64, f64)> {
        Ok((self.pop.violation(x)?, (f.evaluate(x)? - v).abs()))
    }

    fn passes(&self, errors: (f64, f64)) -> bool {
        errors.0 <= self.tols.feas_tol && errors.1 <= self.tols.value_tol
    }

    /// Accepts `x` after repairing it onto `𝒳` (first alone, then together
    /// with `f ≤ v`), falling back to the unrepaired point. Repairing first
    /// puts accepted candidates on `𝒳` to rounding accuracy, so that the
    /// membership target `f − f(x̂)` vanishes on the right face.
    fn try_candidate(&self, f: &Polynomial, x: &[f64], v: f64) -> Result<Option<Accepted>> {
        if x.iter().any(|c| !c.is_finite()) {
            return Ok(None);
        }
        for cap in [None, Some((f, v))] {
            let repaired = repair(self.pop, x, cap);
            let errors = self.candidate_errors(f, &repaired, v)?;
            if self.passes(errors) {
                return Ok(Some((repaired, errors)));
            }
        }
        let direct = self.candidate_errors(f, x, v)?;
        Ok(self.passes(direct).then(|| (x.to_vec(), direct)))
    }

    /// Candidates from the relaxation, in the order they are tried: the
    /// first-order moments, then the moments of the relaxation with `f`
    /// perturbed by `±δ⟨u, x⟩` for a fixed direction `u`.
    fn moment_candidates(
        &self,
        f: &Polynomial,
        outcome: &RelaxationOutcome,
    ) -> Result<Option<Found>> {
        let v = outcome.value;
        if let Some((x, e)) = self.try_candidate(f, &outcome.candidate, v)? {
            return Ok(Some((x, e, CandidateSource::Moments)));
        }
        let delta = TIE_BREAK_SCALE * (1.0 + f.max_abs_coeff());
        let u = linear_form(&tie_break_direction(self.pop.n));
        for sign in [1.0, -1.0] {
            let perturbed = f.add_scaled(sign * delta, &u)?;
            let out = match self.solve(&perturbed) {
                Ok(o) if o.solver_status == SolveStatus::Optimal => o,
                _ => continue,
            };
            if let Some((x, e)) = self.try_candidate(f, &out.candidate, v)? {
                return Ok(Some((x, e, CandidateSource::PerturbedMoments)));
            }
        }
        Ok(None)
    }

    fn membership(&self, p: &Polynomial) -> Result<MembershipResult> {
        build_q_membership(self.pop, p, self.order)?.decide(self.pop, self.tols.member_tol)
    }

    /// Runs the certificate pipeline for `f`.
    pub fn certify(&self, f: &Polynomial) -> Result<ExactnessCertificate> {
        let outcome = self.solve(f)?;
        let v = outcome.value;
        let raw_errors = self.candidate_errors(f, &outcome.candidate, v)?;
        let mut cert = ExactnessCertificate {
            classification: Classification::Undetermined,
            order: self.order,
            x_hat: outcome.candidate.clone(),
            v_hat: v,
            v_relax: v,
            residuals: CertificateResiduals {
                candidate_feasibility: raw_errors.0,
                value_gap: raw_errors.1,
                membership_residual: None,
            },
            gram_data: None,
            candidate_source: None,
            relaxation_status: outcome.solver_status,
            oracle_value: None,
            oracle_point: None,
            witness: None,
        };
        if outcome.solver_status != SolveStatus::Optimal {
            return Ok(cert);
        }

        let mut found = self.moment_candidates(f, &outcome)?;
        let mut oracle = None;
        if found.is_none() {
            oracle = self.oracle(f)?;
            if let Some(o) = &oracle {
                cert.oracle_value = Some(o.value);
                cert.oracle_point = o.argmin.clone();
                if let Some(x) = o.argmin.as_ref().filter(|_| o.refined) {
                    if let Some((x, e)) = self.try_candidate(f, x, v)? {
                        found = Some((x, e, CandidateSource::Grid));
                    }
                }
            }
        }

        match found {
            Some((x, errors, source)) => {
                cert.x_hat = x;
                cert.residuals.candidate_feasibility = errors.0;
                cert.residuals.value_gap = errors.1;
                cert.candidate_source = Some(source);
                cert.v_hat = f.evaluate(&cert.x_hat)?;
                let m = self.membership(&f.shift(-cert.v_hat))?;
                cert.residuals.membership_residual = Some(m.residual);
                if m.verdict == Verdict::Member {
                    cert.classification = Classification::Exact;
                    cert.gram_data = m.witness.as_ref().map(certificate_blocks);
                    cert.witness = m.witness;
                } else {
                    cert.classification = Classification::ValueExactDualUnattained;
                }
            }
            None => {
                // A relaxation gap needs an independent upper bound above vʳ,
                // and f − v_oracle must be certified outside Q(g)ʳ.
                if let Some(o) = oracle.filter(|o| o.refined && o.value - v > 10.0 * self.tols.value_tol) {
                    let probe = self.membership(&f.shift(-o.value))?;
                    cert.residuals.membership_residual = Some(probe.residual);
                    if probe.verdict == Verdict::NonMember {
                        cert.classification = Classification::NotExact;
                    }
                }
            }
        }
        Ok(cert)
    }
}

/// Solves the order-`r` moment relaxation of `min f` over `pop`.
pub fn solve_relaxation(pop: &Pop, f: &Polynomial, r: u32) -> Result<RelaxationOutcome> {
    Certifier::new(pop, r, Tolerances::default())?.solve(f)
}

/// Certifies (or refutes) exactness of the order-`r` relaxation for `f`.
pub fn certify_exactness(pop: &Pop, f: &Polynomial, r: u32, tols: Tolerances) -> Result<ExactnessCertificate> {
    Certifier::new(pop, r, tols)?.certify(f)
}

/// Decides `f0 ∈ S_x̂(g)ʳ`, i.e. `f0 ∈ Q(g)ʳ` with `f0(x̂) = 0`.
///
/// Polynomials with `|f0(x̂)| > feas_tol · (1 + ‖f0‖)` are rejected without
/// a solve. Otherwise the target is `f0 − f0(x̂)`, which vanishes at `x̂`
/// exactly, and the matching system gets the extra row
/// `Σ s_i(x̂) g_i(x̂) = 0`.
pub fn s_cone_member(pop: &Pop, r: u32, x_hat: &[f64], f0: &Polynomial, tols: Tolerances) -> Result<MembershipResult> {
    tols.validate()?;
    if x_hat.len() != pop.n {
        return Err(Error::DimensionMismatch { expected: pop.n, found: x_hat.len() });
    }
    if f0.nvars() != pop.n {
        return Err(Error::DimensionMismatch { expected: pop.n, found: f0.nvars() });
    }
    if f0.degree() > 2 * r {
        return Err(Error::DegreeOverflow { degree: f0.degree(), limit: 2 * r });
    }
    let at = f0.evaluate(x_hat)?;
    if at.abs() > tols.feas_tol * (1.0 + f0.max_abs_coeff()) {
        return Ok(MembershipResult {
            verdict: Verdict::NonMember,
            status: None,
            residual: at.abs(),
            coefficient_error: None,
            witness: None,
        });
    }
    let target = f0.shift(-at);
    let mut q = build_q_membership(pop, &target, r)?;
    let row = q.vanishing_row(pop, x_hat)?;
    q.push_row(row)?;
    q.decide(pop, tols.member_tol)
}

/// Answer of [`exactness_cone_member`] with both routes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeMembership {
    /// `member` exactly when the certificate is exact.
    pub verdict: Verdict,
    pub certificate: ExactnessCertificate,
    /// Verdict of the S-cone test at the certified (or grid) minimizer.
    pub s_cone: Option<Verdict>,
    /// Whether both routes agree; `true` when one is undetermined.
    pub routes_agree: bool,
}

/// Decides `f ∈ F(g)ʳ` through the certificate pipeline and cross-checks the
/// union representation `F = ∪_x̂ S_x̂` at the relevant minimizer.
pub fn exactness_cone_member(pop: &Pop, f: &Polynomial, r: u32, tols: Tolerances) -> Result<ConeMembership> {
    cone_member_with(&Certifier::new(pop, r, tols)?, f)
}

/// [`exactness_cone_member`] over a prepared [`Certifier`].
pub fn cone_member_with(certifier: &Certifier<'_>, f: &Polynomial) -> Result<ConeMembership> {
    let cert = certifier.certify(f)?;
    let verdict = match cert.classification {
        Classification::Exact => Verdict::Member,
        Classification::ValueExactDualUnattained | Classification::NotExact => Verdict::NonMember,
        Classification::Undetermined => Verdict::Undetermined,
    };
    let point = match cert.classification {
        Classification::Exact | Classification::ValueExactDualUnattained => Some(cert.x_hat.clone()),
        Classification::NotExact => cert.oracle_point.clone(),
        Classification::Undetermined => None,
    };
    let s_cone = match point {
        Some(x) => {
            let f0 = f.shift(-f.evaluate(&x)?);
            Some(s_cone_member(certifier.pop(), certifier.order(), &x, &f0, *certifier.tolerances())?.verdict)
        }
        None => None,
    };
    let routes_agree = match s_cone {
        Some(Verdict::Undetermined) | None => true,
        Some(_) if verdict == Verdict::Undetermined => true,
        Some(s) => s == verdict,
    };
    Ok(ConeMembership { verdict, certificate: cert, s_cone, routes_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::{four_points, nonconvex, remark4};

    fn lin(c: &[f64]) -> Polynomial {
        Polynomial::linear(c).unwrap()
    }

    #[test]
    fn four_point_values_at_order_two() {
        let pop = four_points();
        let up = solve_relaxation(&pop, &lin(&[0.0, 1.0, 1.0]), 2).unwrap();
        assert!(up.value.abs() < 1e-7, "{}", up.value);
        assert!(up.candidate[0].abs() < 1e-4 && up.candidate[1].abs() < 1e-4);
        let down = solve_relaxation(&pop, &lin(&[0.0, -1.0, -1.0]), 2).unwrap();
        assert!((down.value + 4.0).abs() < 1e-7);
        assert!((down.candidate[0] - 2.0).abs() < 1e-4 && (down.candidate[1] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn remark4_value_is_zero() {
        let out = solve_relaxation(&remark4(), &lin(&[0.0, 1.0]), 1).unwrap();
        assert_eq!(out.solver_status, SolveStatus::Optimal);
        assert!(out.value.abs() < 1e-7 && out.candidate[0].abs() < 1e-6, "{out:?}");
    }

    #[test]
    fn certificate_classes_on_fixtures() {
        let t = Tolerances::default();
        let c = certify_exactness(&four_points(), &lin(&[0.0, 1.0, 1.0]), 2, t).unwrap();
        assert_eq!(c.classification, Classification::Exact, "{c:?}");
        assert!(c.witness.unwrap().coefficient_error(&four_points(), &lin(&[0.0, 1.0, 1.0])).unwrap() < 1e-5);
        let c = certify_exactness(&nonconvex(), &lin(&[0.0, -1.0, -1.0]), 1, t).unwrap();
        assert_eq!(c.classification, Classification::Exact, "{c:?}");
        let c = certify_exactness(&remark4(), &lin(&[0.0, 1.0]), 1, t).unwrap();
        assert_eq!(c.classification, Classification::ValueExactDualUnattained, "{c:?}");
    }

    #[test]
    fn tie_is_broken_on_four_points() {
        // f = x1 is minimized by (0,0) and (0,1)
        let c = certify_exactness(&four_points(), &lin(&[0.0, 1.0, 0.0]), 2, Tolerances::default()).unwrap();
        assert_eq!(c.classification, Classification::Exact, "{c:?}");
        assert!(c.x_hat[0].abs() < 1e-9);
    }

    #[test]
    fn s_cone_trivial_cases() {
        let pop = four_points();
        let t = Tolerances::default();
        let zero = s_cone_member(&pop, 1, &[2.0, 2.0], &Polynomial::zero(2), t).unwrap();
        assert_eq!(zero.verdict, Verdict::Member);
        let one = s_cone_member(&pop, 1, &[2.0, 2.0], &Polynomial::constant(2, 1.0), t).unwrap();
        assert_eq!(one.verdict, Verdict::NonMember);
        assert_eq!(one.status, None);
    }

    #[test]
    fn constants_are_in_every_exactness_cone() {
        let t = Tolerances::default();
        for pop in [four_points(), nonconvex()] {
            for r in 1..=2 {
                let c = exactness_cone_member(&pop, &Polynomial::constant(2, 3.5), r, t).unwrap();
                assert_eq!(c.verdict, Verdict::Member, "{:?} r={r}: {:?}", pop.name, c.certificate);
                assert!(c.routes_agree);
            }
        }
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(Tolerances::new(1e-6, 0.0, 1e-7).is_err());
        assert!(Tolerances::new(1e-6, 1e-6, f64::NAN).is_err());
    }

    #[test]
    fn classification_names_round_trip() {
        for c in [
            Classification::Exact,
            Classification::ValueExactDualUnattained,
            Classification::NotExact,
            Classification::Undetermined,
        ] {
            assert_eq!(Classification::parse(c.as_str()), Some(c));
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.as_str()));
        }
    }
}
