//! Sparse multivariate polynomials over `f64` with graded lexicographic
//! monomial order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x^α`.
///
/// Ordering is graded lexicographic: total degree first, then the monomial
/// with the larger exponent on the earlier variable comes first, so the
/// degree-two monomials in two variables are ordered `x1², x1x2, x2²`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn one(n: usize) -> Self {
        Self { exps: vec![0; n] }
    }

    /// The monomial `x_k` (zero-based `k`).
    pub fn var(n: usize, k: usize) -> Self {
        let mut exps = vec![0; n];
        exps[k] = 1;
        Self { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (k, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "x{}", k + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables of total degree at most `d`, in graded
/// lexicographic order. The length is `C(n + d, n)`.
pub fn monomial_basis(n: usize, d: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for k in 0..=d {
        let mut cur = vec![0u32; n];
        push_degree(n, k, 0, &mut cur, &mut out);
    }
    out
}

fn push_degree(n: usize, remaining: u32, pos: usize, cur: &mut [u32], out: &mut Vec<Monomial>) {
    if n == 0 {
        if remaining == 0 {
            out.push(Monomial::new(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = remaining;
        out.push(Monomial::new(cur.to_vec()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_degree(n, remaining - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Binomial coefficient `C(n + d, n)`, the dimension of `ℝ[x]_d`.
pub fn basis_len(n: usize, d: u32) -> usize {
    let d = d as usize;
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 1..=n.min(d) {
        num *= (n + d + 1 - k) as u128;
        den *= k as u128;
    }
    (num / den) as usize
}

/// A point of `ℝ^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("point coordinates must be finite".into()));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Sparse polynomial in `n` variables. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    /// The variable `x_k` (zero-based `k`).
    pub fn var(n: usize, k: usize) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Monomial::var(n, k), 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// exponent vectors are summed.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(n);
        for (exps, c) in terms {
            if exps.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: exps.len() });
            }
            if !c.is_finite() {
                return Err(Error::Invalid("polynomial coefficients must be finite".into()));
            }
            p.add_term(Monomial::new(exps), c);
        }
        Ok(p)
    }

    /// Affine polynomial `c[0] + c[1] x1 + ... + c[n] xn`.
    pub fn linear(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Invalid("linear form needs at least a constant term".into()));
        }
        let n = coeffs.len() - 1;
        let basis = monomial_basis(n, 1);
        Self::from_terms(n, basis.into_iter().zip(coeffs.iter().copied()).map(|(m, c)| (m.exps, c)))
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree over stored terms; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        use std::collections::btree_map::Entry;
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = Polynomial::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), a * c);
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    /// `self + a` for a real constant `a`.
    pub fn shift(&self, a: f64) -> Polynomial {
        let mut out = self.clone();
        out.add_term(Monomial::one(self.n), a);
        out
    }

    /// Gradient at `x`, one partial derivative per variable.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (m, c) in &self.terms {
            for k in 0..self.n {
                let e = m.exps[k];
                if e == 0 {
                    continue;
                }
                let mut v = c * e as f64;
                for (j, (&ej, &xj)) in m.exps.iter().zip(x).enumerate() {
                    let p = if j == k { ej - 1 } else { ej };
                    v *= xj.powi(p as i32);
                }
                g[k] += v;
            }
        }
        g
    }

    /// Coefficient vector over `basis`; terms outside the basis are ignored.
    pub fn coefficients_in(&self, basis: &[Monomial]) -> Vec<f64> {
        basis.iter().map(|m| self.coeff(m)).collect()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            if m.is_one() {
                write!(f, "{}", c.abs())?;
            } else {
                write!(f, "{}*{}", c.abs(), m)?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exp: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermRepr { exp: m.exps.clone(), coef: c })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PolyRepr::deserialize(d)?;
        Polynomial::from_terms(repr.n, repr.terms.into_iter().map(|t| (t.exp, t.coef)))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(n, terms.iter().map(|(e, c)| (e.to_vec(), *c))).unwrap()
    }

    #[test]
    fn basis_two_vars_degree_two() {
        let b = monomial_basis(2, 2);
        let exps: Vec<_> = b.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(
            exps,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn basis_degree_zero_and_univariate() {
        assert_eq!(monomial_basis(3, 0), vec![Monomial::one(3)]);
        let b = monomial_basis(1, 4);
        assert_eq!(b.len(), 5);
        for (k, m) in b.iter().enumerate() {
            assert_eq!(m.exponents(), &[k as u32]);
        }
    }

    #[test]
    fn basis_is_graded_lex_increasing() {
        for n in 1..=4 {
            for d in 0..=8 {
                let b = monomial_basis(n, d);
                assert_eq!(b.len(), basis_len(n, d), "n={n} d={d}");
                assert!(b.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn evaluate_four_point_generator() {
        let g1 = poly(2, &[(&[0, 1], 2.0), (&[0, 2], -2.0), (&[1, 1], 1.0)]);
        assert_eq!(g1.evaluate(&[2.0, 2.0]).unwrap(), 0.0);
        let f = Polynomial::linear(&[1.0, -3.0, 0.5]).unwrap();
        assert_eq!(f.evaluate(&[2.0, 2.0]).unwrap(), 1.0 - 6.0 + 1.0);
        assert_eq!(Polynomial::zero(2).evaluate(&[3.0, -1.0]).unwrap(), 0.0);
        assert!(matches!(g1.evaluate(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn multiply_binomial() {
        let s = poly(2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        let sq = s.multiply(&s).unwrap();
        assert_eq!(sq, poly(2, &[(&[2, 0], 1.0), (&[1, 1], 2.0), (&[0, 2], 1.0)]));
        assert_eq!(sq.degree(), 2);
        assert_eq!(s.multiply(&Polynomial::constant(2, 1.0)).unwrap(), s);
        assert!(s.multiply(&Polynomial::zero(2)).unwrap().is_zero());
        assert!(s.multiply(&Polynomial::zero(3)).is_err());
    }

    #[test]
    fn add_scaled_cases() {
        let p = poly(2, &[(&[1, 0], 1.5), (&[0, 0], -2.0)]);
        assert!(p.add_scaled(1.0, &p.scale(-1.0)).unwrap().is_zero());
        let shifted = p.add_scaled(-0.25, &Polynomial::constant(2, 1.0)).unwrap();
        assert_eq!(shifted.coeff(&Monomial::one(2)), -2.25);
        let z = Polynomial::zero(2).add_scaled(2.0, &Polynomial::var(2, 0)).unwrap();
        assert_eq!(z, poly(2, &[(&[1, 0], 2.0)]));
    }

    #[test]
    fn zero_has_degree_zero() {
        assert_eq!(Polynomial::zero(3).degree(), 0);
        assert_eq!(Polynomial::constant(3, 0.0), Polynomial::zero(3));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = poly(2, &[(&[2, 1], 3.0), (&[0, 3], -1.0), (&[1, 0], 0.5)]);
        let x = [0.7, -1.3];
        let g = p.gradient(&x);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.eval_unchecked(&xp) - p.eval_unchecked(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn json_sums_duplicates() {
        let p: Polynomial = serde_json::from_str(
            r#"{"n":2,"terms":[{"exp":[1,0],"coef":1.0},{"exp":[1,0],"coef":2.0},{"exp":[0,1],"coef":-1.0},{"exp":[0,1],"coef":1.0}]}"#,
        )
        .unwrap();
        assert_eq!(p, poly(2, &[(&[1, 0], 3.0)]));
        let back: Polynomial = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Polynomial>(r#"{"n":2,"terms":[{"exp":[1],"coef":1.0}]}"#).is_err());
    }
}
