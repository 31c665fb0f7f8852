//! Graded-lexicographic monomial bases and coordinate vectors of polynomials.
//!
//! Layout convention (part of every matrix and file format in this crate):
//! monomials are ordered by total degree, and within one degree
//! lexicographically with the first variable most significant. For `d = 2,
//! n = 2` the order is `1, x, y, x², xy, y²`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Exponent tuple of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Exponent-wise sum, i.e. the index of the product monomial.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^self`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // Larger leading exponent comes first within a degree.
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

/// Parses an exponent key such as `"[1,0]"` (brackets optional).
pub fn parse_exponent_key(key: &str) -> Result<MultiIndex> {
    let inner = key.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Err(Error::InvalidParameter(format!("empty exponent tuple `{key}`")));
    }
    inner
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidParameter(format!("bad exponent `{}` in `{key}`", s.trim())))
        })
        .collect::<Result<Vec<_>>>()
        .map(MultiIndex)
}

/// All monomials of degree at most `degree` in `dim` variables.
#[derive(Debug)]
pub struct Basis {
    dim: usize,
    degree: usize,
    ordering: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.degree == other.degree
    }
}

/// Builds the graded-lex basis of polynomials of degree `≤ n` in `d` variables.
pub fn build_basis(d: usize, n: usize) -> Result<Arc<Basis>> {
    if d == 0 {
        return Err(Error::InvalidParameter("basis dimension must be positive".into()));
    }
    let mut ordering = Vec::new();
    for deg in 0..=n {
        let mut current = vec![0u32; d];
        push_compositions(deg as u32, 0, &mut current, &mut ordering);
    }
    let lookup = ordering.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
    Ok(Arc::new(Basis { dim: d, degree: n, ordering, lookup }))
}

// Emits exponent tuples of total `remaining` over positions `pos..`, leading
// exponent descending, which is exactly graded-lex order within one degree.
fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let d = current.len();
    if pos == d - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_compositions(remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.ordering.len()
    }

    pub fn ordering(&self) -> &[MultiIndex] {
        &self.ordering
    }

    pub fn monomial(&self, i: usize) -> &MultiIndex {
        &self.ordering[i]
    }

    pub fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }

    /// The vector `H(x)` of all basis monomials evaluated at `x`.
    pub fn monomials_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(DVector::from_iterator(self.size(), self.ordering.iter().map(|m| m.eval(x))))
    }
}

/// Coordinates of a polynomial in a fixed basis.
#[derive(Debug, Clone)]
pub struct PolyVec {
    basis: Arc<Basis>,
    coeffs: DVector<f64>,
}

impl PolyVec {
    pub fn new(basis: Arc<Basis>, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != basis.size() {
            return Err(Error::DimensionMismatch { expected: basis.size(), got: coeffs.len() });
        }
        Ok(PolyVec { basis, coeffs })
    }

    pub fn zeros(basis: Arc<Basis>) -> Self {
        let n = basis.size();
        PolyVec { basis, coeffs: DVector::zeros(n) }
    }

    pub fn constant(basis: Arc<Basis>, c: f64) -> Self {
        let mut p = Self::zeros(basis);
        p.coeffs[0] = c;
        p
    }

    /// Single monomial `x^exponents` with unit coefficient.
    pub fn monomial(basis: Arc<Basis>, exponents: &[u32]) -> Result<Self> {
        Self::from_terms(basis, [(exponents.to_vec(), 1.0)])
    }

    /// Sums `coef · x^exponents`; repeated exponents accumulate.
    pub fn from_terms<I>(basis: Arc<Basis>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zeros(basis);
        for (exps, c) in terms {
            let m = MultiIndex(exps);
            if m.dim() != p.basis.dim() {
                return Err(Error::DimensionMismatch { expected: p.basis.dim(), got: m.dim() });
            }
            let i = p.basis.index_of(&m).ok_or(Error::DegreeOverflow { degree: m.degree(), max: p.basis.degree() })?;
            p.coeffs[i] += c;
        }
        Ok(p)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Largest degree carrying a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, _)| self.basis.monomial(i).degree())
            .max()
            .unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.basis.monomials_at(x)?.dot(&self.coeffs))
    }

    /// Re-expresses `self` in `target` by multi-index lookup.
    pub fn embed(&self, target: &Arc<Basis>) -> Result<PolyVec> {
        if target.dim() != self.basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "cannot embed dimension {} into dimension {}",
                self.basis.dim(),
                target.dim()
            )));
        }
        let mut out = PolyVec::zeros(target.clone());
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let m = self.basis.monomial(i);
            let j = target.index_of(m).ok_or(Error::DegreeOverflow { degree: m.degree(), max: target.degree() })?;
            out.coeffs[j] = c;
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> PolyVec {
        PolyVec { basis: self.basis.clone(), coeffs: &self.coeffs * a }
    }

    /// `a·self + b·other` over a shared basis.
    pub fn lin_comb(&self, a: f64, other: &PolyVec, b: f64) -> Result<PolyVec> {
        self.check_same_basis(other)?;
        Ok(PolyVec { basis: self.basis.clone(), coeffs: &self.coeffs * a + &other.coeffs * b })
    }

    fn check_same_basis(&self, other: &PolyVec) -> Result<()> {
        if *self.basis != *other.basis {
            return Err(Error::BasisMismatch(format!(
                "(d={}, n={}) vs (d={}, n={})",
                self.basis.dim(),
                self.basis.degree(),
                other.basis.dim(),
                other.basis.degree()
            )));
        }
        Ok(())
    }
}

/// Coordinates of `p·q` in the degree-`2n` basis of the same dimension.
pub fn product_vec(p: &PolyVec, q: &PolyVec) -> Result<PolyVec> {
    p.check_same_basis(q)?;
    let target = build_basis(p.basis.dim(), 2 * p.basis.degree())?;
    product_into(p, q, &target)
}

/// Coordinates of `p·q` in an arbitrary basis large enough to hold it.
pub fn product_into(p: &PolyVec, q: &PolyVec, target: &Arc<Basis>) -> Result<PolyVec> {
    if p.basis.dim() != q.basis.dim() || p.basis.dim() != target.dim() {
        return Err(Error::BasisMismatch("product of different dimensions".into()));
    }
    let mut out = PolyVec::zeros(target.clone());
    for (i, &a) in p.coeffs.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in q.coeffs.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let m = p.basis.monomial(i).add(q.basis.monomial(j));
            let k = target.index_of(&m).ok_or(Error::DegreeOverflow { degree: m.degree(), max: target.degree() })?;
            out.coeffs[k] += a * b;
        }
    }
    Ok(out)
}

/// Sparse polynomial used to apply differential operators to monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::term(MultiIndex::zero(dim), c)
    }

    pub fn term(m: MultiIndex, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// `c · x_var` in `dim` variables.
    pub fn variable(dim: usize, var: usize, c: f64) -> Self {
        let mut e = vec![0; dim];
        e[var] = 1;
        Self::term(MultiIndex(e), c)
    }

    /// Univariate `Σ coeffs[k] x^k`.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let mut p = Self::zero();
        for (k, &c) in coeffs.iter().enumerate() {
            p.add_term(MultiIndex(vec![k as u32]), c);
        }
        p
    }

    pub fn add_term(&mut self, m: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(m).or_insert(0.0);
        *e += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, &c1) in &self.terms {
            for (m2, &c2) in &other.terms {
                out.add_term(m1.add(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32, dim: usize) -> Polynomial {
        let mut out = Polynomial::constant(dim, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut n = m.0.clone();
            n[var] -= 1;
            out.add_term(MultiIndex(n), c * e as f64);
        }
        out
    }

    pub fn to_polyvec(&self, basis: &Arc<Basis>) -> Result<PolyVec> {
        PolyVec::from_terms(basis.clone(), self.terms.iter().map(|(m, &c)| (m.0.clone(), c)))
    }
}
