//! Scalar functions applied to real square matrices.
//!
//! Well-conditioned spectra go through the eigendecomposition
//! `Q·diag(f(ξ))·Q⁻¹`. Defective or nearly defective spectra go through a
//! Schur–Parlett recurrence: the complex Schur form is reordered so that
//! clustered eigenvalues are contiguous, diagonal blocks are evaluated by a
//! Taylor expansion about the cluster mean, and off-diagonal blocks solve
//! triangular Sylvester equations.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use super::scalar::{
    cauchy_derivative, cauchy_derivatives, ml_scalar, ml_scalar_deriv, ml_scalar_derivs, MAX_DERIVATIVE_ORDER,
};
use crate::error::{Error, Result};

type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Condition number of the eigenvector matrix above which the spectral
/// route is abandoned.
pub const DIAGONALIZABLE_CONDITION_LIMIT: f64 = 1e6;
/// Eigenvalues closer than this (after scaling) share a Schur–Parlett block.
pub const CLUSTER_RADIUS: f64 = 0.1;
const IMAG_RESIDUE_LIMIT: f64 = 1e-9;

/// A scalar function that can also report its derivatives.
pub trait ScalarFunction: Sync {
    fn value(&self, z: Complex64) -> Result<Complex64>;

    /// `order`-th derivative, `order ≥ 1`.
    fn derivative(&self, z: Complex64, order: usize) -> Result<Complex64>;

    fn max_order(&self) -> usize {
        MAX_DERIVATIVE_ORDER
    }

    /// `[f(z), f'(z), …, f^{(n)}(z)]`.
    fn derivatives(&self, z: Complex64, n: usize) -> Result<Vec<Complex64>> {
        if n > self.max_order() {
            return Err(Error::DerivativeUnavailable { requested: n, max: self.max_order() });
        }
        let mut out = vec![self.value(z)?];
        for k in 1..=n {
            out.push(self.derivative(z, k)?);
        }
        Ok(out)
    }
}

/// `exp(z)`.
#[derive(Debug, Clone, Copy)]
pub struct Exp;

impl ScalarFunction for Exp {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        Ok(z.exp())
    }

    fn derivative(&self, z: Complex64, _order: usize) -> Result<Complex64> {
        Ok(z.exp())
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }
}

/// `E_α(z)`.
#[derive(Debug, Clone, Copy)]
pub struct MittagLeffler {
    pub alpha: f64,
}

impl ScalarFunction for MittagLeffler {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        ml_scalar(self.alpha, z)
    }

    fn derivative(&self, z: Complex64, order: usize) -> Result<Complex64> {
        ml_scalar_deriv(self.alpha, z, order)
    }

    fn derivatives(&self, z: Complex64, n: usize) -> Result<Vec<Complex64>> {
        ml_scalar_derivs(self.alpha, z, n)
    }
}

/// Wraps `f(z, order)`; order 0 is the value.
pub struct FnWithDerivatives<F> {
    f: F,
    max_order: usize,
}

impl<F> FnWithDerivatives<F>
where
    F: Fn(Complex64, usize) -> Result<Complex64> + Sync,
{
    pub fn new(f: F, max_order: usize) -> Self {
        FnWithDerivatives { f, max_order }
    }
}

impl<F> ScalarFunction for FnWithDerivatives<F>
where
    F: Fn(Complex64, usize) -> Result<Complex64> + Sync,
{
    fn value(&self, z: Complex64) -> Result<Complex64> {
        (self.f)(z, 0)
    }

    fn derivative(&self, z: Complex64, order: usize) -> Result<Complex64> {
        if order > self.max_order {
            return Err(Error::DerivativeUnavailable { requested: order, max: self.max_order });
        }
        (self.f)(z, order)
    }

    fn max_order(&self) -> usize {
        self.max_order
    }
}

/// An entire function known only through its values; derivatives come from
/// Cauchy integrals on a circle of radius `max(1, |z|/2)`.
pub struct EntireFunction<F> {
    f: F,
}

impl<F> EntireFunction<F>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    pub fn new(f: F) -> Self {
        EntireFunction { f }
    }
}

impl<F> ScalarFunction for EntireFunction<F>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    fn value(&self, z: Complex64) -> Result<Complex64> {
        (self.f)(z)
    }

    fn derivative(&self, z: Complex64, order: usize) -> Result<Complex64> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeUnavailable { requested: order, max: MAX_DERIVATIVE_ORDER });
        }
        cauchy_derivative(&self.f, z, order, (0.5 * z.norm()).max(1.0))
    }

    fn derivatives(&self, z: Complex64, n: usize) -> Result<Vec<Complex64>> {
        if n > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeUnavailable { requested: n, max: MAX_DERIVATIVE_ORDER });
        }
        cauchy_derivatives(&self.f, z, n, (0.5 * z.norm()).max(1.0))
    }
}

/// Complex Schur form `A = U·T·Uᴴ` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub u: CMatrix,
    pub t: CMatrix,
}

/// Eigendecomposition `A = Q·diag(ξ)·Q⁻¹` (meaningful when `diagonalizable`).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<Complex64>,
    pub right_vectors: CMatrix,
    pub left_vectors: CMatrix,
    pub diagonalizable: bool,
    pub condition_estimate: f64,
}

/// How a matrix function was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Nilpotent,
    Spectral,
    SchurParlett,
}

#[derive(Debug, Clone)]
pub struct MatrixFunctionResult {
    pub value: DMatrix<f64>,
    pub route: Route,
    /// Largest discarded imaginary part, relative to `‖f(A)‖`.
    pub imag_residue: f64,
}

fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

fn is_upper_triangular(a: &DMatrix<f64>) -> bool {
    (0..a.ncols()).all(|j| ((j + 1)..a.nrows()).all(|i| a[(i, j)] == 0.0))
}

/// Complex Schur decomposition. Upper-triangular input is returned as is,
/// which keeps structural zeros of generator matrices exact.
pub fn complex_schur(a: &DMatrix<f64>) -> Result<SchurForm> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    if is_upper_triangular(a) {
        return Ok(SchurForm { u: CMatrix::identity(n, n), t: to_complex(a) });
    }
    let schur = Schur::try_new(to_complex(a), f64::EPSILON, 10_000).ok_or(Error::EigenNonConvergence)?;
    let (u, mut t) = schur.unpack();
    let below: f64 = (0..n).flat_map(|j| ((j + 1)..n).map(move |i| (i, j))).map(|ij| t[ij].norm()).fold(0.0, f64::max);
    if below > 1e-12 * frobenius(&t).max(f64::MIN_POSITIVE) {
        return Err(Error::EigenNonConvergence);
    }
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = ZERO;
        }
    }
    Ok(SchurForm { u, t })
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Right eigenvectors of an upper-triangular matrix by back-substitution.
fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let smin = (f64::EPSILON * frobenius(t)).max(f64::MIN_POSITIVE);
    let mut v = CMatrix::zeros(n, n);
    for j in 0..n {
        let lambda = t[(j, j)];
        v[(j, j)] = ONE;
        for i in (0..j).rev() {
            let mut num = ZERO;
            for k in (i + 1)..=j {
                num += t[(i, k)] * v[(k, j)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < smin {
                if num.norm() < smin {
                    v[(i, j)] = ZERO;
                    continue;
                }
                den = Complex64::new(smin, 0.0);
            }
            v[(i, j)] = -num / den;
        }
        let norm = v.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..=j {
            v[(i, j)] /= norm;
        }
    }
    v
}

fn spectral_from_schur(a: &DMatrix<f64>, schur: &SchurForm) -> SpectralDecomposition {
    let n = a.nrows();
    let eigenvalues = DVector::from_iterator(n, (0..n).map(|i| schur.t[(i, i)]));
    let q = &schur.u * triangular_eigenvectors(&schur.t);
    let (left, cond) = match q.clone().try_inverse() {
        Some(inv) => {
            let cond = frobenius(&q) * frobenius(&inv);
            (inv, if cond.is_finite() { cond } else { f64::INFINITY })
        }
        None => (CMatrix::zeros(n, n), f64::INFINITY),
    };
    let mut diagonalizable = cond <= DIAGONALIZABLE_CONDITION_LIMIT;
    if diagonalizable {
        let recon = &q * CMatrix::from_diagonal(&eigenvalues) * &left - to_complex(a);
        let scale = a.norm().max(f64::MIN_POSITIVE);
        diagonalizable = frobenius(&recon) <= 1e-10 * scale || a.norm() == 0.0;
    }
    SpectralDecomposition {
        eigenvalues,
        right_vectors: q,
        left_vectors: left,
        diagonalizable,
        condition_estimate: cond,
    }
}

/// Precomputed decompositions of one matrix, reusable for `f(c·A)` with any
/// scalar `c > 0`.
#[derive(Debug, Clone)]
pub struct MatrixFunctionPlan {
    a: DMatrix<f64>,
    schur: SchurForm,
    spectral: SpectralDecomposition,
}

impl MatrixFunctionPlan {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let schur = complex_schur(a)?;
        let spectral = spectral_from_schur(a, &schur);
        Ok(MatrixFunctionPlan { a: a.clone(), schur, spectral })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn schur(&self) -> &SchurForm {
        &self.schur
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn eigenvalues(&self) -> &DVector<Complex64> {
        &self.spectral.eigenvalues
    }

    /// `f(scale·A)`, choosing the spectral route when it is well conditioned.
    pub fn apply(&self, f: &dyn ScalarFunction, scale: f64) -> Result<MatrixFunctionResult> {
        if self.spectral.diagonalizable {
            self.apply_spectral(f, scale)
        } else {
            self.apply_schur_parlett(f, scale)
        }
    }

    pub fn apply_spectral(&self, f: &dyn ScalarFunction, scale: f64) -> Result<MatrixFunctionResult> {
        let sd = &self.spectral;
        let n = self.a.nrows();
        let mut fq = sd.right_vectors.clone();
        for j in 0..n {
            let fj = f.value(sd.eigenvalues[j] * scale)?;
            for i in 0..n {
                fq[(i, j)] *= fj;
            }
        }
        realify(fq * &sd.left_vectors, Route::Spectral)
    }

    pub fn apply_schur_parlett(&self, f: &dyn ScalarFunction, scale: f64) -> Result<MatrixFunctionResult> {
        let mut u = self.schur.u.clone();
        let mut t = &self.schur.t * Complex64::new(scale, 0.0);
        let blocks = cluster_and_reorder(&mut t, &mut u);
        let ft = parlett(f, &t, &blocks)?;
        realify(&u * ft * u.adjoint(), Route::SchurParlett)
    }
}

fn realify(m: CMatrix, route: Route) -> Result<MatrixFunctionResult> {
    let norm = m.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("matrix function produced non-finite entries".into()));
    }
    let residue = if norm > 0.0 { imag / norm } else { imag };
    if residue > IMAG_RESIDUE_LIMIT {
        return Err(Error::ComplexResult { residue });
    }
    Ok(MatrixFunctionResult { value: m.map(|z| z.re), route, imag_residue: residue })
}

/// `f(A)` for a real square matrix.
pub fn apply_scalar_function(f: &dyn ScalarFunction, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    MatrixFunctionPlan::new(a)?.apply(f, 1.0).map(|r| r.value)
}

/// Returns `(cs, sn)` with `[cs sn; −conj(sn) cs]·[f; g] = [r; 0]`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let fa = f.norm();
    let norm = fa.hypot(g.norm());
    (fa / norm, (f / fa) * g.conj() / norm)
}

// Applies the rotation to the pair (x, y): x ← c·x + s·y, y ← c·y − conj(s)·x.
fn rotate(x: &mut Complex64, y: &mut Complex64, c: f64, s: Complex64) {
    let tx = *x * c + s * *y;
    *y = *y * c - s.conj() * *x;
    *x = tx;
}

/// Swaps diagonal entries `k` and `k+1` of the triangular `t`, updating `u`.
fn swap_adjacent(t: &mut CMatrix, u: &mut CMatrix, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    for j in (k + 2)..n {
        let (mut x, mut y) = (t[(k, j)], t[(k + 1, j)]);
        rotate(&mut x, &mut y, c, s);
        t[(k, j)] = x;
        t[(k + 1, j)] = y;
    }
    for i in 0..k {
        let (mut x, mut y) = (t[(i, k)], t[(i, k + 1)]);
        rotate(&mut x, &mut y, c, s.conj());
        t[(i, k)] = x;
        t[(i, k + 1)] = y;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (mut x, mut y) = (u[(i, k)], u[(i, k + 1)]);
        rotate(&mut x, &mut y, c, s.conj());
        u[(i, k)] = x;
        u[(i, k + 1)] = y;
    }
}

/// Groups eigenvalues into clusters (chains of neighbours within
/// [`CLUSTER_RADIUS`]), reorders the Schur form so each cluster is a
/// contiguous block, and returns the block ranges.
fn cluster_and_reorder(t: &mut CMatrix, u: &mut CMatrix) -> Vec<std::ops::Range<usize>> {
    let n = t.nrows();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (t[(i, i)] - t[(j, j)]).norm() <= CLUSTER_RADIUS {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // Cluster rank by first appearance; bubble diagonal entries into rank order.
    let roots: Vec<usize> = (0..n).map(|i| find(&mut label, i)).collect();
    let mut order: Vec<usize> = Vec::new();
    for &r in &roots {
        if !order.contains(&r) {
            order.push(r);
        }
    }
    let mut rank: Vec<usize> = roots.iter().map(|r| order.iter().position(|o| o == r).unwrap()).collect();
    for pass in 0..n {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1 + pass) {
            if rank[k] > rank[k + 1] {
                swap_adjacent(t, u, k);
                rank.swap(k, k + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || rank[k] != rank[start] {
            blocks.push(start..k);
            start = k;
        }
    }
    blocks
}

fn parlett(f: &dyn ScalarFunction, t: &CMatrix, blocks: &[std::ops::Range<usize>]) -> Result<CMatrix> {
    let n = t.nrows();
    let mut ft = CMatrix::zeros(n, n);
    for b in blocks {
        let fb = diagonal_block(f, &t.view((b.start, b.start), (b.len(), b.len())).into_owned())?;
        ft.view_mut((b.start, b.start), (b.len(), b.len())).copy_from(&fb);
    }
    for (jb, bj) in blocks.iter().enumerate() {
        for ib in (0..jb).rev() {
            let bi = &blocks[ib];
            let tij = t.view((bi.start, bj.start), (bi.len(), bj.len()));
            let fii = ft.view((bi.start, bi.start), (bi.len(), bi.len())).into_owned();
            let fjj = ft.view((bj.start, bj.start), (bj.len(), bj.len())).into_owned();
            let mut rhs = &fii * tij - tij * &fjj;
            for bk in &blocks[(ib + 1)..jb] {
                let fik = ft.view((bi.start, bk.start), (bi.len(), bk.len()));
                let tkj = t.view((bk.start, bj.start), (bk.len(), bj.len()));
                let tik = t.view((bi.start, bk.start), (bi.len(), bk.len()));
                let fkj = ft.view((bk.start, bj.start), (bk.len(), bj.len()));
                rhs += fik * tkj - tik * fkj;
            }
            let tii = t.view((bi.start, bi.start), (bi.len(), bi.len())).into_owned();
            let tjj = t.view((bj.start, bj.start), (bj.len(), bj.len())).into_owned();
            let x = solve_triangular_sylvester(&tii, &tjj, &rhs)?;
            ft.view_mut((bi.start, bj.start), (bi.len(), bj.len())).copy_from(&x);
        }
    }
    Ok(ft)
}

/// Taylor expansion of `f` about the mean eigenvalue of a clustered block.
fn diagonal_block(f: &dyn ScalarFunction, tb: &CMatrix) -> Result<CMatrix> {
    let m = tb.nrows();
    if m == 1 {
        return Ok(CMatrix::from_element(1, 1, f.value(tb[(0, 0)])?));
    }
    let max_order = f.max_order().min(MAX_DERIVATIVE_ORDER);
    if m > max_order + 1 {
        return Err(Error::ClusterTooLarge { size: m, max: max_order });
    }
    let sigma = (0..m).map(|i| tb[(i, i)]).sum::<Complex64>() / m as f64;
    let shifted = tb - CMatrix::identity(m, m) * sigma;
    let derivs = f.derivatives(sigma, max_order)?;
    let mut result = CMatrix::identity(m, m) * derivs[0];
    let mut power = CMatrix::identity(m, m);
    let mut fact = 1.0;
    let mut tail = 0.0;
    for (k, d) in derivs.iter().enumerate().skip(1) {
        power = &power * &shifted;
        fact *= k as f64;
        let term = &power * (*d / fact);
        if k + 2 > max_order {
            tail += frobenius(&term);
        }
        result += term;
    }
    if tail > 1e-10 * frobenius(&result).max(f64::MIN_POSITIVE) {
        return Err(Error::ClusterTooLarge { size: m, max: max_order });
    }
    Ok(result)
}

/// Solves `A·X − X·B = C` for upper-triangular `A`, `B` with disjoint spectra.
fn solve_triangular_sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let (m, n) = c.shape();
    let mut x = CMatrix::zeros(m, n);
    for col in 0..n {
        let mut r: Vec<Complex64> = (0..m).map(|i| c[(i, col)]).collect();
        for l in 0..col {
            for i in 0..m {
                r[i] += x[(i, l)] * b[(l, col)];
            }
        }
        let mu = b[(col, col)];
        for i in (0..m).rev() {
            let mut s = r[i];
            for k in (i + 1)..m {
                s -= a[(i, k)] * x[(k, col)];
            }
            let d = a[(i, i)] - mu;
            if d.norm() == 0.0 {
                return Err(Error::Singular("Sylvester blocks share an eigenvalue".into()));
            }
            x[(i, col)] = s / d;
        }
    }
    Ok(x)
}
