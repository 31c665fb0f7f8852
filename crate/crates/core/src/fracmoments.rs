//! Moments of time-changed polynomial processes.
//!
//! For a polynomial `p` with coordinates `p⃗` and generator matrix `A`:
//! classical moments are `H(x)ᵀ·e^{tA}·p⃗`, moments under an inverse
//! `α`-stable clock are `H(x)ᵀ·E_α(t^α A)·p⃗`, and moments under a general
//! inverse subordinator with Laplace exponent `f` are recovered from the
//! transform `λ ↦ f(λ)/λ · (f(λ)I − A)⁻¹·p⃗` by Talbot inversion.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::mittag::{gamma_fn, ml_matrix};
use crate::models::{generator_matrix, stability_index, GeneratorMatrix, ModelSpec};
use crate::polybasis::PolyVec;

/// Laplace exponent of a driftless-or-drifted subordinator without killing.
pub trait Bernstein: Send + Sync {
    /// `f(λ)` for `Re λ > 0`.
    fn exponent(&self, lambda: Complex64) -> Complex64;

    fn drift(&self) -> f64 {
        0.0
    }

    /// Tail of the Lévy measure, `ν̄(s) = ν((s, ∞))`.
    fn tail(&self, s: f64) -> f64;

    fn exponent_real(&self, lambda: f64) -> f64 {
        self.exponent(Complex64::new(lambda, 0.0)).re
    }
}

/// `f(λ) = λ^α`.
#[derive(Debug, Clone, Copy)]
pub struct StablePower {
    pub alpha: f64,
}

impl Bernstein for StablePower {
    fn exponent(&self, lambda: Complex64) -> Complex64 {
        lambda.powf(self.alpha)
    }

    fn tail(&self, s: f64) -> f64 {
        s.powf(-self.alpha) / gamma_fn(1.0 - self.alpha)
    }
}

/// `f(λ) = bλ`: the deterministic clock `L_t = t/b`.
#[derive(Debug, Clone, Copy)]
pub struct PureDrift {
    pub b: f64,
}

impl Bernstein for PureDrift {
    fn exponent(&self, lambda: Complex64) -> Complex64 {
        lambda * self.b
    }

    fn drift(&self) -> f64 {
        self.b
    }

    fn tail(&self, _s: f64) -> f64 {
        0.0
    }
}

/// `f(λ) = (λ + μ)^α − μ^α`.
#[derive(Debug, Clone, Copy)]
pub struct TemperedStable {
    pub alpha: f64,
    pub mu: f64,
}

impl Bernstein for TemperedStable {
    fn exponent(&self, lambda: Complex64) -> Complex64 {
        (lambda + self.mu).powf(self.alpha) - self.mu.powf(self.alpha)
    }

    fn tail(&self, s: f64) -> f64 {
        let a = self.alpha;
        let x = self.mu * s;
        let upper = if x > 0.0 { gamma_ur(1.0 - a, x) } else { 1.0 };
        s.powf(-a) * (-x).exp() / gamma_fn(1.0 - a) - self.mu.powf(a) * upper
    }
}

type ExponentFn = dyn Fn(Complex64) -> Complex64 + Send + Sync;
type TailFn = dyn Fn(f64) -> f64 + Send + Sync;

/// User-supplied Bernstein function.
#[derive(Clone)]
pub struct ClosureBernstein {
    pub exponent: Arc<ExponentFn>,
    pub tail: Arc<TailFn>,
    pub drift: f64,
}

impl Bernstein for ClosureBernstein {
    fn exponent(&self, lambda: Complex64) -> Complex64 {
        (self.exponent)(lambda)
    }

    fn drift(&self) -> f64 {
        self.drift
    }

    fn tail(&self, s: f64) -> f64 {
        (self.tail)(s)
    }
}

/// The random clock of a time change.
#[derive(Clone)]
pub enum SubordinatorSpec {
    StableAlpha(f64),
    GeneralBernstein(Arc<dyn Bernstein>),
}

impl SubordinatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SubordinatorSpec::StableAlpha(a) if !(*a > 0.0 && *a < 1.0) => {
                Err(Error::InvalidParameter(format!("stable index must lie in (0, 1), got {a}")))
            }
            _ => Ok(()),
        }
    }
}

/// Talbot inversion output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedMoment {
    pub value: f64,
    /// Difference between the two finest node counts.
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Moment computations sharing one generator matrix.
#[derive(Debug, Clone)]
pub struct MomentSolver {
    g: GeneratorMatrix,
}

impl MomentSolver {
    pub fn new(model: &ModelSpec, degree: usize) -> Result<Self> {
        Ok(MomentSolver { g: generator_matrix(model, degree.max(1))? })
    }

    pub fn from_generator(g: GeneratorMatrix) -> Self {
        MomentSolver { g }
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.g
    }

    fn coords(&self, p: &PolyVec) -> Result<DVector<f64>> {
        Ok(p.embed(self.g.basis())?.coeffs().clone())
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        let d = self.g.basis().dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if let Some(m) = self.g.model() {
            if !m.in_domain(x) {
                warn!(
                    "state {x:?} lies outside the {} state space; evaluating the polynomial identity anyway",
                    m.name()
                );
            }
        }
        Ok(())
    }

    fn pair(&self, x: &[f64], q: &DVector<f64>) -> Result<f64> {
        Ok(self.g.basis().monomials_at(x)?.dot(q))
    }

    /// `e^{tA}·p⃗`.
    pub fn classical_vector(&self, p: &PolyVec, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        let c = self.coords(p)?;
        if t == 0.0 {
            return Ok(c);
        }
        Ok((self.g.matrix() * t).exp() * c)
    }

    /// `E_α(t^α A)·p⃗`.
    pub fn fractional_vector(&self, p: &PolyVec, t: f64, alpha: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        let c = self.coords(p)?;
        if t == 0.0 {
            return Ok(c);
        }
        Ok(ml_matrix(alpha, t, &self.g)? * c)
    }

    pub fn classical(&self, p: &PolyVec, x: &[f64], t: f64) -> Result<f64> {
        self.check_state(x)?;
        self.pair(x, &self.classical_vector(p, t)?)
    }

    pub fn fractional(&self, p: &PolyVec, x: &[f64], t: f64, alpha: f64) -> Result<f64> {
        self.check_state(x)?;
        self.pair(x, &self.fractional_vector(p, t, alpha)?)
    }

    /// Talbot inversion of `f(λ)/λ · (f(λ)I − A)⁻¹·p⃗` at the two node
    /// counts of [`TALBOT_NODES`], finest last.
    pub fn general_f_vectors(&self, p: &PolyVec, t: f64, f: &dyn Bernstein) -> Result<[DVector<f64>; 2]> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("general-f moments need t > 0, got {t}")));
        }
        let c = self.coords(p)?;
        let shift = contour_abscissa(&self.g, f)? + 0.5;
        let a = self.g.matrix().map(|v| Complex64::new(v, 0.0));
        let pc = c.map(|v| Complex64::new(v, 0.0));
        let n = c.len();
        let transform = |lambda: Complex64| -> Result<DVector<Complex64>> {
            let fl = f.exponent(lambda);
            let m = DMatrix::<Complex64>::identity(n, n) * fl - &a;
            let sol = m
                .lu()
                .solve(&pc)
                .filter(|s| s.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
                .ok_or(Error::SingularResolvent { re: lambda.re, im: lambda.im })?;
            Ok(sol * (fl / lambda))
        };
        Ok([talbot(&transform, t, shift, TALBOT_NODES[0])?, talbot(&transform, t, shift, TALBOT_NODES[1])?])
    }

    pub fn general_f(&self, p: &PolyVec, x: &[f64], t: f64, f: &dyn Bernstein) -> Result<InvertedMoment> {
        self.check_state(x)?;
        let h = self.g.basis().monomials_at(x)?;
        let [coarse, fine] = self.general_f_vectors(p, t, f)?;
        let value = h.dot(&fine);
        Ok(InvertedMoment { value, error_estimate: (value - h.dot(&coarse)).abs(), nodes: TALBOT_NODES[1] })
    }
}

// Fixed-Talbot node counts: the estimate compares the two.
pub const TALBOT_NODES: [usize; 2] = [20, 28];

/// Fixed Talbot contour `λ(θ) = σ + rθ(cot θ + i)`, `r = 2M/(5t)`.
fn talbot<F>(transform: &F, t: f64, shift: f64, m: usize) -> Result<DVector<f64>>
where
    F: Fn(Complex64) -> Result<DVector<Complex64>>,
{
    let r = 2.0 * m as f64 / (5.0 * t);
    let l0 = Complex64::new(shift + r, 0.0);
    let mut acc = (transform(l0)? * (l0 * t).exp()).map(|z| 0.5 * z.re);
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let cot = 1.0 / theta.tan();
        let lambda = Complex64::new(shift + r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let weight = (lambda * t).exp() * Complex64::new(1.0, sigma);
        acc += transform(lambda)?.map(|z| (z * weight).re);
    }
    Ok(acc * (r / m as f64))
}

/// `c = f⁻¹(max(π(A), 0))`: the transform is analytic for `Re λ > c`.
pub fn contour_abscissa(g: &GeneratorMatrix, f: &dyn Bernstein) -> Result<f64> {
    let target = stability_index(g)?.max(0.0);
    if target == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1e6);
    if !(f.exponent_real(hi) > target) {
        return Err(Error::ContourPlacement(format!(
            "f(1e6) = {} does not exceed the stability index {target}",
            f.exponent_real(hi)
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f.exponent_real(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `E_x[p(X_t)]`.
pub fn moment_classical(model: &ModelSpec, p: &PolyVec, x: &[f64], t: f64) -> Result<f64> {
    MomentSolver::new(model, p.basis().degree())?.classical(p, x, t)
}

/// `E_x[p(X_{L_t})]` for the inverse `α`-stable clock.
pub fn moment_fractional(model: &ModelSpec, p: &PolyVec, x: &[f64], t: f64, alpha: f64) -> Result<f64> {
    MomentSolver::new(model, p.basis().degree())?.fractional(p, x, t, alpha)
}

/// `E_x[p(X_{L_t})]` for the inverse of a subordinator with exponent `f`.
pub fn moment_general_f(
    model: &ModelSpec,
    p: &PolyVec,
    x: &[f64],
    t: f64,
    f: &dyn Bernstein,
) -> Result<InvertedMoment> {
    MomentSolver::new(model, p.basis().degree())?.general_f(p, x, t, f)
}

/// Product-integration weights for the Caputo derivative.
///
/// On `[0, t_n]` the samples are interpolated by local cubic Lagrange
/// polynomials in `x^α`, `x = s/t_n`. Solutions of linear fractional
/// equations are analytic in `s^α`, so this is high order even at the
/// origin, and the kernel integrals against powers of `x^α` are exact
/// incomplete beta functions.
#[derive(Debug, Clone)]
pub struct CaputoWeights {
    alpha: f64,
    grid: Vec<f64>,
    // rows[n-1][i]: weight of sample i in the derivative at grid point n.
    rows: Vec<Vec<f64>>,
}

/// Local interpolation degree in `s^α`.
pub const CAPUTO_INTERP_DEGREE: usize = 3;

fn validate_grid(grid: &[f64], min_points: usize) -> Result<()> {
    if grid.len() < min_points {
        return Err(Error::GridTooCoarse { got: grid.len(), min: min_points });
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

// Regularised incomplete beta I_x(a, b) split so that differences near
// x = 1 are taken between small complements.
pub(crate) struct BetaMass {
    a: f64,
    b: f64,
    at_half_lower: f64,
    at_half_upper: f64,
}

impl BetaMass {
    pub(crate) fn new(a: f64, b: f64) -> Self {
        BetaMass { a, b, at_half_lower: beta_reg(a, b, 0.5), at_half_upper: beta_reg(b, a, 0.5) }
    }

    fn lower(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    fn upper(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            beta_reg(self.b, self.a, y)
        }
    }

    // I_{x1} − I_{x0}, 0 ≤ x0 < x1 ≤ 1.
    pub(crate) fn between(&self, x0: f64, x1: f64) -> f64 {
        if x1 <= 0.5 {
            self.lower(x1) - self.lower(x0)
        } else if x0 >= 0.5 {
            self.upper(1.0 - x0) - self.upper(1.0 - x1)
        } else {
            (self.at_half_lower - self.lower(x0)) + (self.at_half_upper - self.upper(1.0 - x1))
        }
    }
}

// Monomial coefficients of the Lagrange basis on `nodes`: out[i][k] is the
// coefficient of u^k in ℓ_i(u).
fn lagrange_monomials(nodes: &[f64]) -> Vec<Vec<f64>> {
    let m = nodes.len();
    (0..m)
        .map(|i| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (j, &uj) in nodes.iter().enumerate() {
                if j == i {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (k, &c) in poly.iter().enumerate() {
                    next[k + 1] += c;
                    next[k] -= c * uj;
                }
                poly = next;
                denom *= nodes[i] - uj;
            }
            poly.iter().map(|c| c / denom).collect()
        })
        .collect()
}

impl CaputoWeights {
    pub fn new(alpha: f64, grid: &[f64]) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("Caputo order must lie in (0, 1), got {alpha}")));
        }
        validate_grid(grid, 2)?;
        let deg = CAPUTO_INTERP_DEGREE;
        // D^α of u^k with u = x^α, integrated over a cell: γ_k · ΔI_k.
        let gammas: Vec<f64> =
            (0..=deg)
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else {
                        gamma_fn(alpha * k as f64 + 1.0) / gamma_fn(alpha * k as f64 + 1.0 - alpha)
                    }
                })
                .collect();
        let masses: Vec<BetaMass> = (1..=deg).map(|k| BetaMass::new(alpha * k as f64, 1.0 - alpha)).collect();
        let last = grid.len() - 1;
        let m = deg.min(last);
        let mut rows = Vec::with_capacity(last);
        for n in 1..=last {
            let tn = grid[n];
            let x: Vec<f64> = grid.iter().map(|s| s / tn).collect();
            let u: Vec<f64> = x.iter().map(|v| v.powf(alpha)).collect();
            let mut row = vec![0.0; (n + m).min(last) + 1];
            for j in 1..=n {
                // m+1 consecutive samples around the cell [j−1, j]; points past
                // t_n are fine since only the interpolant on [0, t_n] is used.
                let lo = (j as isize - 1 - (m as isize - 1) / 2).clamp(0, (last - m) as isize) as usize;
                let basis = lagrange_monomials(&u[lo..=lo + m]);
                let cell: Vec<f64> =
                    (1..=m).map(|k| gammas[k] * masses[k - 1].between(x[j - 1], x[j].min(1.0))).collect();
                for (i, coeffs) in basis.iter().enumerate() {
                    row[lo + i] += (1..=m).map(|k| coeffs[k] * cell[k - 1]).sum::<f64>();
                }
            }
            let scale = tn.powf(-alpha);
            rows.push(row.into_iter().map(|w| w * scale).collect());
        }
        Ok(CaputoWeights { alpha, grid: grid.to_vec(), rows })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Caputo derivative at grid point `n ≥ 1` of the sampled function.
    pub fn derivative_at<F>(&self, n: usize, sample: F) -> f64
    where
        F: Fn(usize) -> f64,
    {
        // Rows sum to zero analytically; working with q − q(0) makes that exact.
        let base = sample(0);
        self.rows[n - 1].iter().enumerate().skip(1).map(|(i, w)| w * (sample(i) - base)).sum()
    }

    /// Vector-valued version, one derivative per grid point `n ≥ 1`.
    pub fn derivative_vector(&self, n: usize, q: &[DVector<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(q[0].len());
        for (i, w) in self.rows[n - 1].iter().enumerate().skip(1) {
            out.axpy(*w, &(&q[i] - &q[0]), 1.0);
        }
        out
    }
}

/// `points` times on `[0, t_max]` equally spaced in `t^α`.
///
/// Solutions of `𝔻^α q = Aq` are smooth in `t^α` but not in `t`, so this
/// grading keeps the quadrature error uniform near the origin.
pub fn graded_grid(t_max: f64, points: usize, alpha: f64) -> Result<Vec<f64>> {
    if points < 2 || !(t_max > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "graded grid needs t_max > 0, points ≥ 2, α in (0, 1]; got {t_max}, {points}, {alpha}"
        )));
    }
    let last = (points - 1) as f64;
    let mut g: Vec<f64> = (0..points).map(|i| t_max * (i as f64 / last).powf(1.0 / alpha)).collect();
    g[points - 1] = t_max;
    Ok(g)
}

/// `max_n ‖𝔻^α q(t_n) − A q(t_n)‖ / (1 + ‖A q(t_n)‖)` over the grid.
pub fn caputo_residual(q: &[DVector<f64>], alpha: f64, a: &DMatrix<f64>, grid: &[f64]) -> Result<f64> {
    validate_grid(grid, 16)?;
    if q.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: q.len() });
    }
    if q.iter().any(|v| v.len() != a.ncols()) {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: q[0].len() });
    }
    let w = CaputoWeights::new(alpha, grid)?;
    let mut worst: f64 = 0.0;
    for n in 1..grid.len() {
        let d = w.derivative_vector(n, q);
        let aq = a * &q[n];
        worst = worst.max((d - &aq).amax() / (1.0 + aq.amax()));
    }
    Ok(worst)
}
