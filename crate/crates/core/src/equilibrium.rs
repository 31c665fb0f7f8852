//! Equilibrium moments, cross-moments and correlations.
//!
//! Under a zero-stable generator the stationary moments are `vᵀp⃗`, where
//! `v` is the left null vector of `A_{2k}` normalised to `v[0] = 1`. They are
//! the same for the time-changed process. Cross-moments of the time-changed
//! process use the Laplace transform `F̂_{s,t}` of the clock increment
//! `L_{t+s} − L_t`, evaluated at `−A`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mittag::{cauchy_derivative, cauchy_derivatives, gamma_fn, ml_scalar, ScalarFunction, MAX_DERIVATIVE_ORDER};
use crate::models::{generator_matrix, is_zero_stable, GeneratorMatrix, ModelSpec, DEFAULT_STABILITY_TOL};
use crate::polybasis::{product_into, PolyVec};
use crate::quadrature::{integrate, QuadOptions};

const NULL_RESIDUAL_LIMIT: f64 = 1e-9;
const DEGENERATE_VARIANCE: f64 = 1e-12;
const CLAMP_SLACK: f64 = 1e-9;

/// Left null vector of a zero-stable generator, normalised to `v[0] = 1`.
pub fn stationary_vector(g: &GeneratorMatrix) -> Result<DVector<f64>> {
    if !is_zero_stable(g, DEFAULT_STABILITY_TOL)? {
        return Err(Error::NotZeroStable(format!(
            "generator of size {} has no simple isolated zero eigenvalue",
            g.matrix().nrows()
        )));
    }
    let a = g.matrix();
    let n = a.nrows();
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().ok_or(Error::Singular("SVD did not return U".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(Error::Singular("empty generator".into()))?;
    let mut v: DVector<f64> = u.column(imin).into_owned();

    // One inverse-iteration step on Aᵀ with a tiny shift sharpens the null
    // direction when the SVD split is poorly separated.
    let shift = 1e-10 * a.norm().max(1.0);
    let shifted = a.transpose() - DMatrix::identity(n, n) * shift;
    if let Some(w) = shifted.lu().solve(&v) {
        let norm = w.norm();
        if norm.is_finite() && norm > 0.0 {
            v = w / norm;
        }
    }

    let lead = v[0];
    if lead.abs() < 1e-12 * v.amax() {
        return Err(Error::NormalizationImpossible { leading: lead });
    }
    Ok(v / lead)
}

/// Zero-stable generators on `𝒫_k` and `𝒫_{2k}` with the stationary vector.
#[derive(Debug, Clone)]
pub struct EquilibriumContext {
    model: ModelSpec,
    k: usize,
    a_k: GeneratorMatrix,
    a_2k: GeneratorMatrix,
    v: DVector<f64>,
}

impl EquilibriumContext {
    pub fn new(model: &ModelSpec, k: usize) -> Result<Self> {
        let a_k = generator_matrix(model, k)?;
        let a_2k = generator_matrix(model, 2 * k)?;
        for g in [&a_k, &a_2k] {
            if !is_zero_stable(g, DEFAULT_STABILITY_TOL)? {
                return Err(Error::NotZeroStable(format!(
                    "{} generator on polynomials of degree {} is not zero-stable",
                    model.name(),
                    g.degree()
                )));
            }
        }
        let v = stationary_vector(&a_2k)?;
        let residual = (a_2k.matrix().transpose() * &v).amax();
        let scale = a_2k.matrix().amax() * v.amax();
        if residual > NULL_RESIDUAL_LIMIT * scale {
            return Err(Error::NotZeroStable(format!("stationary vector residual {residual:e} exceeds tolerance")));
        }
        Ok(EquilibriumContext { model: model.clone(), k, a_k, a_2k, v })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.a_k
    }

    pub fn generator_double(&self) -> &GeneratorMatrix {
        &self.a_2k
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.v
    }
}

/// `E_μ[p(X_t)] = vᵀp⃗` for `deg p ≤ 2k`.
pub fn stationary_moment(ctx: &EquilibriumContext, p: &PolyVec) -> Result<f64> {
    Ok(ctx.v.dot(p.embed(ctx.a_2k.basis())?.coeffs()))
}

fn check_increment_args(alpha: f64, s: f64, t: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("α must lie in (0, 1), got {alpha}")));
    }
    if !(s >= 0.0 && t >= 0.0) || !s.is_finite() || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("times must be finite and non-negative, got s={s}, t={t}")));
    }
    Ok(())
}

/// `F̂_{s,t}(−z)`, the increment transform continued to complex `z`.
///
/// `F̂_{s,t}(−z) = E_α(zT) − (zT/Γ(1+α))·∫₀^{u*} E_α(zT(1 − w^{1/α})^α) dw`
/// with `T = (t+s)^α` and `u* = (t/(t+s))^α`; the substitution `w = r^α`
/// has already absorbed the `r^{α−1}` endpoint singularity.
pub fn fhat_complex(alpha: f64, z: Complex64, s: f64, t: f64) -> Result<Complex64> {
    check_increment_args(alpha, s, t)?;
    let total = t + s;
    if total == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let big_t = total.powf(alpha);
    let zt = z * big_t;
    let head = ml_scalar(alpha, zt)?;
    let upper = (t / total).powf(alpha);
    if upper == 0.0 || zt == Complex64::new(0.0, 0.0) {
        return Ok(head);
    }
    let inv = 1.0 / alpha;
    let mut failure = None;
    let integrand = |w: f64| {
        let arg = zt * (1.0 - w.powf(inv)).max(0.0).powf(alpha);
        match ml_scalar(alpha, arg) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 };
    let r = integrate(integrand, 0.0, upper, opts)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let integral_term = zt / gamma_fn(1.0 + alpha) * r.value;
    if r.error * (zt.norm() / gamma_fn(1.0 + alpha)) > 1e-9 {
        return Err(Error::QuadratureNonConvergence { achieved: r.error });
    }
    Ok(head - integral_term)
}

/// `F̂_{s,t}(β) = E[e^{−β(L_{t+s} − L_t)}]` for the inverse `α`-stable clock.
pub fn fhat_scalar(alpha: f64, beta: f64, s: f64, t: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("β must be finite and non-negative, got {beta}")));
    }
    let v = fhat_complex(alpha, Complex64::new(-beta, 0.0), s, t)?.re;
    if (-CLAMP_SLACK..0.0).contains(&v) {
        Ok(0.0)
    } else if v > 1.0 && v <= 1.0 + CLAMP_SLACK {
        Ok(1.0)
    } else {
        if !(0.0..=1.0).contains(&v) {
            warn!("increment transform {v} outside [0, 1] at α={alpha}, β={beta}, s={s}, t={t}");
        }
        Ok(v)
    }
}

/// `z ↦ F̂_{s,t}(−z)` as a matrix-function kernel. It is entire in `z`, so
/// derivatives for defective spectra come from Cauchy integrals.
#[derive(Debug, Clone, Copy)]
pub struct IncrementTransform {
    pub alpha: f64,
    pub s: f64,
    pub t: f64,
}

impl IncrementTransform {
    fn radius(z: Complex64) -> f64 {
        (0.5 * z.norm()).max(1.0)
    }
}

impl ScalarFunction for IncrementTransform {
    fn value(&self, z: Complex64) -> Result<Complex64> {
        fhat_complex(self.alpha, z, self.s, self.t)
    }

    fn derivative(&self, z: Complex64, order: usize) -> Result<Complex64> {
        let f = |w: Complex64| fhat_complex(self.alpha, w, self.s, self.t);
        cauchy_derivative(f, z, order, Self::radius(z))
    }

    fn derivatives(&self, z: Complex64, n: usize) -> Result<Vec<Complex64>> {
        if n > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeUnavailable { requested: n, max: MAX_DERIVATIVE_ORDER });
        }
        let f = |w: Complex64| fhat_complex(self.alpha, w, self.s, self.t);
        let mut out = cauchy_derivatives(f, z, n, Self::radius(z))?;
        out[0] = self.value(z)?;
        Ok(out)
    }
}

/// `F̂_{s,t}(−A)` for a zero-stable generator.
pub fn fhat_matrix(alpha: f64, g: &GeneratorMatrix, s: f64, t: f64) -> Result<DMatrix<f64>> {
    check_increment_args(alpha, s, t)?;
    if !is_zero_stable(g, DEFAULT_STABILITY_TOL)? {
        return Err(Error::NotZeroStable("increment transform needs a zero-stable generator".into()));
    }
    let f = IncrementTransform { alpha, s, t };
    Ok(g.plan()?.apply(&f, 1.0)?.value)
}

/// `E_μ[p(X_{L_{t+s}}) q(X_{L_t})]`, or the un-time-changed
/// `E_μ[p(X_{t+s}) q(X_t)]` when `alpha` is `None`.
pub fn cross_moment(
    ctx: &EquilibriumContext,
    p: &PolyVec,
    q: &PolyVec,
    s: f64,
    t: f64,
    alpha: Option<f64>,
) -> Result<f64> {
    let basis = ctx.a_k.basis();
    let pk = p.embed(basis)?;
    let qk = q.embed(basis)?;
    let propagated = match alpha {
        Some(a) => fhat_matrix(a, &ctx.a_k, s, t)? * pk.coeffs(),
        None => {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("lag must be finite and non-negative, got {s}")));
            }
            (ctx.a_k.matrix() * s).exp() * pk.coeffs()
        }
    };
    let pushed = PolyVec::new(basis.clone(), propagated)?;
    let prod = product_into(&qk, &pushed, ctx.a_2k.basis())?;
    Ok(ctx.v.dot(prod.coeffs()))
}

/// Equilibrium correlation and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    /// Closed form: `F̂_{s,t}(β)` or `e^{−βs}`.
    pub correlation: f64,
    /// `cross_moment − mean²`, computed independently.
    pub covariance: f64,
    pub variance: f64,
    pub mean: f64,
    /// Decay rate: minus the non-zero eigenvalue of `𝒢|_{𝒫₁}`.
    pub beta: f64,
}

/// Correlation of a one-dimensional model between times `t` and `t + s`.
pub fn correlation(ctx: &EquilibriumContext, s: f64, t: f64, alpha: Option<f64>) -> Result<CorrelationReport> {
    if ctx.model.state_dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "scalar correlation needs a one-dimensional model, {} has dimension {}",
            ctx.model.name(),
            ctx.model.state_dim()
        )));
    }
    let g1 = generator_matrix(&ctx.model, 1)?;
    let beta = g1.eigenvalues()?.iter().map(|z| -z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(beta > 0.0) {
        return Err(Error::NotZeroStable("linear part has no decaying mode".into()));
    }
    let x = PolyVec::monomial(ctx.a_k.basis().clone(), &[1])?;
    let x2 = PolyVec::monomial(ctx.a_2k.basis().clone(), &[2])?;
    let mean = stationary_moment(ctx, &x)?;
    let variance = stationary_moment(ctx, &x2)? - mean * mean;
    if variance <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateVariance { variance });
    }
    let correlation = match alpha {
        Some(a) => fhat_scalar(a, beta, s, t)?,
        None => (-beta * s).exp(),
    };
    let covariance = cross_moment(ctx, &x, &x, s, t, alpha)? - mean * mean;
    Ok(CorrelationReport { correlation, covariance, variance, mean, beta })
}

/// Correlation of the observable `p(X)` through the generic cross-moment
/// path; used where no scalar reduction exists (e.g. the short rate).
pub fn observable_correlation(
    ctx: &EquilibriumContext,
    p: &PolyVec,
    s: f64,
    t: f64,
    alpha: Option<f64>,
) -> Result<f64> {
    let mean = stationary_moment(ctx, p)?;
    let square = product_into(&p.embed(ctx.a_k.basis())?, &p.embed(ctx.a_k.basis())?, ctx.a_2k.basis())?;
    let variance = stationary_moment(ctx, &square)? - mean * mean;
    if variance <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateVariance { variance });
    }
    Ok((cross_moment(ctx, p, p, s, t, alpha)? - mean * mean) / variance)
}

/// Large-lag asymptote `R_{s,t}(λ) = (1/λ + t^α/Γ(1+α)) / ((t+s)^α Γ(1−α))`.
pub fn lrd_asymptote(alpha: f64, lam: f64, s: f64, t: f64) -> Result<f64> {
    check_increment_args(alpha, s, t)?;
    if !(lam > 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {lam}")));
    }
    let total = t + s;
    Ok((1.0 / lam + t.powf(alpha) / gamma_fn(1.0 + alpha)) / (total.powf(alpha) * gamma_fn(1.0 - alpha)))
}
