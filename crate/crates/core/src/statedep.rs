//! Polynomial solutions of the Volterra equation
//! `d/dt ∫₀ᵗ q(s,x) ν̄(t−s,x) ds − ν̄(t,x) q(0,x) = 𝒢q(t,x)` with `ν̄(t,x) = κ(t)/x`
//! and `𝒢` the generator of `dX = b dt + σ√X dW` on `(0, ∞)`.
//!
//! The `1/x` factor shifts degrees by one, so with `q = c₀ + Σ xʲ c_j(t)` each
//! `c_{j+1}` solves a decoupled scalar equation `𝔻_κ c_{j+1} = λ c_{j+1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fracmoments::BetaMass;
use crate::mittag::{gamma_fn, ml_real};
use crate::polybasis::{MultiIndex, PolyVec, Polynomial};
use crate::quadrature::{integrate, QuadOptions};

/// Fewest grid points accepted by the residual check and the solvers.
pub const MIN_GRID_POINTS: usize = 64;
/// Largest relative residual accepted for a coefficient function.
pub const RESIDUAL_TOL: f64 = 1e-3;

/// Memory kernel `κ` with the integrals product integration needs.
pub trait MemoryKernel: Send + Sync {
    fn value(&self, t: f64) -> f64;
    /// `∫_{s0}^{s1} κ(t − s) s^p ds` for `0 ≤ s0 < s1 ≤ t`, `p ≥ 0`.
    fn power_moment(&self, t: f64, s0: f64, s1: f64, p: f64) -> Result<f64>;
    /// Exponent `a` of the onset `c(t) − c(0) ∝ t^a` for solutions of
    /// `𝔻_κ c = λc`, read off `κ(t) ∝ t^{−a}` near `t = h`.
    fn onset_exponent(&self, h: f64) -> f64 {
        let a = (self.value(h / 4.0) / self.value(h)).ln() / 4f64.ln();
        a.clamp(0.05, 1.0)
    }
}

/// `κ(t) = t^{−α}/Γ(1−α)`, for which `𝔻_κ` is the Caputo derivative of order `α`.
#[derive(Debug, Clone, Copy)]
pub struct AlphaKernel {
    alpha: f64,
    inv_gamma: f64,
}

impl AlphaKernel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("kernel order must lie in (0, 1), got {alpha}")));
        }
        Ok(AlphaKernel { alpha, inv_gamma: 1.0 / gamma_fn(1.0 - alpha) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl MemoryKernel for AlphaKernel {
    fn value(&self, t: f64) -> f64 {
        t.powf(-self.alpha) * self.inv_gamma
    }

    // t^{p+1−α} B(p+1, 1−α) [I_{s1/t} − I_{s0/t}](p+1, 1−α) / Γ(1−α)
    fn power_moment(&self, t: f64, s0: f64, s1: f64, p: f64) -> Result<f64> {
        let (a, b) = (p + 1.0, 1.0 - self.alpha);
        let beta = (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp();
        let mass = BetaMass::new(a, b).between(s0 / t, (s1 / t).min(1.0));
        Ok(t.powf(a - self.alpha) * beta * mass * self.inv_gamma)
    }

    fn onset_exponent(&self, _h: f64) -> f64 {
        self.alpha
    }
}

/// A caller-supplied kernel; its integrals are computed by adaptive quadrature.
#[derive(Clone)]
pub struct UserKernel {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    opts: QuadOptions,
}

impl fmt::Debug for UserKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserKernel").finish_non_exhaustive()
    }
}

impl UserKernel {
    /// Checks on a log grid over `[1e-12, 1e2]` that `κ` is positive,
    /// non-increasing and still growing towards the origin, and that `∫₀¹κ` is finite.
    pub fn new<F>(f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kernel =
            UserKernel { f: Arc::new(f), opts: QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 4000 } };
        let grid: Vec<f64> = (0..=140).map(|i| 10f64.powf(-12.0 + 0.1 * i as f64)).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| (kernel.f)(t)).collect();
        if vals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("kernel must be finite and positive on (0, ∞)".into()));
        }
        if let Some(i) = vals.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("kernel increases near t = {:e}", grid[i + 1])));
        }
        // κ(0⁺) = ∞ cannot be observed; require strict growth across the small-t decades.
        let (k12, k8, k4) = ((kernel.f)(1e-12), (kernel.f)(1e-8), (kernel.f)(1e-4));
        if !(k12 > k8 && k8 > k4) {
            return Err(Error::InvalidParameter("kernel does not blow up at the origin".into()));
        }
        let unit = kernel.power_moment(1.0, 0.0, 1.0, 0.0)?;
        if !unit.is_finite() {
            return Err(Error::InvalidParameter("kernel is not integrable on (0, 1)".into()));
        }
        Ok(kernel)
    }
}

impl MemoryKernel for UserKernel {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn power_moment(&self, t: f64, s0: f64, s1: f64, p: f64) -> Result<f64> {
        // Integrate in u = t − s so the kernel singularity sits at the left end.
        let r = integrate(
            |u| num_complex::Complex64::new((self.f)(u) * (t - u).max(0.0).powf(p), 0.0),
            t - s1,
            t - s0,
            self.opts,
        )?;
        Ok(r.value.re)
    }
}

#[derive(Debug, Clone)]
pub enum KappaKind {
    AlphaKernel(f64),
    User(UserKernel),
}

impl KappaKind {
    fn kernel(&self) -> Result<Arc<dyn MemoryKernel>> {
        Ok(match self {
            KappaKind::AlphaKernel(a) => Arc::new(AlphaKernel::new(*a)?),
            KappaKind::User(k) => Arc::new(k.clone()),
        })
    }
}

/// Drift `b`, volatility `σ`, memory kernel and initial polynomial `u(x)`.
#[derive(Debug, Clone)]
pub struct StateDepProblem {
    pub b: f64,
    pub sigma: f64,
    pub kappa: KappaKind,
    pub u: PolyVec,
}

impl StateDepProblem {
    pub fn new(b: f64, sigma: f64, kappa: KappaKind, u: PolyVec) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("need b ≥ 0 and σ ≥ 0, got {b}, {sigma}")));
        }
        if u.basis().dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: u.basis().dim() });
        }
        if let KappaKind::AlphaKernel(a) = kappa {
            AlphaKernel::new(a)?;
        }
        Ok(StateDepProblem { b, sigma, kappa, u })
    }

    pub fn degree(&self) -> usize {
        self.u.degree()
    }

    fn initial(&self) -> Vec<f64> {
        let m = self.degree();
        let mut c = vec![0.0; m + 1];
        for (i, mono) in self.u.basis().ordering().iter().enumerate() {
            let d = mono.degree();
            if d <= m {
                c[d] += self.u.coeffs()[i];
            }
        }
        c
    }

    /// `𝒢g = b g' + ½σ² x g''` applied symbolically.
    pub fn generator(&self, g: &Polynomial) -> Polynomial {
        let d1 = g.derivative(0);
        let d2 = d1.derivative(0);
        let x = Polynomial::variable(1, 0, 0.5 * self.sigma * self.sigma);
        d1.scale(self.b).add(&x.mul(&d2))
    }

    /// Coefficient of `xʲ` in `𝒢x^{j+1}`, read off the symbolic generator.
    pub fn generator_rate(&self, j: usize) -> f64 {
        let g = self.generator(&Polynomial::term(MultiIndex::new(vec![j as u32 + 1]), 1.0));
        coefficient(&g, j)
    }
}

fn coefficient(p: &Polynomial, j: usize) -> f64 {
    p.terms().find(|(m, _)| m.exponents()[0] as usize == j).map_or(0.0, |(_, &c)| c)
}

/// The two candidate rates for the equation of `c_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateIndexing {
    /// `(j+1)b + (j+1)j σ²/2`, the `xʲ` component of `𝒢q`.
    Matched,
    /// `jb + j(j−1) σ²/2`.
    Shifted,
}

impl RateIndexing {
    pub fn rate(self, j: usize, b: f64, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let jf = j as f64;
        match self {
            RateIndexing::Matched => (jf + 1.0) * b + (jf + 1.0) * jf * s2 / 2.0,
            RateIndexing::Shifted => jf * b + jf * (jf - 1.0) * s2 / 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateIndexing::Matched => "matched",
            RateIndexing::Shifted => "shifted",
        }
    }
}

/// Residuals of one candidate's coefficients against the generator.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CandidateOutcome {
    pub indexing: RateIndexing,
    /// `rates[j]` drives `c_{j+1}`.
    pub rates: Vec<f64>,
    /// Residual of `c_{j+1}`; zero when `c_{j+1} ≡ 0`.
    pub residuals: Vec<f64>,
    /// Residual of the assembled `q(t, x)` over sample states.
    pub assembled: f64,
    pub passed: bool,
}

impl CandidateOutcome {
    /// Largest residual and the degree `j+1` where it occurs.
    pub fn worst(&self) -> (usize, f64) {
        self.residuals
            .iter()
            .enumerate()
            .map(|(j, &r)| (j + 1, r))
            .chain(std::iter::once((0, self.assembled)))
            .fold((0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc })
    }
}

/// Sampled coefficients `c_0, …, c_m` of the accepted candidate.
#[derive(Debug, Clone)]
pub struct StateDepSolution {
    pub grid: Vec<f64>,
    /// `coefficients[j][n] = c_j(t_n)`.
    pub coefficients: Vec<Vec<f64>>,
    pub accepted: RateIndexing,
    pub candidates: Vec<CandidateOutcome>,
}

impl StateDepSolution {
    pub fn evaluate(&self, n: usize, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c[n])
    }

    pub fn outcome(&self, indexing: RateIndexing) -> Option<&CandidateOutcome> {
        self.candidates.iter().find(|c| c.indexing == indexing)
    }
}

/// States at which the assembled residual is sampled.
const SAMPLE_STATES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Builds the coefficient functions under both rate indexings, checks each
/// against the generator, and returns the first that passes (matched first).
pub fn solve_coefficients(prob: &StateDepProblem, t_grid: &[f64]) -> Result<StateDepSolution> {
    validate_grid(t_grid)?;
    let kernel = prob.kappa.kernel()?;
    let conv = Convolution::new(kernel.as_ref(), t_grid)?;
    let c0 = prob.initial();
    let m = c0.len() - 1;

    let mut candidates = Vec::with_capacity(2);
    let mut sampled = Vec::with_capacity(2);
    for indexing in [RateIndexing::Matched, RateIndexing::Shifted] {
        let rates: Vec<f64> = (0..m).map(|j| indexing.rate(j, prob.b, prob.sigma)).collect();
        let mut coeffs = vec![vec![c0[0]; t_grid.len()]];
        for j in 0..m {
            let init = c0[j + 1];
            let c = if init == 0.0 {
                vec![0.0; t_grid.len()]
            } else {
                match &prob.kappa {
                    KappaKind::AlphaKernel(a) => t_grid
                        .iter()
                        .map(|&t| Ok(init * ml_real(*a, rates[j] * t.powf(*a))?))
                        .collect::<Result<Vec<_>>>()?,
                    KappaKind::User(_) => conv.solve(rates[j], init),
                }
            };
            coeffs.push(c);
        }
        let outcome = check_candidate(prob, &conv, indexing, rates, &coeffs)?;
        log::info!(
            "{} rate indexing: worst residual {:.3e} ({})",
            indexing.name(),
            outcome.worst().1,
            if outcome.passed { "pass" } else { "fail" }
        );
        candidates.push(outcome);
        sampled.push(coeffs);
    }

    match candidates.iter().position(|c| c.passed) {
        Some(i) => Ok(StateDepSolution {
            grid: t_grid.to_vec(),
            coefficients: sampled.swap_remove(i),
            accepted: candidates[i].indexing,
            candidates,
        }),
        None => {
            let (degree, residual) = candidates[0].worst();
            Err(Error::ResidualCheckFailed { degree, residual })
        }
    }
}

fn check_candidate(
    prob: &StateDepProblem,
    conv: &Convolution,
    indexing: RateIndexing,
    rates: Vec<f64>,
    coeffs: &[Vec<f64>],
) -> Result<CandidateOutcome> {
    let m = coeffs.len() - 1;
    let mut residuals = Vec::with_capacity(m);
    let mut lhs = Vec::with_capacity(m);
    for j in 0..m {
        let d = conv.derivative(&coeffs[j + 1]);
        residuals.push(relative_residual(&d, &coeffs[j + 1], prob.generator_rate(j)));
        lhs.push(d);
    }

    // Assembled: Σ xʲ 𝔻_κ c_{j+1}(t) against 𝒢q(t,·)(x) with q rebuilt at each t.
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for n in 1..conv.grid.len() - 1 {
        let q = Polynomial::univariate(&coeffs.iter().map(|c| c[n]).collect::<Vec<_>>());
        let gq = prob.generator(&q);
        if gq.terms().any(|(mono, _)| mono.degree() > m) {
            return Err(Error::InvalidParameter("generator raised the degree".into()));
        }
        for &x in &SAMPLE_STATES {
            let left: f64 = lhs.iter().enumerate().map(|(j, d)| x.powi(j as i32) * d[n]).sum();
            let right: f64 = gq.terms().map(|(mono, &c)| c * mono.eval(&[x])).sum();
            num = num.max((left - right).abs());
            den = den.max(right.abs());
        }
    }
    let assembled = if num == 0.0 { 0.0 } else { num / den.max(f64::MIN_POSITIVE) };
    let passed = assembled <= RESIDUAL_TOL && residuals.iter().all(|&r| r <= RESIDUAL_TOL);
    Ok(CandidateOutcome { indexing, rates, residuals, assembled, passed })
}

/// `max_n |𝔻_κ c(t_n) − λ c(t_n)| / max_n |λ c(t_n)|` over interior grid points.
///
/// The convolution `∫₀ᵗ (c(s) − c(0)) κ(t−s) ds` is product-integrated with `c`
/// piecewise linear in `s^a` (`a` the kernel's onset exponent) and differentiated by three-point centred differences. When
/// `λ c ≡ 0` the scale falls back to `max |c|`.
pub fn volterra_residual(c: &[f64], kappa: &dyn MemoryKernel, lam: f64, t_grid: &[f64]) -> Result<f64> {
    validate_grid(t_grid)?;
    if c.len() != t_grid.len() {
        return Err(Error::DimensionMismatch { expected: t_grid.len(), got: c.len() });
    }
    let conv = Convolution::new(kappa, t_grid)?;
    Ok(relative_residual(&conv.derivative(c), c, lam))
}

fn relative_residual(d: &[f64], c: &[f64], lam: f64) -> f64 {
    let n = c.len();
    let num = (1..n - 1).map(|i| (d[i] - lam * c[i]).abs()).fold(0.0, f64::max);
    if num == 0.0 {
        return 0.0;
    }
    let mut scale = (1..n - 1).map(|i| (lam * c[i]).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    num / scale.max(f64::MIN_POSITIVE)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse { got: grid.len(), min: MIN_GRID_POINTS });
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Product-integration weights for `I_n = ∫₀^{t_n} g(s) κ(t_n − s) ds` with `g`
/// linear in `φ(s) = s^a` between nodes, `a` the kernel's onset exponent:
/// `I_n = Σ_k (w_lo[n][k] g_k + w_hi[n][k] g_{k+1})`.
struct Convolution {
    grid: Vec<f64>,
    onset: f64,
    w_lo: Vec<Vec<f64>>,
    w_hi: Vec<Vec<f64>>,
}

impl Convolution {
    fn new(kappa: &dyn MemoryKernel, grid: &[f64]) -> Result<Self> {
        let n = grid.len();
        let a = kappa.onset_exponent(grid[1]);
        let phi: Vec<f64> = grid.iter().map(|s| s.powf(a)).collect();
        let mut w_lo = Vec::with_capacity(n);
        let mut w_hi = Vec::with_capacity(n);
        for i in 0..n {
            let (mut lo, mut hi) = (Vec::with_capacity(i), Vec::with_capacity(i));
            for k in 0..i {
                let w0 = kappa.power_moment(grid[i], grid[k], grid[k + 1], 0.0)?;
                let wa = kappa.power_moment(grid[i], grid[k], grid[k + 1], a)?;
                let slope = (wa - phi[k] * w0) / (phi[k + 1] - phi[k]);
                lo.push(w0 - slope);
                hi.push(slope);
            }
            w_lo.push(lo);
            w_hi.push(hi);
        }
        Ok(Convolution { grid: grid.to_vec(), onset: a, w_lo, w_hi })
    }

    fn integral(&self, i: usize, g: &[f64]) -> f64 {
        (0..i).map(|k| self.w_lo[i][k] * g[k] + self.w_hi[i][k] * g[k + 1]).sum()
    }

    /// `𝔻_κ c(t_n)` at interior nodes; the endpoints are left at zero.
    fn derivative(&self, c: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = c.iter().map(|v| v - c[0]).collect();
        let int: Vec<f64> = (0..g.len()).map(|i| self.integral(i, &g)).collect();
        let t = &self.grid;
        let mut d = vec![0.0; c.len()];
        for i in 1..c.len() - 1 {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            d[i] = -h2 / (h1 * (h1 + h2)) * int[i - 1]
                + (h2 - h1) / (h1 * h2) * int[i]
                + h1 / (h2 * (h1 + h2)) * int[i + 1];
        }
        d
    }

    /// Implicit stepping of `𝔻_κ c = λ c`, `c(0) = c0`: on each step
    /// `(I_n − I_{n−1})/h = λ·avg c`, with the average taken over the same
    /// `s^a`-linear interpolant, and solved for the new node.
    fn solve(&self, lam: f64, c0: f64) -> Vec<f64> {
        let t = &self.grid;
        let a = self.onset;
        let mut g = vec![0.0; t.len()];
        let mut prev = 0.0;
        for i in 1..t.len() {
            let h = t[i] - t[i - 1];
            let (p0, p1) = (t[i - 1].powf(a), t[i].powf(a));
            let mean_phi = (t[i].powf(a + 1.0) - t[i - 1].powf(a + 1.0)) / ((a + 1.0) * h);
            let theta = (mean_phi - p0) / (p1 - p0);
            let known: f64 = (0..i - 1).map(|k| self.w_lo[i][k] * g[k] + self.w_hi[i][k] * g[k + 1]).sum::<f64>()
                + self.w_lo[i][i - 1] * g[i - 1];
            let w = self.w_hi[i][i - 1];
            // λh·(c0 + (1−θ)g_{i−1} + θ g_i) = I_i − I_{i−1}
            g[i] = (prev - known + lam * h * (c0 + (1.0 - theta) * g[i - 1])) / (w - lam * h * theta);
            prev = known + w * g[i];
        }
        g.iter().map(|v| v + c0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::build_basis;

    fn uniform(t_max: f64, n: usize) -> Vec<f64> {
        graded(t_max, n, 1.0)
    }

    fn graded(t_max: f64, n: usize, r: f64) -> Vec<f64> {
        (0..n).map(|i| t_max * (i as f64 / (n - 1) as f64).powf(r)).collect()
    }

    fn poly(coeffs: &[f64]) -> PolyVec {
        let basis = build_basis(1, coeffs.len() - 1).unwrap();
        PolyVec::from_terms(basis, coeffs.iter().enumerate().map(|(k, &c)| (vec![k as u32], c))).unwrap()
    }

    #[test]
    fn generator_rates_match_the_monomial_action() {
        let p = StateDepProblem::new(1.5, 0.7, KappaKind::AlphaKernel(0.5), poly(&[0.0, 1.0])).unwrap();
        for j in 0..5 {
            let want = RateIndexing::Matched.rate(j, 1.5, 0.7);
            assert!((p.generator_rate(j) - want).abs() < 1e-14, "j = {j}");
        }
    }

    #[test]
    fn mittag_leffler_solution_has_small_residual() {
        let grid = uniform(1.0, 256);
        let k = AlphaKernel::new(0.5).unwrap();
        let c: Vec<f64> = grid.iter().map(|&t| ml_real(0.5, 2.0 * t.sqrt()).unwrap()).collect();
        let r = volterra_residual(&c, &k, 2.0, &grid).unwrap();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn constant_has_zero_residual() {
        let grid = uniform(1.0, 64);
        let k = AlphaKernel::new(0.3).unwrap();
        assert_eq!(volterra_residual(&vec![2.5; 64], &k, 0.0, &grid).unwrap(), 0.0);
    }

    #[test]
    fn exponential_fails_the_fractional_equation() {
        let grid = uniform(1.0, 256);
        let k = AlphaKernel::new(0.5).unwrap();
        let c: Vec<f64> = grid.iter().map(|&t| (2.0 * t).exp()).collect();
        let r = volterra_residual(&c, &k, 2.0, &grid).unwrap();
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = uniform(1.0, 32);
        let k = AlphaKernel::new(0.5).unwrap();
        assert!(matches!(volterra_residual(&[1.0; 32], &k, 0.0, &grid), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn constant_and_zero_generator_cases() {
        let grid = uniform(1.0, 64);
        let p = StateDepProblem::new(1.0, 1.0, KappaKind::AlphaKernel(0.5), poly(&[3.0])).unwrap();
        let s = solve_coefficients(&p, &grid).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert!(s.coefficients[0].iter().all(|&v| v == 3.0));

        let p = StateDepProblem::new(0.0, 0.0, KappaKind::AlphaKernel(0.5), poly(&[1.0, -2.0, 0.5])).unwrap();
        let s = solve_coefficients(&p, &grid).unwrap();
        for (c, want) in s.coefficients.iter().zip([1.0, -2.0, 0.5]) {
            assert!(c.iter().all(|&v| v == want));
        }
    }

    #[test]
    fn linear_initial_condition_grows_at_rate_b() {
        // Slow growth: grading towards the origin pays off.
        let grid = graded(1.0, 128, 2.5);
        let p = StateDepProblem::new(0.8, 0.5, KappaKind::AlphaKernel(0.4), poly(&[0.0, 1.0])).unwrap();
        let s = solve_coefficients(&p, &grid).unwrap();
        assert_eq!(s.accepted, RateIndexing::Matched);
        for (n, &t) in grid.iter().enumerate() {
            let want = ml_real(0.4, 0.8 * t.powf(0.4)).unwrap();
            assert!((s.coefficients[1][n] - want).abs() < 1e-13);
        }
        assert!(!s.outcome(RateIndexing::Shifted).unwrap().passed);
    }

    #[test]
    fn user_kernel_solver_reproduces_mittag_leffler() {
        let alpha = 0.5;
        let g = gamma_fn(1.0 - alpha);
        let kernel = UserKernel::new(move |t: f64| t.powf(-alpha) / g).unwrap();
        let grid = graded(1.0, 256, 1.5);
        let p = StateDepProblem::new(1.0, 1.0, KappaKind::User(kernel), poly(&[0.0, 0.0, 1.0])).unwrap();
        let s = solve_coefficients(&p, &grid).unwrap();
        assert_eq!(s.accepted, RateIndexing::Matched);
        let worst = grid
            .iter()
            .zip(&s.coefficients[2])
            .map(|(&t, &c)| {
                let want = ml_real(alpha, 3.0 * t.sqrt()).unwrap();
                ((c - want) / want).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn user_kernel_validation() {
        assert!(UserKernel::new(|t: f64| t).is_err());
        assert!(UserKernel::new(|_t: f64| 1.0).is_err());
        assert!(UserKernel::new(|t: f64| 1.0 / t).is_err());
        assert!(UserKernel::new(|t: f64| t.powf(-0.3) * (-t).exp()).is_ok());
    }
}
