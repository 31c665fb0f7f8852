//! Scalar Mittag-Leffler function `E_α(z) = Σ z^k / Γ(αk+1)` and derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions};

/// Highest derivative order served by [`ml_scalar_deriv`].
pub const MAX_DERIVATIVE_ORDER: usize = 8;

const SERIES_TERM_CAP: usize = 500;
// Accept the series only if cancellation keeps Σ|terms| within this factor of
// |Σ terms|; beyond that the contour representation is more accurate.
const SERIES_CANCELLATION_LIMIT: f64 = 1e3;
const CAUCHY_NODES: usize = 64;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("Mittag-Leffler index must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// `Γ(x)` for `x > 0`, switching to `exp(lnΓ)` where `Γ` would overflow.
pub fn gamma_fn(x: f64) -> f64 {
    if x < 171.0 {
        libm::tgamma(x)
    } else {
        libm::lgamma(x).exp()
    }
}

fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Neumaier-compensated complex accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    fn add(&mut self, x: Complex64) {
        self.sum.re = two_sum(self.sum.re, x.re, &mut self.comp.re);
        self.sum.im = two_sum(self.sum.im, x.im, &mut self.comp.im);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn two_sum(s: f64, x: f64, comp: &mut f64) -> f64 {
    let t = s + x;
    if s.abs() >= x.abs() {
        *comp += (s - t) + x;
    } else {
        *comp += (x - t) + s;
    }
    t
}

/// `k!/(k−j)!` as a float.
fn falling_factorial(k: usize, j: usize) -> f64 {
    ((k - j + 1)..=k).map(|i| i as f64).product()
}

/// Term-wise differentiated series. Returns `None` when the series needs
/// more than the term cap or suffers too much cancellation.
fn series(alpha: f64, z: Complex64, order: usize) -> Option<Complex64> {
    let mut acc = CompensatedSum::default();
    let mut abs_sum = 0.0;
    let ln_abs_z = z.norm().ln();
    let arg_z = z.arg();
    let mut power = Complex64::new(1.0, 0.0);
    let mut small_run = 0;
    for k in order..order + SERIES_TERM_CAP {
        let m = k - order;
        let g = alpha * k as f64 + 1.0;
        let term = if g < 171.0 && m < 60 {
            power * (falling_factorial(k, order) / gamma(g))
        } else if z == Complex64::new(0.0, 0.0) {
            Complex64::new(0.0, 0.0)
        } else {
            let ln_mag = m as f64 * ln_abs_z + falling_factorial(k, order).ln() - ln_gamma(g);
            Complex64::from_polar(ln_mag.exp(), m as f64 * arg_z)
        };
        if m < 60 {
            power *= z;
        }
        acc.add(term);
        let t = term.norm();
        abs_sum += t;
        if !abs_sum.is_finite() {
            return None;
        }
        let s = acc.value().norm();
        if t <= 1e-17 * s || (t == 0.0 && m > 0) {
            small_run += 1;
            if small_run >= 3 {
                if abs_sum > SERIES_CANCELLATION_LIMIT * s {
                    return None;
                }
                return Some(acc.value());
            }
        } else {
            small_run = 0;
        }
    }
    None
}

// Integrand cut-off: exp(ρ cos φ) below ~1e-19 once ρ |cos φ| > 44.
const TAIL_EXPONENT: f64 = 44.0;

/// Contour representation for `α < 1`: two rays from the origin at angles
/// `±δ`, plus the residue `exp(z^{1/α})/α` when `|arg z| < δ`.
fn contour(alpha: f64, z: Complex64) -> Result<Complex64> {
    let abs_arg = z.arg().abs();
    let delta = if (abs_arg - alpha * PI).abs() >= 1e-3 { alpha * PI } else { 0.75 * alpha * PI };
    let phi = delta / alpha;
    let rho_max = TAIL_EXPONENT / phi.cos().abs();
    let chi_max = rho_max.powf(alpha);
    let e_plus = Complex64::from_polar(1.0, delta);
    let e_minus = e_plus.conj();
    let w_plus = Complex64::from_polar(1.0, phi);
    let w_minus = w_plus.conj();

    let integrand = |chi: f64| {
        let rho = chi.powf(1.0 / alpha);
        let a = (w_plus * rho).exp() * e_plus / (e_plus * chi - z);
        let b = (w_minus * rho).exp() * e_minus / (e_minus * chi - z);
        a - b
    };
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-14, max_intervals: 4000 };
    let r = integrate_with_breaks(integrand, 0.0, chi_max, &[z.norm()], opts)?;
    let mut value = r.value / Complex64::new(0.0, 2.0 * PI * alpha);
    if abs_arg < delta {
        value += z.powf(1.0 / alpha).exp() / alpha;
    }
    Ok(value)
}

/// `E_α(z)` for `α ∈ (0, 1]`.
pub fn ml_scalar(alpha: f64, z: Complex64) -> Result<Complex64> {
    check_alpha(alpha)?;
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if let Some(v) = series(alpha, z, 0) {
        return Ok(v);
    }
    // Keep conjugate symmetry exact.
    if z.im < 0.0 {
        return contour(alpha, z.conj()).map(|v| v.conj());
    }
    let v = contour(alpha, z)?;
    if z.im == 0.0 {
        return Ok(Complex64::new(v.re, 0.0));
    }
    Ok(v)
}

/// Real-argument convenience wrapper.
pub fn ml_real(alpha: f64, x: f64) -> Result<f64> {
    ml_scalar(alpha, Complex64::new(x, 0.0)).map(|v| v.re)
}

/// `order`-th derivative of `E_α` at `z`, `order ≤ 8`.
pub fn ml_scalar_deriv(alpha: f64, z: Complex64, order: usize) -> Result<Complex64> {
    check_alpha(alpha)?;
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeUnavailable { requested: order, max: MAX_DERIVATIVE_ORDER });
    }
    if order == 0 {
        return ml_scalar(alpha, z);
    }
    if alpha == 1.0 {
        return Ok(z.exp());
    }
    if let Some(v) = series(alpha, z, order) {
        return Ok(v);
    }
    let radius = (0.5 * z.norm()).max(1.0);
    cauchy_derivative(|w| ml_scalar(alpha, w), z, order, radius)
}

/// `f^{(order)}(z)` by the trapezoid rule on a circle of the given radius;
/// spectrally accurate for entire `f`.
pub fn cauchy_derivative<F>(f: F, z: Complex64, order: usize, radius: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..CAUCHY_NODES {
        let theta = 2.0 * PI * (m as f64 + 0.5) / CAUCHY_NODES as f64;
        let u = Complex64::from_polar(1.0, theta);
        acc += f(z + u * radius)? * u.powi(-(order as i32));
    }
    let fact: f64 = (1..=order).map(|i| i as f64).product();
    Ok(acc * (fact / (CAUCHY_NODES as f64 * radius.powi(order as i32))))
}

/// `[f(z), f'(z), …, f^{(n)}(z)]` from a single set of circle samples.
pub fn cauchy_derivatives<F>(f: F, z: Complex64, n: usize, radius: f64) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let samples = (0..CAUCHY_NODES)
        .map(|m| {
            let u = Complex64::from_polar(1.0, 2.0 * PI * (m as f64 + 0.5) / CAUCHY_NODES as f64);
            f(z + u * radius).map(|v| (u, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![f(z)?];
    let mut fact = 1.0;
    for order in 1..=n {
        fact *= order as f64;
        let acc: Complex64 = samples.iter().map(|(u, v)| v * u.powi(-(order as i32))).sum();
        out.push(acc * (fact / (CAUCHY_NODES as f64 * radius.powi(order as i32))));
    }
    Ok(out)
}

/// `[E_α(z), E_α'(z), …, E_α^{(n)}(z)]`, `n ≤ 8`.
pub fn ml_scalar_derivs(alpha: f64, z: Complex64, n: usize) -> Result<Vec<Complex64>> {
    check_alpha(alpha)?;
    if n > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeUnavailable { requested: n, max: MAX_DERIVATIVE_ORDER });
    }
    if alpha == 1.0 {
        return Ok(vec![z.exp(); n + 1]);
    }
    let series_all: Option<Vec<Complex64>> = (0..=n).map(|k| series(alpha, z, k)).collect();
    if let Some(v) = series_all {
        return Ok(v);
    }
    let mut out = cauchy_derivatives(|w| ml_scalar(alpha, w), z, n, (0.5 * z.norm()).max(1.0))?;
    out[0] = ml_scalar(alpha, z)?;
    Ok(out)
}
