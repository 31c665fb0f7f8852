#![allow(dead_code)]

use fracpoly::mittag::gamma_fn;
use fracpoly::models::ModelSpec;
use fracpoly::polybasis::{build_basis, PolyVec};
use nalgebra::DMatrix;

pub fn pearson() -> ModelSpec {
    ModelSpec::Pearson { beta: 1.5, theta: 0.7, a0: 0.4, a1: 0.2, a2: 0.1 }
}

pub fn ou() -> ModelSpec {
    ModelSpec::Pearson { beta: 1.0, theta: 0.5, a0: 0.25, a1: 0.0, a2: 0.0 }
}

pub fn cir() -> ModelSpec {
    ModelSpec::Pearson { beta: 1.0, theta: 1.0, a0: 0.0, a1: 0.5, a2: 0.0 }
}

pub fn jacobi() -> ModelSpec {
    ModelSpec::JacobiJump { beta: 1.0, theta: 0.4, sigma: 0.5, lambda: 0.5 }
}

/// Normal compound-Poisson jumps at rate 1 with `∫ξ²ν = 0.5`.
pub fn levy_ou() -> ModelSpec {
    ModelSpec::LevyOu {
        beta: 1.0,
        theta: 0.0,
        sigma: 1.0,
        levy_b: 0.0,
        levy_a: 0.5,
        levy_m2: 0.5,
        levy_moments: vec![0.0, 0.75, 0.0, 1.875],
        jump_rate: 1.0,
    }
}

pub fn qtsm() -> ModelSpec {
    ModelSpec::Qtsm { b: 0.2, beta: 1.0, sigma: 0.3, r0: 0.01, r1: 0.5, r2: 0.2 }
}

/// Every model kind with a start state inside its domain.
pub fn zoo() -> Vec<(ModelSpec, Vec<f64>)> {
    vec![
        (ModelSpec::BrownianMotion {}, vec![0.0]),
        (pearson(), vec![1.0]),
        (ou(), vec![1.0]),
        (cir(), vec![0.5]),
        (jacobi(), vec![0.3]),
        (levy_ou(), vec![0.5]),
        (qtsm(), vec![0.3, 0.0]),
    ]
}

/// Models with an equilibrium (zero-stable generators).
pub fn stable_zoo() -> Vec<(ModelSpec, Vec<f64>)> {
    zoo().into_iter().filter(|(m, _)| !matches!(m, ModelSpec::BrownianMotion {})).collect()
}

pub fn monomial(dim: usize, exponents: &[u32]) -> PolyVec {
    let deg = exponents.iter().sum::<u32>().max(1) as usize;
    PolyVec::monomial(build_basis(dim, deg).unwrap(), exponents).unwrap()
}

/// Brute force `Σ_{k<terms} M^k / Γ(αk+1)` with Kahan-compensated entries.
pub fn ml_taylor(alpha: f64, m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut comp = DMatrix::<f64>::zeros(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    for k in 0..terms {
        let g = alpha * k as f64 + 1.0;
        let inv_gamma = if g < 170.0 { 1.0 / gamma_fn(g) } else { (-libm::lgamma(g)).exp() };
        for (i, &p) in power.iter().enumerate() {
            let y = p * inv_gamma - comp[i];
            let t = sum[i] + y;
            comp[i] = (t - sum[i]) - y;
            sum[i] = t;
        }
        power = &power * m;
    }
    sum
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
