//! The polynomial-process model zoo and its generator matrices.
//!
//! Matrix orientation: column `i` of a generator matrix holds the
//! coordinates of `𝒢hᵢ`, i.e. `A[(j, i)]` is the coefficient of basis
//! monomial `hⱼ` in `𝒢hᵢ`. With this layout `q' = A·q` is the backward
//! equation for coefficient vectors and moments read `H(x)ᵀ·f(A)·p`. Because
//! the constant monomial is annihilated, its column is zero, and entries in
//! rows of higher degree than their column vanish.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mittag::MatrixFunctionPlan;
use crate::polybasis::{build_basis, Basis, MultiIndex, Polynomial};

/// Default zero-stability tolerance, relative to `‖A‖`.
pub const DEFAULT_STABILITY_TOL: f64 = 1e-9;

fn default_jump_rate() -> f64 {
    1.0
}

/// A polynomial process and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Standard Brownian motion, `𝒢g = g''/2`.
    BrownianMotion {},
    /// `dX = −β(X−θ)dt + √(a0 + a1·X + a2·X²) dW`.
    Pearson { beta: f64, theta: f64, a0: f64, a1: f64, a2: f64 },
    /// Jacobi diffusion on `[0, 1]` with reflections `x ↦ 1 − x` at rate `λ`.
    JacobiJump { beta: f64, theta: f64, sigma: f64, lambda: f64 },
    /// `dX = −β(X−θ)dt + σ dY` for a Lévy process `Y` with characteristics
    /// `(levy_b, levy_a², ν)` relative to the truncation `ξ ↦ ξ`.
    LevyOu {
        beta: f64,
        theta: f64,
        sigma: f64,
        levy_b: f64,
        levy_a: f64,
        /// `∫ξ²ν(dξ)`.
        levy_m2: f64,
        /// `∫ξʲν(dξ)` for `j = 3, 4, …`; needed for degrees above 2.
        #[serde(default)]
        levy_moments: Vec<f64>,
        /// Jump intensity of the compound-Poisson law used by the simulator.
        #[serde(default = "default_jump_rate")]
        jump_rate: f64,
    },
    /// State `(Y, r)` with `dY = (b − βY)dt + σ dW` and `r = R0 + R1·Y + R2·Y²`.
    Qtsm { b: f64, beta: f64, sigma: f64, r0: f64, r1: f64, r2: f64 },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BrownianMotion {} => "brownian_motion",
            ModelSpec::Pearson { .. } => "pearson",
            ModelSpec::JacobiJump { .. } => "jacobi_jump",
            ModelSpec::LevyOu { .. } => "levy_ou",
            ModelSpec::Qtsm { .. } => "qtsm",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            ModelSpec::Qtsm { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            ModelSpec::BrownianMotion {} => Ok(()),
            ModelSpec::Pearson { beta, theta, a0, a1, a2 } => {
                if !finite(&[beta, theta, a0, a1, a2]) || beta < 0.0 {
                    return bad(format!("pearson: need finite parameters and beta >= 0 (beta={beta})"));
                }
                if a0 + a1 * theta + a2 * theta * theta < 0.0 {
                    return bad("pearson: diffusion polynomial negative at theta".into());
                }
                Ok(())
            }
            ModelSpec::JacobiJump { beta, theta, sigma, lambda } => {
                if !finite(&[beta, theta, sigma, lambda])
                    || beta < 0.0
                    || !(0.0..=1.0).contains(&theta)
                    || sigma < 0.0
                    || lambda < 0.0
                {
                    return bad(format!(
                        "jacobi_jump: need beta >= 0, theta in [0,1], sigma >= 0, lambda >= 0 \
                         (beta={beta}, theta={theta}, sigma={sigma}, lambda={lambda})"
                    ));
                }
                Ok(())
            }
            ModelSpec::LevyOu { beta, theta, sigma, levy_b, levy_a, levy_m2, ref levy_moments, jump_rate } => {
                if !finite(&[beta, theta, sigma, levy_b, levy_a, levy_m2, jump_rate])
                    || !finite(levy_moments)
                    || beta < 0.0
                    || sigma < 0.0
                    || levy_m2 < 0.0
                    || jump_rate <= 0.0
                {
                    return bad("levy_ou: need beta >= 0, sigma >= 0, levy_m2 >= 0, jump_rate > 0".into());
                }
                Ok(())
            }
            ModelSpec::Qtsm { b, beta, sigma, r0, r1, r2 } => {
                if !finite(&[b, beta, sigma, r0, r1, r2]) || beta < 0.0 || sigma < 0.0 {
                    return bad("qtsm: need beta >= 0 and sigma >= 0".into());
                }
                Ok(())
            }
        }
    }

    /// Whether `x` lies in the model's state space.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.state_dim() {
            return false;
        }
        match *self {
            ModelSpec::Pearson { a0, a1, a2, .. } => a0 + a1 * x[0] + a2 * x[0] * x[0] >= 0.0,
            ModelSpec::JacobiJump { .. } => (0.0..=1.0).contains(&x[0]),
            ModelSpec::Qtsm { r0, r1, r2, .. } => {
                let r = r0 + r1 * x[0] + r2 * x[0] * x[0];
                (x[1] - r).abs() <= 1e-9 * (1.0 + r.abs())
            }
            _ => true,
        }
    }

    /// Coordinate-wise description of the generator.
    fn operator(&self) -> Result<PolyOperator> {
        self.validate()?;
        let uni = Polynomial::univariate;
        Ok(match self {
            ModelSpec::BrownianMotion {} => PolyOperator::one_dim(Polynomial::zero(), uni(&[1.0]), Jump::None),
            &ModelSpec::Pearson { beta, theta, a0, a1, a2 } => {
                PolyOperator::one_dim(uni(&[beta * theta, -beta]), uni(&[a0, a1, a2]), Jump::None)
            }
            &ModelSpec::JacobiJump { beta, theta, sigma, lambda } => {
                let s2 = sigma * sigma;
                PolyOperator::one_dim(uni(&[beta * theta, -beta]), uni(&[0.0, s2, -s2]), Jump::Reflection { lambda })
            }
            ModelSpec::LevyOu { beta, theta, sigma, levy_b, levy_a, levy_m2, levy_moments, .. } => {
                let mut moments = vec![0.0, 0.0, *levy_m2];
                moments.extend_from_slice(levy_moments);
                let diff = (sigma * levy_a).powi(2);
                PolyOperator::one_dim(
                    uni(&[sigma * levy_b + beta * theta, -beta]),
                    uni(&[diff]),
                    Jump::Additive { scale: *sigma, moments },
                )
            }
            &ModelSpec::Qtsm { b, beta, sigma, r0, r1, r2 } => {
                let s2 = sigma * sigma;
                let y = |c: f64| Polynomial::variable(2, 0, c);
                let r = |c: f64| Polynomial::variable(2, 1, c);
                let k = |c: f64| Polynomial::constant(2, c);
                let y2 = |c: f64| Polynomial::term(MultiIndex::new(vec![2, 0]), c);
                let drift_r =
                    k(r1 * b + r2 * s2 + 2.0 * r0 * beta).add(&y(2.0 * r2 * b + r1 * beta)).add(&r(-2.0 * beta));
                PolyOperator {
                    dim: 2,
                    drift: vec![k(b).add(&y(-beta)), drift_r],
                    diffusion: vec![
                        vec![k(s2), k(s2 * r1).add(&y(2.0 * s2 * r2))],
                        vec![
                            k(s2 * r1).add(&y(2.0 * s2 * r2)),
                            k(s2 * r1 * r1).add(&y(4.0 * s2 * r1 * r2)).add(&y2(4.0 * s2 * r2 * r2)),
                        ],
                    ],
                    jump: Jump::None,
                }
            }
        })
    }
}

enum Jump {
    None,
    /// `λ(g(1 − x) − g(x))`.
    Reflection {
        lambda: f64,
    },
    /// `∫ g(x + sξ) − g(x) − g'(x)sξ ν(dξ)` from the moments `∫ξʲν`.
    Additive {
        scale: f64,
        moments: Vec<f64>,
    },
}

/// `𝒢g = Σ bᵢ∂ᵢg + ½Σ aᵢⱼ∂ᵢ∂ⱼg + jump(g)` with polynomial coefficients.
struct PolyOperator {
    dim: usize,
    drift: Vec<Polynomial>,
    diffusion: Vec<Vec<Polynomial>>,
    jump: Jump,
}

impl PolyOperator {
    fn one_dim(drift: Polynomial, diffusion: Polynomial, jump: Jump) -> Self {
        PolyOperator { dim: 1, drift: vec![drift], diffusion: vec![vec![diffusion]], jump }
    }

    fn apply(&self, m: &MultiIndex) -> Result<Polynomial> {
        let g = Polynomial::term(m.clone(), 1.0);
        let mut out = Polynomial::zero();
        for i in 0..self.dim {
            let gi = g.derivative(i);
            out = out.add(&self.drift[i].mul(&gi));
            for j in 0..self.dim {
                out = out.add(&self.diffusion[i][j].mul(&gi.derivative(j)).scale(0.5));
            }
        }
        match &self.jump {
            Jump::None => {}
            Jump::Reflection { lambda } => {
                let n = m.exponents()[0];
                let reflected = Polynomial::univariate(&[1.0, -1.0]).pow(n, 1);
                out = out.add(&reflected.add(&g.scale(-1.0)).scale(*lambda));
            }
            Jump::Additive { scale, moments } => {
                let n = m.exponents()[0] as usize;
                for j in 2..=n {
                    let mj = *moments.get(j).ok_or(Error::MissingLevyMoment { order: j, degree: n })?;
                    let c = binomial(n, j) * scale.powi(j as i32) * mj;
                    out.add_term(MultiIndex::new(vec![(n - j) as u32]), c);
                }
            }
        }
        Ok(out)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `A = 𝒢|_{𝒫_k}` with lazily computed decompositions.
#[derive(Debug)]
pub struct GeneratorMatrix {
    a: DMatrix<f64>,
    basis: Arc<Basis>,
    model: Option<ModelSpec>,
    degree: usize,
    plan: OnceLock<Result<Arc<MatrixFunctionPlan>>>,
}

impl Clone for GeneratorMatrix {
    fn clone(&self) -> Self {
        let plan = OnceLock::new();
        if let Some(p) = self.plan.get() {
            let _ = plan.set(p.clone());
        }
        GeneratorMatrix {
            a: self.a.clone(),
            basis: self.basis.clone(),
            model: self.model.clone(),
            degree: self.degree,
            plan,
        }
    }
}

/// Builds `𝒢|_{𝒫_k}` for `model`.
pub fn generator_matrix(model: &ModelSpec, k: usize) -> Result<GeneratorMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("generator degree must be at least 1".into()));
    }
    let op = model.operator()?;
    let basis = build_basis(model.state_dim(), k)?;
    let n = basis.size();
    let mut a = DMatrix::zeros(n, n);
    for (i, m) in basis.ordering().iter().enumerate() {
        let image = op.apply(m)?.to_polyvec(&basis)?;
        a.set_column(i, image.coeffs());
    }
    Ok(GeneratorMatrix { a, basis, model: Some(model.clone()), degree: k, plan: OnceLock::new() })
}

impl GeneratorMatrix {
    /// Wraps an arbitrary square matrix acting on `basis` coordinates.
    pub fn from_matrix(a: DMatrix<f64>, basis: Arc<Basis>) -> Result<Self> {
        if a.nrows() != basis.size() || a.ncols() != basis.size() {
            return Err(Error::DimensionMismatch { expected: basis.size(), got: a.nrows() });
        }
        let degree = basis.degree();
        Ok(GeneratorMatrix { a, basis, model: None, degree, plan: OnceLock::new() })
    }

    /// Univariate convenience constructor, `basis = 𝒫_{n−1}` over ℝ.
    pub fn from_matrix_1d(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        Self::from_matrix(a, build_basis(1, n - 1)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        self.model.as_ref()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Schur and eigen decompositions, computed once.
    pub fn plan(&self) -> Result<&MatrixFunctionPlan> {
        match self.plan.get_or_init(|| MatrixFunctionPlan::new(&self.a).map(Arc::new)) {
            Ok(p) => Ok(p),
            Err(e) => Err(e.clone()),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        Ok(self.plan()?.eigenvalues().iter().copied().collect())
    }
}

/// `π(A)`: the largest real part of the spectrum.
pub fn stability_index(g: &GeneratorMatrix) -> Result<f64> {
    Ok(g.eigenvalues()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Zero-stability: one simple eigenvalue within `tol·‖A‖` of zero and every
/// other eigenvalue with real part below `−10·tol·‖A‖`.
pub fn is_zero_stable(g: &GeneratorMatrix, tol: f64) -> Result<bool> {
    let scale = g.matrix().norm().max(f64::MIN_POSITIVE);
    let thr = tol * scale;
    let eig = g.eigenvalues()?;
    let near_zero = eig.iter().filter(|z| z.norm() <= thr).count();
    if near_zero != 1 {
        return Ok(false);
    }
    let others_ok = eig.iter().filter(|z| z.norm() > thr).all(|z| z.re < -10.0 * thr);
    if !others_ok {
        return Ok(false);
    }
    let svd = g.matrix().clone().svd(false, false);
    let nullity = svd.singular_values.iter().filter(|&&s| s <= thr).count();
    Ok(nullity == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(beta: f64, theta: f64, a0: f64, a1: f64, a2: f64) -> ModelSpec {
        ModelSpec::Pearson { beta, theta, a0, a1, a2 }
    }

    fn jacobi(beta: f64, theta: f64, sigma: f64, lambda: f64) -> ModelSpec {
        ModelSpec::JacobiJump { beta, theta, sigma, lambda }
    }

    #[test]
    fn brownian_generator_is_shifted_superdiagonal() {
        let g = generator_matrix(&ModelSpec::BrownianMotion {}, 4).unwrap();
        let a = g.matrix();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if j == i + 2 { (j * (j - 1)) as f64 / 2.0 } else { 0.0 };
                assert_eq!(a[(i, j)], expected);
            }
        }
        assert_eq!(stability_index(&g).unwrap(), 0.0);
        assert!(!is_zero_stable(&generator_matrix(&ModelSpec::BrownianMotion {}, 2).unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn two_by_two_examples() {
        let (beta, theta) = (1.7, 0.4);
        let g = generator_matrix(&pearson(beta, theta, 0.3, 0.2, 0.1), 1).unwrap();
        assert_eq!(g.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, beta * theta, 0.0, -beta]));
        let (sigma, lambda) = (0.5, 0.8);
        let g = generator_matrix(&jacobi(beta, theta, sigma, lambda), 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, beta * theta + lambda, 0.0, -(beta + 2.0 * lambda)]);
        assert!((g.matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn qtsm_first_order_structure() {
        let m = ModelSpec::Qtsm { b: 0.2, beta: 1.3, sigma: 0.4, r0: 0.01, r1: 0.5, r2: 0.7 };
        let g = generator_matrix(&m, 1).unwrap();
        let a = g.matrix();
        assert_eq!(a.nrows(), 3);
        assert_eq!((a[(0, 0)], a[(1, 1)], a[(2, 2)]), (0.0, -1.3, -2.6));
        for j in 0..3 {
            for i in (j + 1)..3 {
                assert_eq!(a[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn stability_examples() {
        let g = generator_matrix(&pearson(2.0, 1.0, 1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(stability_index(&g).unwrap(), 0.0);
        let d = GeneratorMatrix::from_matrix_1d(DMatrix::from_diagonal(&nalgebra::dvector![1.0, -3.0])).unwrap();
        assert_eq!(stability_index(&d).unwrap(), 1.0);
        let d = GeneratorMatrix::from_matrix_1d(DMatrix::from_diagonal(&nalgebra::dvector![0.0, -1.0, -2.0])).unwrap();
        assert!(is_zero_stable(&d, 1e-9).unwrap());
        let g = generator_matrix(&pearson(1.0, 0.5, 0.2, 0.3, 0.4), 2).unwrap();
        let mut eig: Vec<f64> = g.eigenvalues().unwrap().iter().map(|z| z.re).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        assert!((eig[0]).abs() < 1e-15 && (eig[1] + 1.0).abs() < 1e-15 && (eig[2] - (0.4 - 2.0)).abs() < 1e-15);
        assert!(is_zero_stable(&g, 1e-9).unwrap());
    }

    #[test]
    fn levy_moments_are_required_above_degree_two() {
        let m = ModelSpec::LevyOu {
            beta: 1.0,
            theta: 0.0,
            sigma: 0.5,
            levy_b: 0.1,
            levy_a: 1.0,
            levy_m2: 0.3,
            levy_moments: vec![],
            jump_rate: 1.0,
        };
        assert!(generator_matrix(&m, 2).is_ok());
        assert!(matches!(generator_matrix(&m, 3), Err(Error::MissingLevyMoment { order: 3, .. })));
        let g = generator_matrix(&m, 2).unwrap();
        // 𝒢x² = 2x(σb − β(x−θ)) + (σa)² + σ²m₂.
        assert!((g.matrix()[(0, 2)] - (0.25 + 0.25 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn jacobi_without_jumps_is_the_jacobi_diffusion() {
        let g = generator_matrix(&jacobi(1.2, 0.3, 0.7, 0.0), 4).unwrap();
        let p = generator_matrix(&pearson(1.2, 0.3, 0.0, 0.49, -0.49), 4).unwrap();
        assert!((g.matrix() - p.matrix()).amax() < 1e-15);
    }
}
