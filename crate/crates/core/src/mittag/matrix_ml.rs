use nalgebra::DMatrix;

use super::matfun::{MatrixFunctionResult, MittagLeffler, Route};
use super::scalar::gamma_fn;
use crate::error::{Error, Result};
use crate::models::GeneratorMatrix;

/// Returns `Some(N)` with `A^N ≈ 0` when `A` is numerically nilpotent.
pub fn nilpotency_index(a: &DMatrix<f64>) -> Option<usize> {
    let n = a.nrows();
    let norm = a.amax();
    if norm == 0.0 {
        return Some(1);
    }
    let mut power = a.clone();
    for m in 1..=n {
        if power.amax() <= 1e-13 * norm.powi(m as i32) * (n as f64).powi(m as i32 - 1) {
            return Some(m);
        }
        power = &power * a;
    }
    None
}

/// `E_α(t^α·A)` with the route used to compute it.
pub fn ml_matrix_detailed(alpha: f64, t: f64, g: &GeneratorMatrix) -> Result<MatrixFunctionResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    let a = g.matrix();
    let n = a.nrows();
    if t == 0.0 {
        return Ok(MatrixFunctionResult { value: DMatrix::identity(n, n), route: Route::Nilpotent, imag_residue: 0.0 });
    }
    let scale = t.powf(alpha);
    if let Some(m) = nilpotency_index(a) {
        let scaled = a * scale;
        let mut sum = DMatrix::identity(n, n);
        let mut power = DMatrix::identity(n, n);
        for l in 1..m {
            power = &power * &scaled;
            sum += &power / gamma_fn(alpha * l as f64 + 1.0);
        }
        return Ok(MatrixFunctionResult { value: sum, route: Route::Nilpotent, imag_residue: 0.0 });
    }
    g.plan()?.apply(&MittagLeffler { alpha }, scale)
}

/// `E_α(t^α·A)`.
pub fn ml_matrix(alpha: f64, t: f64, g: &GeneratorMatrix) -> Result<DMatrix<f64>> {
    ml_matrix_detailed(alpha, t, g).map(|r| r.value)
}
