//! Mittag-Leffler functions of scalars and matrices, and generic matrix functions.

mod matfun;
mod matrix_ml;
mod scalar;

pub use matfun::{
    apply_scalar_function, complex_schur, EntireFunction, Exp, FnWithDerivatives, MatrixFunctionPlan,
    MatrixFunctionResult, MittagLeffler, Route, ScalarFunction, SchurForm, SpectralDecomposition, CLUSTER_RADIUS,
    DIAGONALIZABLE_CONDITION_LIMIT,
};
pub use matrix_ml::{ml_matrix, ml_matrix_detailed, nilpotency_index};
pub use scalar::{
    cauchy_derivative, cauchy_derivatives, gamma_fn, ml_real, ml_scalar, ml_scalar_deriv, ml_scalar_derivs,
    MAX_DERIVATIVE_ORDER,
};
