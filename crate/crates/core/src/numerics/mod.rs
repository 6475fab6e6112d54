//! Dense real-matrix kernels used by the design code: nonsymmetric
//! eigendecomposition, the continuous algebraic Riccati equation,
//! single-input pole placement and a few small helpers.

mod care;
mod eig;
mod place;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

pub use care::{care_residual, solve_care, solve_care_with};
pub use eig::{eig_decompose, eig_decompose_with, Spectrum};
pub use place::{char_poly_coeffs, controllability_matrix, place_poles_siso, place_poles_siso_with};

pub use nalgebra::Complex;
pub type C64 = Complex<f64>;

/// Relative eigenpair residual bound, `‖Av − λv‖ ≤ tol·‖A‖_F`.
pub const EIG_RESIDUAL_TOL: f64 = 1e-9;
/// Relative CARE residual bound, scaled by `max(1, ‖Q‖_F)`.
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;
/// Absolute eigenvalue error allowed after pole placement.
pub const PLACEMENT_TOL: f64 = 1e-6;
/// Largest admissible condition number for matrices that must be inverted.
pub const MAX_CONDITION: f64 = 1e12;

/// Per-call overrides for the module tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub eig_residual: f64,
    pub care_residual: f64,
    pub placement: f64,
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig_residual: EIG_RESIDUAL_TOL,
            care_residual: CARE_RESIDUAL_TOL,
            placement: PLACEMENT_TOL,
            max_condition: MAX_CONDITION,
        }
    }
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

pub(crate) fn ensure_square(m: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dim(
            context,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

/// 2-norm condition number from the singular values; `inf` when singular.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Largest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
///
/// This is the tight constant in `eᵀMe ≤ λ·‖e‖²`, which the plain spectral
/// abscissa of a nonsymmetric `M` is not.
pub fn symmetric_part_lambda_max(m: &DMatrix<f64>) -> Result<f64> {
    ensure_square(m, "symmetric_part_lambda_max")?;
    ensure_finite(m, "symmetric_part_lambda_max")?;
    if m.nrows() == 0 {
        return Err(Error::InvalidInput("empty matrix has no eigenvalues".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.max())
}

/// Largest real part over the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eig_decompose(m)?.abscissa())
}
