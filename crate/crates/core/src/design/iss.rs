use nalgebra::DMatrix;

use super::project::output_feedback_matrix;
use crate::motor::PlantModel;
use crate::numerics::{spectral_abscissa, symmetric_part_lambda_max};
use crate::Result;

/// Threshold on the closed-loop decay rate in the storage-function test.
pub const ISS_DECAY_BOUND: f64 = -0.5;

/// Disturbance-to-state stability verdicts for `A − B·K_o·C`.
///
/// With storage function `W = ½‖e‖²` the sufficient conditions are a
/// closed-loop rate below `−½` and `GᵀG > 0`. Two rates are reported:
/// the spectral abscissa, and the largest eigenvalue of the symmetric part,
/// which is the one that actually bounds `eᵀMe`. The abscissa never
/// exceeds the symmetric-part value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssReport {
    pub spectral_abscissa: f64,
    pub sym_lambda_max: f64,
    pub gtg: f64,
    pub passes_paper_condition: bool,
    pub passes_strict_condition: bool,
    pub gtg_positive: bool,
}

pub fn iss_check(model: &PlantModel, k_out: &DMatrix<f64>) -> Result<IssReport> {
    let closed = output_feedback_matrix(model, k_out)?;
    let abscissa = spectral_abscissa(&closed)?;
    let sym = symmetric_part_lambda_max(&closed)?;
    let g = model.g_dist();
    let gtg = (g.transpose() * g)[(0, 0)];
    Ok(IssReport {
        spectral_abscissa: abscissa,
        sym_lambda_max: sym,
        gtg,
        passes_paper_condition: abscissa < ISS_DECAY_BOUND,
        passes_strict_condition: sym < ISS_DECAY_BOUND,
        gtg_positive: gtg > 0.0,
    })
}
