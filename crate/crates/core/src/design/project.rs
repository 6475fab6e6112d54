use nalgebra::DMatrix;

use crate::numerics::{condition_number, eig_decompose, Spectrum, MAX_CONDITION};
use crate::{motor::PlantModel, Error, Result};

/// Real basis of the invariant subspace spanned by the retained
/// eigenvectors. A complex pair contributes `(Re v, Im v)`.
pub fn realified_basis(spec: &Spectrum, retained: &[usize]) -> DMatrix<f64> {
    let mut cols = Vec::with_capacity(retained.len());
    let mut done = vec![false; spec.len()];
    for &i in retained {
        if done[i] {
            continue;
        }
        done[i] = true;
        let v = spec.eigenvector(i);
        cols.push(v.map(|c| c.re));
        if let Some(p) = spec.pair_index(i) {
            done[p] = true;
            cols.push(v.map(|c| c.im));
        }
    }
    DMatrix::from_columns(&cols)
}

/// Output-feedback gain `K_o = K·V_r·(C·V_r)⁻¹`.
///
/// `A − B·K_o·C` then agrees with `A − B·K` on the retained invariant
/// subspace, so the retained eigenvalues carry over.
pub fn project_gain(
    k_full: &DMatrix<f64>,
    full_spectrum: &Spectrum,
    retained: &[usize],
    c_output: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = full_spectrum.len();
    if k_full.nrows() != 1 || k_full.ncols() != n {
        return Err(Error::dim(
            "project_gain: k_full",
            format!("1x{n}"),
            format!("{}x{}", k_full.nrows(), k_full.ncols()),
        ));
    }
    if c_output.ncols() != n {
        return Err(Error::dim(
            "project_gain: c_output",
            format!("{n} columns"),
            c_output.ncols(),
        ));
    }
    if retained.len() != c_output.nrows() {
        return Err(Error::InvalidInput(format!(
            "retaining {} eigenvalues needs {} measured outputs, C has {}",
            retained.len(),
            retained.len(),
            c_output.nrows()
        )));
    }
    if retained.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("retained index out of range".into()));
    }
    if !full_spectrum.is_conjugation_closed(retained) {
        return Err(Error::SelectionInfeasible { r: retained.len() });
    }

    let vr = realified_basis(full_spectrum, retained);
    let cvr = c_output * &vr;
    let condition = condition_number(&cvr);
    if condition > MAX_CONDITION {
        return Err(Error::ProjectionInfeasible {
            retained: retained.to_vec(),
            condition,
        });
    }
    // K_o = (K V_r)(C V_r)⁻¹  ⇔  (C V_r)ᵀ K_oᵀ = (K V_r)ᵀ
    let kvr = k_full * &vr;
    let kot = cvr
        .transpose()
        .lu()
        .solve(&kvr.transpose())
        .ok_or(Error::ProjectionInfeasible {
            retained: retained.to_vec(),
            condition,
        })?;
    Ok(kot.transpose())
}

/// `A − B·K_o·C`.
pub fn output_feedback_matrix(model: &PlantModel, k_out: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = model.n_outputs();
    if k_out.nrows() != 1 || k_out.ncols() != r {
        return Err(Error::dim(
            "output feedback gain",
            format!("1x{r}"),
            format!("{}x{}", k_out.nrows(), k_out.ncols()),
        ));
    }
    Ok(model.a() - model.b_input() * k_out * model.c_output())
}

/// Spectrum of `A − B·K_o·C`.
pub fn output_feedback_spectrum(model: &PlantModel, k_out: &DMatrix<f64>) -> Result<Spectrum> {
    eig_decompose(&output_feedback_matrix(model, k_out)?)
}
