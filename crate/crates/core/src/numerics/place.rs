use nalgebra::DMatrix;

use super::{eig_decompose, ensure_finite, ensure_square, Tolerances, C64};
use crate::{Error, Result};

/// `[b, Ab, …, Aⁿ⁻¹b]` for a single input column.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut cols = Vec::with_capacity(n);
    let mut v = b.column(0).into_owned();
    for _ in 0..n {
        cols.push(v.clone());
        v = a * v;
    }
    DMatrix::from_columns(&cols)
}

/// Monic characteristic polynomial with the given roots, lowest order
/// first: `[c₀, c₁, …, cₙ₋₁, 1]`. Imaginary parts cancel for
/// conjugation-closed roots and are dropped.
pub fn char_poly_coeffs(roots: &[C64]) -> Vec<f64> {
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    for &root in roots {
        let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * root;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

/// Single-input state feedback `K` such that `eig(A − bK)` equals `targets`
/// (Ackermann's formula).
pub fn place_poles_siso(a: &DMatrix<f64>, b: &DMatrix<f64>, targets: &[C64]) -> Result<DMatrix<f64>> {
    place_poles_siso_with(a, b, targets, &Tolerances::default())
}

pub fn place_poles_siso_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    targets: &[C64],
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    ensure_square(a, "place_poles_siso: a")?;
    ensure_finite(a, "place_poles_siso: a")?;
    ensure_finite(b, "place_poles_siso: b")?;
    let n = a.nrows();
    if b.nrows() != n || b.ncols() != 1 {
        return Err(Error::dim(
            "place_poles_siso: b",
            format!("{n}x1"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    if targets.len() != n {
        return Err(Error::dim("place_poles_siso: targets", n, targets.len()));
    }
    if targets.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(Error::NonFinite("place_poles_siso: targets"));
    }
    if !conjugation_closed(targets) {
        return Err(Error::InvalidInput(
            "pole placement targets are not closed under conjugation".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(1, 0));
    }

    let wc = controllability_matrix(a, b);
    let sv = wc.singular_values();
    let rank_tol = sv.max() * n as f64 * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > rank_tol).count();
    if rank < n {
        return Err(Error::Uncontrollable { rank, n });
    }

    // φ(A) by Horner: (((A + c_{n-1})A + c_{n-2})A + …) + c₀
    let coeffs = char_poly_coeffs(targets);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut phi = eye.clone();
    for k in (0..n).rev() {
        phi = &phi * a + &eye * coeffs[k];
    }

    // K = e_nᵀ Wc⁻¹ φ(A); solve Wcᵀ x = e_n
    let mut en = DMatrix::zeros(n, 1);
    en[(n - 1, 0)] = 1.0;
    let x = wc
        .transpose()
        .lu()
        .solve(&en)
        .ok_or(Error::Uncontrollable { rank: n - 1, n })?;
    let k = x.transpose() * phi;

    let closed = a - b * &k;
    let placed = eig_decompose(&closed)?;
    let err = placed.match_distance(targets);
    if err > tol.placement {
        return Err(Error::Numerical {
            context: "place_poles_siso",
            detail: format!("placed eigenvalues miss targets by {err:e}"),
        });
    }
    Ok(k)
}

fn conjugation_closed(values: &[C64]) -> bool {
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut used = vec![false; values.len()];
    for i in 0..values.len() {
        if used[i] {
            continue;
        }
        if values[i].im.abs() <= tol {
            used[i] = true;
            continue;
        }
        let target = values[i].conj();
        match (0..values.len()).find(|&j| j != i && !used[j] && (values[j] - target).norm() <= tol) {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}
