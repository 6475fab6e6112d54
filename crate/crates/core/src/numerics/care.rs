use nalgebra::{DMatrix, SymmetricEigen};

use super::{condition_number, eig_decompose_with, ensure_finite, ensure_square, Tolerances};
use crate::{Error, Result};

/// Newton refinement builds an n²×n² Kronecker system; skip it beyond this.
const MAX_REFINE_STATES: usize = 16;
const MAX_REFINE_STEPS: usize = 8;
const SIGN_MAX_ITER: usize = 100;

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    solve_care_with(a, b, q, r, &Tolerances::default())
}

/// As [`solve_care`] with explicit tolerances.
///
/// The stable invariant subspace of the Hamiltonian
/// `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]` is spanned (in realified form) by
/// `[U₁; U₂]` and `P = U₂U₁⁻¹`. Newton–Kleinman steps then polish `P`. If
/// the residual bound is still missed, the subspace is recomputed through
/// the matrix sign function.
pub fn solve_care_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    ensure_square(a, "solve_care: a")?;
    ensure_square(q, "solve_care: q")?;
    ensure_square(r, "solve_care: r")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::dim("solve_care: b", format!("{n} rows"), b.nrows()));
    }
    if q.nrows() != n {
        return Err(Error::dim("solve_care: q", format!("{n}x{n}"), q.nrows()));
    }
    if r.nrows() != b.ncols() {
        return Err(Error::dim(
            "solve_care: r",
            format!("{0}x{0}", b.ncols()),
            r.nrows(),
        ));
    }
    for (m, name) in [
        (a, "solve_care: a"),
        (b, "solve_care: b"),
        (q, "solve_care: q"),
        (r, "solve_care: r"),
    ] {
        ensure_finite(m, name)?;
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    if (r - r.transpose()).norm() > 1e-12 * r.norm().max(1.0) {
        return Err(Error::InvalidInput("r is not symmetric".into()));
    }
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("r is not positive definite".into()))?
        .inverse();
    if (q - q.transpose()).norm() > 1e-12 * q.norm().max(1.0) {
        return Err(Error::InvalidInput("q is not symmetric".into()));
    }
    let q_min = SymmetricEigen::new(q.clone()).eigenvalues.min();
    if q_min < -1e-12 * q.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "q is not positive semidefinite (min eigenvalue {q_min:e})"
        )));
    }

    let s = b * &r_inv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let spec = eig_decompose_with(&h, tol)?;
    let axis_tol = 1e-10 * h.norm().max(1.0);
    if let Some(l) = spec.eigenvalues().iter().find(|l| l.re.abs() <= axis_tol) {
        return Err(Error::DesignInfeasible(format!(
            "Hamiltonian has eigenvalue {l} on the imaginary axis; no stabilizing solution"
        )));
    }
    let stable: Vec<usize> = (0..spec.len()).filter(|&i| spec.eigenvalue(i).re < 0.0).collect();
    if stable.len() != n {
        return Err(Error::DesignInfeasible(format!(
            "Hamiltonian has {} stable eigenvalues, expected {n}",
            stable.len()
        )));
    }

    let mut basis = Vec::with_capacity(n);
    let mut seen = vec![false; spec.len()];
    for &i in &stable {
        if seen[i] {
            continue;
        }
        let v = spec.eigenvector(i);
        seen[i] = true;
        basis.push(v.map(|c| c.re));
        if let Some(p) = spec.pair_index(i) {
            seen[p] = true;
            basis.push(v.map(|c| c.im));
        }
    }
    let u = DMatrix::from_columns(&basis);
    let u1 = u.rows(0, n).into_owned();
    let u2 = u.rows(n, n).into_owned();
    let cond = condition_number(&u1);
    if cond > tol.max_condition {
        return Err(Error::DesignInfeasible(format!(
            "stable Hamiltonian subspace is not a graph (cond(U1) = {cond:e}); pair is not stabilizable"
        )));
    }
    let bound = tol.care_residual * q.norm().max(1.0);
    let mut p = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .map(|pt| refine(a, b, q, r, &s, symmetrize(&pt.transpose())))
        .ok_or_else(|| Error::Numerical {
            context: "solve_care",
            detail: "U1 is singular".into(),
        })?;
    // Eigenvectors of nearly defective Hamiltonians can be poor; the sign
    // function gets the same subspace without them.
    let first = care_residual(a, b, q, r, &p);
    if first.is_nan() || first > bound {
        if let Some(alt) = sign_function_solution(&h) {
            let alt = refine(a, b, q, r, &s, alt);
            if care_residual(a, b, q, r, &alt) < care_residual(a, b, q, r, &p) {
                p = alt;
            }
        }
    }

    let p_min = SymmetricEigen::new(p.clone()).eigenvalues.min();
    if p_min < -1e-10 * p.norm().max(1.0) {
        return Err(Error::DesignInfeasible(format!(
            "Riccati solution is indefinite (min eigenvalue {p_min:e})"
        )));
    }
    let closed = a - &s * &p;
    let abscissa = super::spectral_abscissa(&closed)?;
    if abscissa >= 0.0 {
        return Err(Error::DesignInfeasible(format!(
            "closed loop A - BR^-1B'P is not Hurwitz (abscissa {abscissa:e})"
        )));
    }
    let res = care_residual(a, b, q, r, &p);
    if res.is_nan() || res > bound {
        return Err(Error::Numerical {
            context: "solve_care",
            detail: format!("Riccati residual {res:e} exceeds {bound:e}"),
        });
    }
    Ok(p)
}

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`. Returns `inf` when `r` is
/// singular.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let Some(r_inv) = r.clone().try_inverse() else {
        return f64::INFINITY;
    };
    let pb = p * b;
    (a.transpose() * p + p * a - &pb * r_inv * pb.transpose() + q).norm()
}

/// Newton–Kleinman polishing; keeps the best iterate.
fn refine(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    mut p: DMatrix<f64>,
) -> DMatrix<f64> {
    if a.nrows() > MAX_REFINE_STATES {
        return p;
    }
    let mut res = care_residual(a, b, q, r, &p);
    for _ in 0..MAX_REFINE_STEPS {
        let Some(next) = kleinman_step(a, s, q, &p) else {
            break;
        };
        let next_res = care_residual(a, b, q, r, &next);
        if next_res.partial_cmp(&res) != Some(std::cmp::Ordering::Less) {
            break;
        }
        p = next;
        res = next_res;
    }
    p
}

/// `P` from the matrix sign of the Hamiltonian: the stable subspace is the
/// null space of `sign(H) + I`, so `[W₁₂; W₂₂ + I] P = −[W₁₁ + I; W₂₁]`.
fn sign_function_solution(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n2 = h.nrows();
    let n = n2 / 2;
    let mut w = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = w.clone().lu();
        let det = lu.determinant();
        let inv = lu.try_inverse()?;
        let c = det.abs().powf(1.0 / n2 as f64);
        if !c.is_finite() || c == 0.0 {
            return None;
        }
        let next = (&w / c + inv * c) * 0.5;
        let change = (&next - &w).norm();
        w = next;
        if change <= 1e-13 * w.norm() {
            break;
        }
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(n2, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(n2, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&-(w.view((0, 0), (n, n)) + &eye));
    rhs.view_mut((n, 0), (n, n)).copy_from(&-w.view((n, 0), (n, n)));
    let p = lhs.svd(true, true).solve(&rhs, f64::EPSILON).ok()?;
    p.iter().all(|v| v.is_finite()).then(|| symmetrize(&p))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// One Newton step: solve `AcᵀX + XAc = −(Q + PSP)` with `Ac = A − SP`.
fn kleinman_step(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let ac = a - s * p;
    let rhs = -(q + p * s * p);
    let eye = DMatrix::<f64>::identity(n, n);
    let act = ac.transpose();
    let lhs = eye.kronecker(&act) + act.kronecker(&eye);
    let vec_rhs = DMatrix::from_column_slice(n * n, 1, rhs.as_slice());
    let x = lhs.lu().solve(&vec_rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    x.iter().all(|v| v.is_finite()).then(|| symmetrize(&x))
}
