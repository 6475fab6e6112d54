use std::cmp::Ordering;

use nalgebra::{linalg::Schur, DMatrix, DVector, QR, SVD};

use super::{ensure_finite, ensure_square, Tolerances, C64};
use crate::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;
const SVD_MAX_ITER: usize = 10_000;

/// Eigenvalues and unit eigenvectors of a real square matrix.
///
/// Entries are sorted by ascending `|Re λ|`, then ascending `Im λ`, so the
/// slowest modes come first. Each eigenvector has unit 2-norm and its first
/// significant component is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<C64>,
    eigenvectors: Vec<DVector<C64>>,
    pair_index: Vec<Option<usize>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> C64 {
        self.eigenvalues[i]
    }

    pub fn eigenvectors(&self) -> &[DVector<C64>] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> &DVector<C64> {
        &self.eigenvectors[i]
    }

    /// Index of the complex-conjugate partner, `None` for real eigenvalues.
    pub fn pair_index(&self, i: usize) -> Option<usize> {
        self.pair_index[i]
    }

    pub fn is_real(&self, i: usize) -> bool {
        self.pair_index[i].is_none()
    }

    /// Largest real part (spectral abscissa).
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every complex index in `indices` comes with its partner.
    pub fn is_conjugation_closed(&self, indices: &[usize]) -> bool {
        indices.iter().all(|&i| match self.pair_index.get(i) {
            Some(Some(p)) => indices.contains(p),
            Some(None) => true,
            None => false,
        })
    }

    /// Worst distance when each target is matched to the nearest still
    /// unmatched eigenvalue. `inf` if there are more targets than eigenvalues.
    pub fn match_distance(&self, targets: &[C64]) -> f64 {
        let mut used = vec![false; self.len()];
        let mut worst = 0.0_f64;
        for t in targets {
            let best = self
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, l)| (i, (l - t).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((i, d)) => {
                    used[i] = true;
                    worst = worst.max(d);
                }
                None => return f64::INFINITY,
            }
        }
        worst
    }

    /// Index of the eigenvalue nearest to `target`, if within `tol`.
    pub fn find(&self, target: C64, tol: f64) -> Option<usize> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| (i, (l - target).norm()))
            .filter(|(_, d)| *d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Largest `‖Mv − λv‖` over all pairs.
    pub fn max_residual(&self, m: &DMatrix<f64>) -> f64 {
        let mc = m.map(|x| C64::new(x, 0.0));
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(l, v)| (&mc * v - v * *l).norm())
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues from the real Schur form. The shifted QR iteration can stall
/// on spectra symmetric about both axes (Hamiltonian matrices); if it does,
/// retry on a fixed orthogonal similarity of the matrix.
fn schur_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<C64>> {
    let n = m.nrows();
    let attempt = |x: DMatrix<f64>| {
        Schur::try_new(x, f64::EPSILON, SCHUR_MAX_ITER)
            .map(|s| s.complex_eigenvalues().iter().copied().collect())
    };
    attempt(m.clone()).or_else(|| {
        (1..=3).find_map(|k| {
            let seed = DMatrix::from_fn(n, n, |i, j| ((1 + i * 7 + j * 3 + k * 11) as f64).sin());
            let q = QR::new(seed).q();
            attempt(q.transpose() * m * &q)
        })
    })
}

/// Eigendecomposition of a real square matrix with default tolerances.
pub fn eig_decompose(m: &DMatrix<f64>) -> Result<Spectrum> {
    eig_decompose_with(m, &Tolerances::default())
}

pub fn eig_decompose_with(m: &DMatrix<f64>, tol: &Tolerances) -> Result<Spectrum> {
    ensure_square(m, "eig_decompose")?;
    ensure_finite(m, "eig_decompose")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            eigenvectors: vec![],
            pair_index: vec![],
        });
    }
    let scale = m.norm();

    let mut values = schur_eigenvalues(m).ok_or_else(|| Error::Numerical {
        context: "eig_decompose",
        detail: format!("Schur iteration did not converge on {n}x{n} matrix"),
    })?;
    if values.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::Numerical {
            context: "eig_decompose",
            detail: "non-finite eigenvalue from Schur form".into(),
        });
    }
    values.sort_by(dominance_order);

    let pair_index = pair_conjugates(&values)?;

    // Vectors are computed for real and upper-half-plane eigenvalues; the
    // lower-half-plane partners take the conjugate.
    let group_tol = 1e-12 * scale.max(1.0);
    let null_tol = tol.eig_residual * scale;
    let mut vectors: Vec<Option<DVector<C64>>> = vec![None; n];
    for i in 0..n {
        if vectors[i].is_some() || values[i].im < 0.0 {
            continue;
        }
        let group: Vec<usize> = (i..n)
            .filter(|&j| {
                vectors[j].is_none() && values[j].im >= 0.0 && (values[j] - values[i]).norm() <= group_tol
            })
            .collect();
        let basis = null_vectors(m, values[i], group.len(), null_tol)?;
        for (j, v) in group.into_iter().zip(basis) {
            vectors[j] = Some(normalize(v));
        }
    }
    for i in 0..n {
        if vectors[i].is_none() {
            let p = pair_index[i].expect("lower-half-plane eigenvalue has a partner");
            vectors[i] = Some(vectors[p].as_ref().expect("partner computed").conjugate());
        }
    }

    let spectrum = Spectrum {
        eigenvalues: values,
        eigenvectors: vectors.into_iter().map(|v| v.unwrap()).collect(),
        pair_index,
    };

    let residual = spectrum.max_residual(m);
    if residual > tol.eig_residual * scale {
        return Err(Error::Numerical {
            context: "eig_decompose",
            detail: format!(
                "eigenpair residual {residual:e} exceeds {:e} on {n}x{n} matrix",
                tol.eig_residual * scale
            ),
        });
    }
    Ok(spectrum)
}

fn dominance_order(a: &C64, b: &C64) -> Ordering {
    a.re.abs()
        .total_cmp(&b.re.abs())
        .then_with(|| a.im.total_cmp(&b.im))
}

fn pair_conjugates(values: &[C64]) -> Result<Vec<Option<usize>>> {
    let n = values.len();
    let mut pair = vec![None; n];
    for i in 0..n {
        if values[i].im <= 0.0 || pair[i].is_some() {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n)
            .filter(|&j| values[j].im < 0.0 && pair[j].is_none())
            .min_by(|&a, &b| {
                (values[a] - target)
                    .norm()
                    .total_cmp(&(values[b] - target).norm())
            });
        match partner {
            Some(j) => {
                pair[i] = Some(j);
                pair[j] = Some(i);
            }
            None => {
                return Err(Error::Numerical {
                    context: "eig_decompose",
                    detail: format!("complex eigenvalue {} has no conjugate partner", values[i]),
                })
            }
        }
    }
    if (0..n).any(|i| values[i].im < 0.0 && pair[i].is_none()) {
        return Err(Error::Numerical {
            context: "eig_decompose",
            detail: "unpaired complex eigenvalue".into(),
        });
    }
    Ok(pair)
}

/// Right singular vectors of `M − λI` for the `k` smallest singular values.
/// Vectors beyond the first whose singular value exceeds `tol` are replaced
/// by the first one (defective eigenvalue).
fn null_vectors(m: &DMatrix<f64>, lambda: C64, k: usize, tol: f64) -> Result<Vec<DVector<C64>>> {
    let n = m.nrows();
    let svd_failed = || Error::Numerical {
        context: "eig_decompose",
        detail: format!("SVD did not converge computing eigenvector for {lambda}"),
    };
    let (sigma, v): (Vec<f64>, DMatrix<C64>) = if lambda.im == 0.0 {
        let shifted = m - DMatrix::identity(n, n) * lambda.re;
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, SVD_MAX_ITER).ok_or_else(svd_failed)?;
        let vt = svd.v_t.ok_or_else(svd_failed)?;
        (
            svd.singular_values.iter().copied().collect(),
            vt.transpose().map(|x| C64::new(x, 0.0)),
        )
    } else {
        let shifted = m.map(|x| C64::new(x, 0.0)) - DMatrix::identity(n, n) * lambda;
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, SVD_MAX_ITER).ok_or_else(svd_failed)?;
        let vt = svd.v_t.ok_or_else(svd_failed)?;
        (svd.singular_values.iter().copied().collect(), vt.adjoint())
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]));

    let first = v.column(order[0]).into_owned();
    Ok((0..k)
        .map(|j| {
            let idx = order[j.min(n - 1)];
            if j == 0 || sigma[idx] > tol {
                first.clone()
            } else {
                v.column(idx).into_owned()
            }
        })
        .collect())
}

fn normalize(v: DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    let mut v = v / C64::new(norm, 0.0);
    if let Some(lead) = v.iter().copied().find(|c| c.norm() > 1e-10) {
        let phase = lead.conj() / lead.norm();
        v *= phase;
        // The lead entry is real-positive up to rounding; make it exact.
        if let Some(c) = v.iter_mut().find(|c| c.norm() > 1e-10) {
            c.im = 0.0;
        }
    }
    v
}
