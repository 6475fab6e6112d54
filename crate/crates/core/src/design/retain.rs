use crate::numerics::Spectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetentionMode {
    /// Slowest modes first (ascending `|Re λ|`, ties by ascending `|Im λ|`).
    DominantAuto,
    /// Indices into the full-state spectrum, in its dominance order.
    ExplicitIndices(Vec<usize>),
}

/// Which closed-loop eigenvalues the output feedback must keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetentionPolicy {
    pub mode: RetentionMode,
    pub r: usize,
}

impl RetentionPolicy {
    pub fn dominant(r: usize) -> Self {
        Self {
            mode: RetentionMode::DominantAuto,
            r,
        }
    }

    pub fn explicit(indices: Vec<usize>) -> Self {
        Self {
            r: indices.len(),
            mode: RetentionMode::ExplicitIndices(indices),
        }
    }
}

/// Dominance order used for retention: ascending `|Re|`, then `|Im|`.
pub fn dominance_order(spec: &Spectrum) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spec.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (spec.eigenvalue(a), spec.eigenvalue(b));
        la.re
            .abs()
            .total_cmp(&lb.re.abs())
            .then_with(|| la.im.abs().total_cmp(&lb.im.abs()))
    });
    order
}

/// Picks a conjugation-closed set of `policy.r` eigenvalue indices.
///
/// In automatic mode eigenvalues are taken greedily in dominance order; a
/// complex eigenvalue brings its partner along, and a pair that no longer
/// fits is skipped in favour of the next real eigenvalue.
pub fn select_retained(spec: &Spectrum, policy: &RetentionPolicy) -> Result<Vec<usize>> {
    let r = policy.r;
    if r > spec.len() {
        return Err(Error::InvalidInput(format!(
            "cannot retain {r} of {} eigenvalues",
            spec.len()
        )));
    }
    match &policy.mode {
        RetentionMode::DominantAuto => {
            let mut picked = Vec::with_capacity(r);
            for i in dominance_order(spec) {
                if picked.len() == r {
                    break;
                }
                if picked.contains(&i) {
                    continue;
                }
                match spec.pair_index(i) {
                    None => picked.push(i),
                    Some(p) if r - picked.len() >= 2 => {
                        picked.push(i);
                        picked.push(p);
                    }
                    Some(_) => {}
                }
            }
            if picked.len() != r {
                return Err(Error::SelectionInfeasible { r });
            }
            Ok(picked)
        }
        RetentionMode::ExplicitIndices(indices) => {
            if indices.len() != r {
                return Err(Error::InvalidInput(format!(
                    "explicit retention lists {} indices but r = {r}",
                    indices.len()
                )));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= spec.len()) {
                return Err(Error::InvalidInput(format!(
                    "retained index {bad} out of range for {} eigenvalues",
                    spec.len()
                )));
            }
            let mut sorted = indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != indices.len() {
                return Err(Error::InvalidInput("retained indices repeat".into()));
            }
            if !spec.is_conjugation_closed(indices) {
                return Err(Error::SelectionInfeasible { r });
            }
            Ok(indices.clone())
        }
    }
}

/// True when a dropped eigenvalue has the same `|Re|` as a retained one, so
/// the `|Im|` tie-break decided the selection.
pub fn dominance_tie_at_boundary(spec: &Spectrum, retained: &[usize]) -> bool {
    retained.iter().any(|&i| {
        (0..spec.len()).any(|j| {
            !retained.contains(&j) && {
                let (a, b) = (spec.eigenvalue(i).re.abs(), spec.eigenvalue(j).re.abs());
                (a - b).abs() <= 1e-12 * a.max(b).max(1.0)
            }
        })
    })
}
