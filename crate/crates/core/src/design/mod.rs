//! LQR full-state design, projection onto output feedback and the
//! disturbance-to-state stability check.

mod iss;
mod project;
mod retain;

use nalgebra::DMatrix;

use crate::motor::PlantModel;
use crate::numerics::{eig_decompose, place_poles_siso, solve_care, Spectrum, C64};
use crate::{Error, Result};

pub use iss::{iss_check, IssReport, ISS_DECAY_BOUND};
pub use project::{output_feedback_matrix, output_feedback_spectrum, project_gain, realified_basis};
pub use retain::{
    dominance_order, dominance_tie_at_boundary, select_retained, RetentionMode, RetentionPolicy,
};

/// Retained eigenvalues must reappear in the output-feedback loop within
/// this distance.
pub const RETENTION_TOL: f64 = 1e-6;
/// How close a pole-shift source must be to a closed-loop eigenvalue.
/// Sources are typically typed from printed, rounded values.
pub const SHIFT_MATCH_TOL: f64 = 1e-3;

/// `Q = q·I`, `R = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrWeights {
    q_scale: f64,
    r_scale: f64,
}

impl LqrWeights {
    pub fn new(q_scale: f64, r_scale: f64) -> Result<Self> {
        for (name, v) in [("q_scale", q_scale), ("r_scale", r_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "weights.{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(Self { q_scale, r_scale })
    }

    pub fn q_scale(&self) -> f64 {
        self.q_scale
    }

    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    pub fn q(&self, n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) * self.q_scale
    }

    pub fn r(&self) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.r_scale)
    }
}

/// Moves one closed-loop eigenvalue before projecting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleShift {
    pub from: C64,
    pub to: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub k_full: DMatrix<f64>,
    pub k_out: DMatrix<f64>,
    pub full_spectrum: Spectrum,
    pub retained: Vec<usize>,
    pub out_spectrum: Spectrum,
    pub iss: IssReport,
    /// Worst distance between a retained eigenvalue and its match in
    /// `out_spectrum`.
    pub retention_error: f64,
    /// The `|Im|` tie-break decided which eigenvalues were retained.
    pub dominance_tie: bool,
    /// True when the full-state gain came from pole placement rather than
    /// the Riccati solution.
    pub repaired: bool,
}

impl DesignResult {
    pub fn retained_eigenvalues(&self) -> Vec<C64> {
        self.retained
            .iter()
            .map(|&i| self.full_spectrum.eigenvalue(i))
            .collect()
    }
}

/// Full-state LQR gain `K = R⁻¹BᵀP` and the spectrum of `A − BK`.
pub fn lqr_full_state(model: &PlantModel, w: &LqrWeights) -> Result<(DMatrix<f64>, Spectrum)> {
    let n = model.n_states();
    let b = model.b_input();
    let p = solve_care(model.a(), b, &w.q(n), &w.r())?;
    let k = b.transpose() * p / w.r_scale();
    let spectrum = eig_decompose(&(model.a() - b * &k))?;
    if spectrum.abscissa() >= 0.0 {
        return Err(Error::DesignInfeasible(format!(
            "LQR closed loop is not Hurwitz (abscissa {})",
            spectrum.abscissa()
        )));
    }
    Ok((k, spectrum))
}

/// LQR design projected onto the model's measured outputs.
pub fn design(model: &PlantModel, w: &LqrWeights, policy: &RetentionPolicy) -> Result<DesignResult> {
    let (k_full, full_spectrum) = lqr_full_state(model, w)?;
    finish(model, k_full, full_spectrum, policy, false)
}

/// LQR design whose listed eigenvalues are first moved by pole placement;
/// the unlisted LQR eigenvalues stay where they are. The result is no
/// longer LQR-optimal.
pub fn repair_via_pole_shift(
    model: &PlantModel,
    w: &LqrWeights,
    shifts: &[PoleShift],
    policy: &RetentionPolicy,
) -> Result<DesignResult> {
    let (k_lqr, lqr_spectrum) = lqr_full_state(model, w)?;
    if shifts.is_empty() {
        return finish(model, k_lqr, lqr_spectrum, policy, false);
    }

    let mut targets: Vec<C64> = lqr_spectrum.eigenvalues().to_vec();
    let mut moved = vec![false; targets.len()];
    for shift in shifts {
        let hit = (0..targets.len())
            .filter(|&i| !moved[i])
            .map(|i| (i, (lqr_spectrum.eigenvalue(i) - shift.from).norm()))
            .filter(|(_, d)| *d <= SHIFT_MATCH_TOL.max(SHIFT_MATCH_TOL * shift.from.norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, _)) = hit else {
            return Err(Error::InvalidInput(format!(
                "pole shift source {} is not a closed-loop eigenvalue (spectrum {:?})",
                shift.from,
                lqr_spectrum.eigenvalues()
            )));
        };
        targets[i] = shift.to;
        moved[i] = true;
    }

    let k_full = place_poles_siso(model.a(), model.b_input(), &targets)?;
    let spectrum = eig_decompose(&(model.a() - model.b_input() * &k_full))?;
    finish(model, k_full, spectrum, policy, true)
}

fn finish(
    model: &PlantModel,
    k_full: DMatrix<f64>,
    full_spectrum: Spectrum,
    policy: &RetentionPolicy,
    repaired: bool,
) -> Result<DesignResult> {
    if policy.r != model.n_outputs() {
        return Err(Error::InvalidInput(format!(
            "retention count r = {} must equal the number of measured outputs ({})",
            policy.r,
            model.n_outputs()
        )));
    }
    let retained = select_retained(&full_spectrum, policy)?;
    let k_out = project_gain(&k_full, &full_spectrum, &retained, model.c_output())?;
    let out_spectrum = output_feedback_spectrum(model, &k_out)?;
    let kept: Vec<C64> = retained.iter().map(|&i| full_spectrum.eigenvalue(i)).collect();
    let retention_error = out_spectrum.match_distance(&kept);
    if retention_error > RETENTION_TOL {
        return Err(Error::Numerical {
            context: "project_gain",
            detail: format!(
                "retained eigenvalues {kept:?} moved by {retention_error:e} under output feedback"
            ),
        });
    }
    let iss = iss_check(model, &k_out)?;
    let dominance_tie = dominance_tie_at_boundary(&full_spectrum, &retained);
    Ok(DesignResult {
        k_full,
        k_out,
        full_spectrum,
        retained,
        out_spectrum,
        iss,
        retention_error,
        dominance_tie,
        repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motor::{position_model, speed_model, MotorParams};

    fn near(actual: &[f64], expected: &[f64], tol: f64) -> bool {
        actual.len() == expected.len() && actual.iter().zip(expected).all(|(a, e)| (a - e).abs() <= tol)
    }

    fn reals(vals: &[f64]) -> Vec<C64> {
        vals.iter().map(|&v| C64::new(v, 0.0)).collect()
    }

    fn nominal() -> DesignResult {
        let m = speed_model(&MotorParams::table1());
        design(
            &m,
            &LqrWeights::new(50.0, 1.0).unwrap(),
            &RetentionPolicy::dominant(2),
        )
        .unwrap()
    }

    #[test]
    fn nominal_speed_design() {
        let d = nominal();
        assert!(
            near(d.k_full.as_slice(), &[7.071, 0.903, 6.204], 1e-3),
            "{}",
            d.k_full
        );
        assert!(
            d.full_spectrum
                .match_distance(&reals(&[-0.098538, -14.211, -10.099]))
                <= 1e-3
        );
        let kept: Vec<f64> = d.retained_eigenvalues().iter().map(|l| l.re).collect();
        assert!(near(&kept, &[-0.098538, -10.099], 1e-3), "{kept:?}");
        assert!(
            near(d.k_out.as_slice(), &[0.89686, -0.32197], 1e-3),
            "{}",
            d.k_out
        );
        assert!(
            d.out_spectrum
                .match_distance(&reals(&[-0.098538, -1.8025, -10.099]))
                <= 1e-3
        );
        assert!(d.retention_error <= RETENTION_TOL);
        assert!(!d.repaired && !d.dominance_tie);
    }

    #[test]
    fn nominal_iss_fails_paper_condition() {
        let d = nominal();
        assert!((d.iss.spectral_abscissa + 0.098538).abs() < 1e-5);
        assert!(!d.iss.passes_paper_condition);
        assert!((d.iss.gtg - 10_000.0).abs() < 1e-6);
        assert!(d.iss.gtg_positive);
        assert!(d.iss.spectral_abscissa <= d.iss.sym_lambda_max);
    }

    #[test]
    fn position_design_equals_speed_design() {
        let p = MotorParams::table1();
        let w = LqrWeights::new(50.0, 1.0).unwrap();
        let s = design(&speed_model(&p), &w, &RetentionPolicy::dominant(2)).unwrap();
        let q = design(&position_model(&p), &w, &RetentionPolicy::dominant(2)).unwrap();
        assert_eq!(s.k_out, q.k_out);
    }

    #[test]
    fn repaired_speed_design() {
        let m = speed_model(&MotorParams::table1());
        let shift = PoleShift {
            from: C64::new(-0.098538, 0.0),
            to: C64::new(-0.8, 0.0),
        };
        let d = repair_via_pole_shift(
            &m,
            &LqrWeights::new(50.0, 1.0).unwrap(),
            &[shift],
            &RetentionPolicy::dominant(2),
        )
        .unwrap();
        assert!(d.repaired);
        assert!(near(d.k_out.as_slice(), &[4.4476, 0.029499], 1e-3), "{}", d.k_out);
        assert!(d.out_spectrum.match_distance(&reals(&[-0.8])) <= 1e-6);
        assert!(d.out_spectrum.match_distance(&reals(&[-0.8, -1.101, -10.099])) <= 1e-3);
        assert!(d.iss.passes_paper_condition);
        assert!((d.iss.spectral_abscissa + 0.8).abs() < 1e-6);
    }

    #[test]
    fn empty_shift_is_plain_design() {
        let m = speed_model(&MotorParams::table1());
        let w = LqrWeights::new(50.0, 1.0).unwrap();
        let d = repair_via_pole_shift(&m, &w, &[], &RetentionPolicy::dominant(2)).unwrap();
        assert_eq!(d, nominal());
    }

    #[test]
    fn unknown_shift_source_is_rejected() {
        let m = speed_model(&MotorParams::table1());
        let w = LqrWeights::new(50.0, 1.0).unwrap();
        let shift = PoleShift {
            from: C64::new(-3.0, 0.0),
            to: C64::new(-0.8, 0.0),
        };
        assert!(matches!(
            repair_via_pole_shift(&m, &w, &[shift], &RetentionPolicy::dominant(2)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn identity_output_keeps_full_gain() {
        let m = speed_model(&MotorParams::table1())
            .with_output(DMatrix::identity(3, 3))
            .unwrap();
        let w = LqrWeights::new(50.0, 1.0).unwrap();
        let d = design(&m, &w, &RetentionPolicy::dominant(3)).unwrap();
        assert!((&d.k_out - &d.k_full).norm() < 1e-9);
    }

    #[test]
    fn tiny_state_weight_gives_tiny_gain_for_stable_plant() {
        let model = speed_model(&MotorParams::table1());
        let mut a = model.a().clone();
        a[(0, 0)] = -1.0;
        let b = model.b_input();
        let p = solve_care(
            &a,
            b,
            &(DMatrix::identity(3, 3) * 1e-9),
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let k = b.transpose() * p;
        assert!(k.norm() < 1e-8, "{k}");
    }

    #[test]
    fn wrong_retention_count() {
        let m = speed_model(&MotorParams::table1());
        let w = LqrWeights::new(50.0, 1.0).unwrap();
        assert!(matches!(
            design(&m, &w, &RetentionPolicy::dominant(1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(LqrWeights::new(0.0, 1.0).is_err());
        assert!(LqrWeights::new(1.0, -1.0).is_err());
    }
}
