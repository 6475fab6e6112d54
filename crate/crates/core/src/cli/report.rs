//! Report and trace serialization.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::design::{DesignResult, LqrWeights, ISS_DECAY_BOUND, RETENTION_TOL, SHIFT_MATCH_TOL};
use crate::motor::ControlKind;
use crate::numerics::{Spectrum, CARE_RESIDUAL_TOL, EIG_RESIDUAL_TOL, MAX_CONDITION, PLACEMENT_TOL};
use crate::sim::{MonteCarloSummary, SimTrace};

pub const TRACE_HEADER: &str = "time_s,theta_or_eps,omega_rad_s,ia_A,va_V,torque_Nm,tau_L_Nm";

/// Design report. Gains are in SI units of the corresponding state
/// (V/rad, V·s/rad, V/A); eigenvalues in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub control_kind: String,
    pub repaired: bool,
    pub weights: WeightsSection,
    pub full_state: FullStateSection,
    pub projection: ProjectionSection,
    pub output_feedback: SpectrumSection,
    pub iss: IssSection,
    pub tolerances: TolerancesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSection {
    pub q_scale: f64,
    pub r_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullStateSection {
    pub k_full_si: Vec<f64>,
    pub eigenvalues_re_per_s: Vec<f64>,
    pub eigenvalues_im_per_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSection {
    pub retained_indices: Vec<usize>,
    pub retained_re_per_s: Vec<f64>,
    pub retained_im_per_s: Vec<f64>,
    pub dominance_tie: bool,
    pub k_out_si: Vec<f64>,
    pub retention_error_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSection {
    pub eigenvalues_re_per_s: Vec<f64>,
    pub eigenvalues_im_per_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssSection {
    pub spectral_abscissa_per_s: f64,
    pub sym_lambda_max_per_s: f64,
    pub decay_bound_per_s: f64,
    pub gtg_inv_kg2_m4: f64,
    pub passes_paper_condition: bool,
    pub passes_strict_condition: bool,
    pub gtg_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TolerancesSection {
    pub eig_residual_rel: f64,
    pub care_residual_rel: f64,
    pub placement_abs_per_s: f64,
    pub retention_abs_per_s: f64,
    pub shift_match_abs_per_s: f64,
    pub max_condition_ratio: f64,
}

fn spectrum_parts(s: &Spectrum) -> (Vec<f64>, Vec<f64>) {
    s.eigenvalues().iter().map(|l| (l.re, l.im)).unzip()
}

impl DesignReport {
    pub fn new(kind: ControlKind, weights: &LqrWeights, d: &DesignResult) -> Self {
        let (full_re, full_im) = spectrum_parts(&d.full_spectrum);
        let (out_re, out_im) = spectrum_parts(&d.out_spectrum);
        let (ret_re, ret_im) = d.retained_eigenvalues().iter().map(|l| (l.re, l.im)).unzip();
        Self {
            control_kind: kind.as_str().to_string(),
            repaired: d.repaired,
            weights: WeightsSection {
                q_scale: weights.q_scale(),
                r_scale: weights.r_scale(),
            },
            full_state: FullStateSection {
                k_full_si: d.k_full.iter().copied().collect(),
                eigenvalues_re_per_s: full_re,
                eigenvalues_im_per_s: full_im,
            },
            projection: ProjectionSection {
                retained_indices: d.retained.clone(),
                retained_re_per_s: ret_re,
                retained_im_per_s: ret_im,
                dominance_tie: d.dominance_tie,
                k_out_si: d.k_out.iter().copied().collect(),
                retention_error_per_s: d.retention_error,
            },
            output_feedback: SpectrumSection {
                eigenvalues_re_per_s: out_re,
                eigenvalues_im_per_s: out_im,
            },
            iss: IssSection {
                spectral_abscissa_per_s: d.iss.spectral_abscissa,
                sym_lambda_max_per_s: d.iss.sym_lambda_max,
                decay_bound_per_s: ISS_DECAY_BOUND,
                gtg_inv_kg2_m4: d.iss.gtg,
                passes_paper_condition: d.iss.passes_paper_condition,
                passes_strict_condition: d.iss.passes_strict_condition,
                gtg_positive: d.iss.gtg_positive,
            },
            tolerances: TolerancesSection {
                eig_residual_rel: EIG_RESIDUAL_TOL,
                care_residual_rel: CARE_RESIDUAL_TOL,
                placement_abs_per_s: PLACEMENT_TOL,
                retention_abs_per_s: RETENTION_TOL,
                shift_match_abs_per_s: SHIFT_MATCH_TOL,
                max_condition_ratio: MAX_CONDITION,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("design report serializes")
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a trace as CSV: header row, one row per sample, 17 significant
/// digits, LF line endings.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &SimTrace) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for k in 0..trace.len() {
        let x = trace.state[k];
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(trace.time[k]),
            num(x[0]),
            num(x[1]),
            num(x[2]),
            num(trace.control_va[k]),
            num(trace.motor_torque[k]),
            num(trace.disturbance[k]),
        )?;
    }
    out.flush()
}

/// Unit suffix of the tracking error for a control kind.
pub fn error_unit(kind: ControlKind) -> &'static str {
    match kind {
        ControlKind::Speed => "rad_per_s",
        ControlKind::Position => "rad",
    }
}

/// Extra context recorded next to the Monte Carlo statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloContext {
    pub kind: ControlKind,
    pub repaired: bool,
    pub seed: u64,
    pub mean_nm: f64,
    pub variance_nm2: f64,
    pub hold_interval_s: f64,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub deterministic_max_torque_nm: f64,
    pub disturbance_guard_ok: bool,
}

pub fn monte_carlo_summary_toml(ctx: &MonteCarloContext, s: &MonteCarloSummary) -> String {
    use toml::Value;
    let unit = error_unit(ctx.kind);
    let first_state = match ctx.kind {
        ControlKind::Speed => "max_abs_eps_rad",
        ControlKind::Position => "max_abs_theta_rad",
    };
    let mut t = toml::Table::new();
    let f = Value::Float;
    t.insert("control_kind".into(), Value::String(ctx.kind.as_str().into()));
    t.insert("repaired".into(), Value::Boolean(ctx.repaired));
    t.insert("seed".into(), Value::Integer(ctx.seed as i64));
    t.insert("n_runs".into(), Value::Integer(s.n_runs as i64));
    t.insert("diverged_count".into(), Value::Integer(s.diverged_count as i64));
    t.insert("dt_s".into(), f(ctx.dt_s));
    t.insert("horizon_s".into(), f(ctx.horizon_s));
    t.insert("disturbance_mean_nm".into(), f(ctx.mean_nm));
    t.insert("disturbance_variance_nm2".into(), f(ctx.variance_nm2));
    t.insert("disturbance_hold_interval_s".into(), f(ctx.hold_interval_s));
    t.insert(
        "deterministic_max_torque_nm".into(),
        f(ctx.deterministic_max_torque_nm),
    );
    t.insert(
        "disturbance_guard_ok".into(),
        Value::Boolean(ctx.disturbance_guard_ok),
    );
    t.insert(format!("terminal_error_mean_{unit}"), f(s.terminal_error_mean));
    t.insert(format!("terminal_error_std_{unit}"), f(s.terminal_error_std));
    t.insert(first_state.into(), f(s.max_abs_state[0]));
    t.insert("max_abs_omega_rad_per_s".into(), f(s.max_abs_state[1]));
    t.insert("max_abs_ia_a".into(), f(s.max_abs_state[2]));
    t.insert("max_abs_torque_nm".into(), f(s.max_abs_torque));
    t.insert(
        format!("terminal_errors_{unit}"),
        Value::Array(
            s.terminal_errors
                .iter()
                .map(|e| f(e.unwrap_or(f64::NAN)))
                .collect(),
        ),
    );
    toml::to_string(&t).expect("summary serializes")
}

/// Pooled tracking-error statistics over time.
pub fn write_error_stats_csv<W: Write>(
    mut out: W,
    kind: ControlKind,
    s: &MonteCarloSummary,
) -> io::Result<()> {
    let unit = error_unit(kind);
    writeln!(out, "time_s,error_mean_{unit},error_std_{unit}")?;
    for k in 0..s.time.len() {
        writeln!(
            out,
            "{},{},{}",
            num(s.time[k]),
            num(s.error_mean[k]),
            num(s.error_std[k])
        )?;
    }
    out.flush()
}
