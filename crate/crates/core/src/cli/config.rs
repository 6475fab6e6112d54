//! TOML run configuration.
//!
//! ```toml
//! control_kind = "speed"          # or "position"
//! output_dir = "out"
//!
//! [motor]                         # optional, defaults to the reference motor
//! j = 0.01
//! b = 0.1
//! ra = 1.0
//! la = 0.5
//! ki = 0.01
//! kb = 0.01
//!
//! [weights]
//! q_scale = 50.0
//! r_scale = 1.0
//!
//! [retention]                     # optional
//! mode = "dominant_auto"          # or "explicit_indices" with indices = [..]
//!
//! [[repair]]                      # optional, one table per moved eigenvalue
//! from_re = -0.098538
//! to_re = -0.8
//!
//! [sim]
//! dt_s = 0.001
//! horizon_s = 60.0
//! reference_deg = 2000.0          # deg/s or deg; reference_rad also accepted
//! seed = 1
//! feedback = "output"             # or "full"
//!
//! [sim.disturbance]
//! kind = "gaussian"
//! mean_nm = 0.0
//! variance_nm2 = 0.2
//! hold_interval_s = 0.001
//!
//! [monte_carlo]
//! n_runs = 200
//! write_run_csvs = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::design::{LqrWeights, PoleShift, RetentionMode, RetentionPolicy};
use crate::motor::{ControlKind, MotorParams};
use crate::numerics::C64;
use crate::sim::{Disturbance, Reference, SimConfig, DEFAULT_DIVERGENCE_BOUND, DEFAULT_DT, DEFAULT_HORIZON};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Output,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub n_runs: usize,
    pub write_run_csvs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub motor: MotorParams,
    pub control_kind: ControlKind,
    pub weights: LqrWeights,
    pub retention: RetentionPolicy,
    pub repair: Vec<PoleShift>,
    pub sim: SimConfig,
    pub feedback: FeedbackKind,
    pub monte_carlo: Option<MonteCarloConfig>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    control_kind: ControlKind,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    motor: Option<MotorParams>,
    weights: RawWeights,
    retention: Option<RawRetention>,
    #[serde(default)]
    repair: Vec<RawShift>,
    sim: RawSim,
    monte_carlo: Option<RawMonteCarlo>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    q_scale: f64,
    #[serde(default = "one")]
    r_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum RawRetentionMode {
    DominantAuto,
    ExplicitIndices,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRetention {
    mode: RawRetentionMode,
    r: Option<usize>,
    indices: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShift {
    from_re: f64,
    #[serde(default)]
    from_im: f64,
    to_re: f64,
    #[serde(default)]
    to_im: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum RawFeedback {
    Output,
    Full,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    dt_s: Option<f64>,
    horizon_s: Option<f64>,
    reference_deg: Option<f64>,
    reference_rad: Option<f64>,
    #[serde(default)]
    seed: u64,
    initial_state: Option<[f64; 3]>,
    feedback: Option<RawFeedback>,
    divergence_bound: Option<f64>,
    disturbance: Option<RawDisturbance>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum RawDisturbanceKind {
    None,
    Gaussian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: RawDisturbanceKind,
    #[serde(default)]
    mean_nm: f64,
    #[serde(default)]
    variance_nm2: f64,
    hold_interval_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonteCarlo {
    n_runs: usize,
    #[serde(default)]
    write_run_csvs: bool,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config().map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Config(msg),
            other => other,
        })
    }
}

impl RawConfig {
    fn into_config(self) -> Result<RunConfig> {
        let motor = self.motor.unwrap_or_else(MotorParams::table1);
        motor.validate()?;
        let weights = LqrWeights::new(self.weights.q_scale, self.weights.r_scale)?;

        let n_outputs = 2;
        let retention = match self.retention {
            None => RetentionPolicy::dominant(n_outputs),
            Some(RawRetention {
                mode: RawRetentionMode::DominantAuto,
                r,
                indices,
            }) => {
                if indices.is_some() {
                    return Err(Error::InvalidInput(
                        "retention.indices is only valid with mode = \"explicit_indices\"".into(),
                    ));
                }
                RetentionPolicy::dominant(r.unwrap_or(n_outputs))
            }
            Some(RawRetention {
                mode: RawRetentionMode::ExplicitIndices,
                r,
                indices,
            }) => {
                let indices = indices.ok_or_else(|| {
                    Error::InvalidInput("retention.indices is required for explicit_indices".into())
                })?;
                if let Some(r) = r {
                    if r != indices.len() {
                        return Err(Error::InvalidInput(format!(
                            "retention.r = {r} but retention.indices has {} entries",
                            indices.len()
                        )));
                    }
                }
                RetentionPolicy {
                    r: indices.len(),
                    mode: RetentionMode::ExplicitIndices(indices),
                }
            }
        };

        let repair = self
            .repair
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let vals = [s.from_re, s.from_im, s.to_re, s.to_im];
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("repair[{i}] has a non-finite value")));
                }
                Ok(PoleShift {
                    from: C64::new(s.from_re, s.from_im),
                    to: C64::new(s.to_re, s.to_im),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let sim = self.sim;
        let reference_value = match (sim.reference_deg, sim.reference_rad) {
            (Some(d), None) => d.to_radians(),
            (None, Some(r)) => r,
            (None, None) => {
                return Err(Error::InvalidInput(
                    "sim.reference_deg or sim.reference_rad is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "give only one of sim.reference_deg and sim.reference_rad".into(),
                ))
            }
        };
        let reference = match self.control_kind {
            ControlKind::Speed => Reference::SpeedStep(reference_value),
            ControlKind::Position => Reference::PositionStep(reference_value),
        };
        let dt = sim.dt_s.unwrap_or(DEFAULT_DT);
        let disturbance = match sim.disturbance {
            None
            | Some(RawDisturbance {
                kind: RawDisturbanceKind::None,
                ..
            }) => Disturbance::None,
            Some(d) => Disturbance::Gaussian {
                mean: d.mean_nm,
                variance: d.variance_nm2,
                hold_interval: d.hold_interval_s.unwrap_or(dt),
            },
        };
        let sim_cfg = SimConfig {
            dt,
            horizon: sim.horizon_s.unwrap_or(DEFAULT_HORIZON),
            reference,
            disturbance,
            seed: sim.seed,
            initial_state: sim.initial_state.unwrap_or([0.0; 3]),
            divergence_bound: sim.divergence_bound.unwrap_or(DEFAULT_DIVERGENCE_BOUND),
        };
        sim_cfg.validate()?;
        let feedback = match sim.feedback {
            None | Some(RawFeedback::Output) => FeedbackKind::Output,
            Some(RawFeedback::Full) => FeedbackKind::Full,
        };

        let monte_carlo = match self.monte_carlo {
            None => None,
            Some(mc) if mc.n_runs == 0 => {
                return Err(Error::InvalidInput(
                    "monte_carlo.n_runs must be at least 1".into(),
                ))
            }
            Some(mc) => Some(MonteCarloConfig {
                n_runs: mc.n_runs,
                write_run_csvs: mc.write_run_csvs,
            }),
        };

        Ok(RunConfig {
            motor,
            control_kind: self.control_kind,
            weights,
            retention,
            repair,
            sim: sim_cfg,
            feedback,
            monte_carlo,
            output_dir: self.output_dir,
        })
    }
}
