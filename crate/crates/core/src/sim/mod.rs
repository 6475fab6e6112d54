//! Fixed-step closed-loop simulation of the motor models.

mod montecarlo;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::motor::{ControlKind, PlantModel};
use crate::{Error, Result};

pub use montecarlo::{run_monte_carlo, MonteCarloSummary};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 60.0;
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// Speed setpoint, rad/s.
    SpeedStep(f64),
    /// Angle setpoint, rad.
    PositionStep(f64),
}

impl Reference {
    pub fn value(&self) -> f64 {
        match *self {
            Reference::SpeedStep(v) | Reference::PositionStep(v) => v,
        }
    }

    pub fn kind(&self) -> ControlKind {
        match self {
            Reference::SpeedStep(_) => ControlKind::Speed,
            Reference::PositionStep(_) => ControlKind::Position,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    None,
    /// Load torque drawn from N(mean, variance) in N·m, held for
    /// `hold_interval` seconds.
    Gaussian {
        mean: f64,
        variance: f64,
        hold_interval: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub reference: Reference,
    pub disturbance: Disturbance,
    pub seed: u64,
    pub initial_state: [f64; 3],
    pub divergence_bound: f64,
}

impl SimConfig {
    pub fn new(reference: Reference) -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            reference,
            disturbance: Disturbance::None,
            seed: 0,
            initial_state: [0.0; 3],
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("sim.dt_s must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return bad(format!("sim.horizon_s must be at least dt, got {}", self.horizon));
        }
        if !self.reference.value().is_finite() {
            return bad("sim reference must be finite".into());
        }
        if self.initial_state.iter().any(|x| !x.is_finite()) {
            return bad("sim.initial_state must be finite".into());
        }
        if self.divergence_bound.is_nan() || self.divergence_bound <= 0.0 {
            return bad("divergence bound must be positive".into());
        }
        if let Disturbance::Gaussian {
            mean,
            variance,
            hold_interval,
        } = self.disturbance
        {
            if !mean.is_finite() {
                return bad("disturbance mean must be finite".into());
            }
            if !(variance.is_finite() && variance >= 0.0) {
                return bad(format!("disturbance variance must be >= 0, got {variance}"));
            }
            if !(hold_interval.is_finite() && hold_interval >= self.dt) {
                return bad(format!(
                    "disturbance hold interval must be >= dt, got {hold_interval}"
                ));
            }
        }
        Ok(())
    }

    /// Number of integration steps; the trace has one more sample.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }
}

/// Which gain closes the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedback {
    /// `Vₐ = −K_o·C·(x − x_ref)`.
    Output(DMatrix<f64>),
    /// `Vₐ = −K·(x − x_ref)`.
    Full(DMatrix<f64>),
}

impl Feedback {
    fn state_gain(&self, model: &PlantModel) -> Result<DMatrix<f64>> {
        let n = model.n_states();
        match self {
            Feedback::Output(k) => {
                let r = model.n_outputs();
                if k.nrows() != 1 || k.ncols() != r {
                    return Err(Error::dim(
                        "output feedback gain",
                        format!("1x{r}"),
                        format!("{}x{}", k.nrows(), k.ncols()),
                    ));
                }
                Ok(k * model.c_output())
            }
            Feedback::Full(k) => {
                if k.nrows() != 1 || k.ncols() != n {
                    return Err(Error::dim(
                        "full-state gain",
                        format!("1x{n}"),
                        format!("{}x{}", k.nrows(), k.ncols()),
                    ));
                }
                Ok(k.clone())
            }
        }
    }
}

/// Time series of one simulation. `state[k]` is `(ε or θ, ω, i_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub time: Vec<f64>,
    pub state: Vec<[f64; 3]>,
    pub control_va: Vec<f64>,
    pub motor_torque: Vec<f64>,
    pub disturbance: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn last_state(&self) -> [f64; 3] {
        *self.state.last().expect("trace has at least one sample")
    }

    pub fn max_abs_torque(&self) -> f64 {
        self.motor_torque.iter().fold(0.0, |m, t| m.max(t.abs()))
    }
}

/// Tracking error of a state sample: `ω − ω_r` or `θ − θ_r`.
pub fn tracking_error(reference: &Reference, x: &[f64; 3]) -> f64 {
    match reference {
        Reference::SpeedStep(w) => x[1] - w,
        Reference::PositionStep(th) => x[0] - th,
    }
}

/// Simulates the closed loop using RNG stream 0 of `cfg.seed`.
pub fn simulate(model: &PlantModel, gain: &Feedback, cfg: &SimConfig) -> Result<SimTrace> {
    simulate_run(model, gain, cfg, 0)
}

/// Simulates the closed loop with the disturbance drawn from RNG stream
/// `run` of `cfg.seed`. Run `i` of a Monte Carlo batch uses stream `i`.
///
/// The loop `ẋ = Ax + bVₐ + gτ_L + ref_inject·r` is integrated with classic
/// RK4; the control is evaluated at every stage, the disturbance is a
/// zero-order hold.
pub fn simulate_run(model: &PlantModel, gain: &Feedback, cfg: &SimConfig, run: u64) -> Result<SimTrace> {
    let plant = ClosedLoop::new(model, gain, cfg)?;
    let steps = cfg.steps();
    let mut trace = SimTrace {
        time: Vec::with_capacity(steps + 1),
        state: Vec::with_capacity(steps + 1),
        control_va: Vec::with_capacity(steps + 1),
        motor_torque: Vec::with_capacity(steps + 1),
        disturbance: Vec::with_capacity(steps + 1),
    };
    let mut source = DisturbanceSource::new(cfg, run)?;
    let ki = model.params().ki;
    let mut x = Vector3::from(cfg.initial_state);
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let tau = source.at(t);
        trace.time.push(t);
        trace.state.push([x[0], x[1], x[2]]);
        trace.control_va.push(plant.control(&x));
        trace.motor_torque.push(ki * x[2]);
        trace.disturbance.push(tau);
        if k < steps {
            x = plant.rk4(&x, tau, cfg.dt);
            if x.iter().any(|v| !v.is_finite() || v.abs() > cfg.divergence_bound) {
                return Err(Error::Divergence { time: t + cfg.dt });
            }
        }
    }
    Ok(trace)
}

/// Linear closed loop `ẋ = M·x + f₀ + g·τ`.
struct ClosedLoop {
    m: Matrix3<f64>,
    f0: Vector3<f64>,
    g: Vector3<f64>,
    k: Vector3<f64>,
    x_ref: Vector3<f64>,
}

impl ClosedLoop {
    fn new(model: &PlantModel, gain: &Feedback, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        if model.n_states() != 3 {
            return Err(Error::dim("simulate", "3-state model", model.n_states()));
        }
        if cfg.reference.kind() != model.kind() {
            return Err(Error::InvalidInput(format!(
                "{} reference given for a {} model",
                cfg.reference.kind().as_str(),
                model.kind().as_str()
            )));
        }
        let k_state = gain.state_gain(model)?;
        let r = cfg.reference.value();
        let a = Matrix3::from_iterator(model.a().iter().copied());
        let b = Vector3::from_iterator(model.b_input().iter().copied());
        let g = Vector3::from_iterator(model.g_dist().iter().copied());
        let k = Vector3::from_iterator(k_state.iter().copied());
        let x_ref = Vector3::from_iterator(model.ref_setpoint().iter().copied()) * r;
        let inject = Vector3::from_iterator(model.ref_inject().iter().copied()) * r;
        let m = a - b * k.transpose();
        let f0 = inject + b * k.dot(&x_ref);
        Ok(Self { m, f0, g, k, x_ref })
    }

    fn control(&self, x: &Vector3<f64>) -> f64 {
        -self.k.dot(&(x - self.x_ref))
    }

    fn deriv(&self, x: &Vector3<f64>, tau: f64) -> Vector3<f64> {
        self.m * x + self.f0 + self.g * tau
    }

    fn rk4(&self, x: &Vector3<f64>, tau: f64, h: f64) -> Vector3<f64> {
        let k1 = self.deriv(x, tau);
        let k2 = self.deriv(&(x + k1 * (h / 2.0)), tau);
        let k3 = self.deriv(&(x + k2 * (h / 2.0)), tau);
        let k4 = self.deriv(&(x + k3 * h), tau);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// Zero-order-hold Gaussian torque. A new value is drawn whenever the step
/// crosses into a new hold interval.
struct DisturbanceSource {
    normal: Option<(Normal<f64>, f64)>,
    rng: ChaCha8Rng,
    current: f64,
    slot: Option<u64>,
}

impl DisturbanceSource {
    fn new(cfg: &SimConfig, run: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(run);
        let normal = match cfg.disturbance {
            Disturbance::None => None,
            Disturbance::Gaussian {
                mean,
                variance,
                hold_interval,
            } => Some((
                Normal::new(mean, variance.sqrt())
                    .map_err(|e| Error::InvalidInput(format!("disturbance: {e}")))?,
                hold_interval,
            )),
        };
        Ok(Self {
            normal,
            rng,
            current: 0.0,
            slot: None,
        })
    }

    fn at(&mut self, t: f64) -> f64 {
        let Some((normal, hold)) = &self.normal else {
            return 0.0;
        };
        let slot = (t / hold + 1e-9).floor() as u64;
        if self.slot != Some(slot) {
            self.current = normal.sample(&mut self.rng);
            self.slot = Some(slot);
        }
        self.current
    }
}

/// True when the disturbance standard deviation is at most 10 % of the
/// peak motor torque of a disturbance-free trace.
pub fn disturbance_magnitude_guard(trace: &SimTrace, sigma2: f64) -> bool {
    sigma2.max(0.0).sqrt() <= 0.10 * trace.max_abs_torque()
}
