//! DC-motor state-space models.
//!
//! Both models use the state `(x₁, ω, i_a)` where `x₁` is either the
//! integral of the speed tracking error (speed control) or the shaft angle
//! (position control). Their `A`, `B`, `G` and `C` matrices are identical.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical motor constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorParams {
    /// Load inertia, kg·m².
    pub j: f64,
    /// Viscous friction, N·m·s/rad.
    pub b: f64,
    /// Armature resistance, Ω.
    pub ra: f64,
    /// Armature inductance, H.
    pub la: f64,
    /// Torque constant, N·m/A.
    pub ki: f64,
    /// Back-EMF constant, V·s/rad.
    pub kb: f64,
}

/// Coefficients of the state equations derived from [`MotorParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub s: f64,
    pub nu: f64,
}

impl MotorParams {
    pub fn new(j: f64, b: f64, ra: f64, la: f64, ki: f64, kb: f64) -> Result<Self> {
        let p = Self { j, b, ra, la, ki, kb };
        p.validate()?;
        Ok(p)
    }

    /// The reference motor: J = 0.01, B = 0.1, Ra = 1, La = 0.5,
    /// Ki = 0.01, Kb = 0.01.
    pub fn table1() -> Self {
        Self {
            j: 0.01,
            b: 0.1,
            ra: 1.0,
            la: 0.5,
            ki: 0.01,
            kb: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "motor.{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("j", self.j),
            ("b", self.b),
            ("ra", self.ra),
            ("la", self.la),
            ("ki", self.ki),
            ("kb", self.kb),
        ]
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            alpha: -self.b / self.j,
            beta: self.ki / self.j,
            gamma: -self.kb / self.la,
            rho: -self.ra / self.la,
            s: 1.0 / self.la,
            nu: 1.0 / self.j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlKind {
    Speed,
    Position,
}

impl ControlKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlKind::Speed => "speed",
            ControlKind::Position => "position",
        }
    }
}

/// Linear motor model `ẋ = Ax + b·Vₐ + g·τ_L + ref_inject·r`, `y = Cx`.
///
/// For position control the reference acts as a setpoint on the measured
/// output instead: feedback uses `x − ref_setpoint·r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    kind: ControlKind,
    params: MotorParams,
    a: DMatrix<f64>,
    b_input: DMatrix<f64>,
    g_dist: DMatrix<f64>,
    c_output: DMatrix<f64>,
    ref_inject: DMatrix<f64>,
    ref_setpoint: DMatrix<f64>,
    state_labels: [&'static str; 3],
}

impl PlantModel {
    pub fn kind(&self) -> ControlKind {
        self.kind
    }
    pub fn params(&self) -> &MotorParams {
        &self.params
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b_input(&self) -> &DMatrix<f64> {
        &self.b_input
    }
    pub fn g_dist(&self) -> &DMatrix<f64> {
        &self.g_dist
    }
    pub fn c_output(&self) -> &DMatrix<f64> {
        &self.c_output
    }
    pub fn ref_inject(&self) -> &DMatrix<f64> {
        &self.ref_inject
    }
    pub fn ref_setpoint(&self) -> &DMatrix<f64> {
        &self.ref_setpoint
    }
    pub fn state_labels(&self) -> &[&'static str; 3] {
        &self.state_labels
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_outputs(&self) -> usize {
        self.c_output.nrows()
    }

    /// Same model with a different output matrix. Used to study other
    /// measurement sets; the motor models themselves always measure the
    /// first two states.
    pub fn with_output(&self, c_output: DMatrix<f64>) -> Result<Self> {
        if c_output.ncols() != self.n_states() || c_output.nrows() == 0 {
            return Err(Error::dim(
                "PlantModel::with_output",
                format!("r x {}", self.n_states()),
                format!("{}x{}", c_output.nrows(), c_output.ncols()),
            ));
        }
        Ok(Self {
            c_output,
            ..self.clone()
        })
    }
}

fn shared_matrices(p: &MotorParams) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let c = p.coefficients();
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 3, &[
        0.0, 1.0,     0.0,
        0.0, c.alpha, c.beta,
        0.0, c.gamma, c.rho,
    ]);
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, c.s]);
    let g = DMatrix::from_column_slice(3, 1, &[0.0, c.nu, 0.0]);
    let out = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    (a, b, g, out)
}

/// Integrator-augmented speed model with states `(ε, ω, i_a)`, where
/// `ε̇ = ω − ω_r`.
pub fn speed_model(p: &MotorParams) -> PlantModel {
    let (a, b_input, g_dist, c_output) = shared_matrices(p);
    PlantModel {
        kind: ControlKind::Speed,
        params: *p,
        a,
        b_input,
        g_dist,
        c_output,
        ref_inject: DMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 0.0]),
        ref_setpoint: DMatrix::zeros(3, 1),
        state_labels: ["eps", "omega", "i_a"],
    }
}

/// Position model with states `(θ, ω, i_a)`. The angle reference is
/// compared against the measured `θ`.
pub fn position_model(p: &MotorParams) -> PlantModel {
    let (a, b_input, g_dist, c_output) = shared_matrices(p);
    PlantModel {
        kind: ControlKind::Position,
        params: *p,
        a,
        b_input,
        g_dist,
        c_output,
        ref_inject: DMatrix::zeros(3, 1),
        ref_setpoint: DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        state_labels: ["theta", "omega", "i_a"],
    }
}

pub fn model_for(kind: ControlKind, p: &MotorParams) -> PlantModel {
    match kind {
        ControlKind::Speed => speed_model(p),
        ControlKind::Position => position_model(p),
    }
}
