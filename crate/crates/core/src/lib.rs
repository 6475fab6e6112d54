//! Linear-quadratic projective control for DC motors.
//!
//! The crate computes an LQR full-state gain for an integrator-augmented
//! speed model (or the position model), projects it onto output-only
//! feedback while keeping a chosen set of closed-loop eigenvalues, checks a
//! quadratic disturbance-to-state stability condition and validates the
//! result with fixed-step and Monte Carlo simulations.
//!
//! ```no_run
//! use lqpc::design::{design, LqrWeights, RetentionPolicy};
//! use lqpc::motor::{speed_model, MotorParams};
//!
//! let model = speed_model(&MotorParams::table1());
//! let result = design(&model, &LqrWeights::new(50.0, 1.0)?, &RetentionPolicy::dominant(2))?;
//! println!("{}", result.k_out);
//! # Ok::<(), lqpc::Error>(())
//! ```

pub mod cli;
pub mod design;
mod error;
pub mod motor;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
