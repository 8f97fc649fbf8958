//! Closed-loop wind-farm active power control.
//!
//! The crate couples a delayed actuator-disk wake surrogate, per-turbine
//! single-mass servo models and a frequency-support block with a receding
//! horizon controller that dispatches per-turbine power commands. The
//! controller trades power-reference tracking against dynamic axial-load
//! variation and load equalization across turbines.
//!
//! Module map:
//!
//! - [`wind_field`]: turbulent freestream synthesis and wake propagation.
//! - [`turbine`]: thrust/power relations, thrust-coefficient surface and the
//!   speed/pitch servo loop.
//! - [`freq_control`]: droop and virtual-inertia power reference.
//! - [`mpc`]: prediction model, objective and constraint assembly, dispatch.
//! - [`qp`]: operator-splitting QP solver with KKT certification.
//! - [`metrics`]: dynamic-fatigue and load-equalization indices.
//! - [`harness`]: scenario files, the closed loop, sweeps and CSV outputs.
//!
//! Runnable walkthroughs for each of these live under `examples/`.

pub mod error;
pub mod freq_control;
pub mod harness;
pub mod metrics;
pub mod mpc;
pub mod qp;
pub mod turbine;
pub mod wind_field;

pub use error::{Error, Result};
