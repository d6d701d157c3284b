//! Track geometry, vehicle dynamics, the racing environment, policy
//! optimization and telemetry analysis for torque-vectoring race cars.

// `!(x > 0.0)` rejects NaN along with non-positive values; kept on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod policy;
pub mod telemetry;
pub mod track;
pub mod vehicle;

pub use error::{Error, Result};
