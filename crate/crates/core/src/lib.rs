//! Open-circuit switch fault diagnosis for three-phase PWM converters.
//!
//! Simulation of faulted phase currents, window features (time-domain
//! statistics, d-q current-vector geometry, Haar filter bank), a CART
//! random forest, and a streaming diagnosis pipeline that fuses
//! instantaneous classifications over each fundamental period.

// Negated float comparisons are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnosis;
pub mod error;
pub mod experiments;
pub mod features;
pub mod forest;
pub mod io;
pub mod label;
pub mod sim;

pub use error::{Error, Result};
pub use label::{FaultLabel, Switch};
