//! Simulation and detection of real-time frame-duplication attacks on
//! surveillance media, using the electrical network frequency (ENF) embedded
//! in mains hum and rolling-shutter light flicker.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod detect;
pub mod error;
pub mod extract;
pub mod harness;
pub mod media;
pub mod signal;

pub use error::{Error, Result};
