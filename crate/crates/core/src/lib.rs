//! Time-bin entanglement tomography for cascaded photon emitters.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod correlation;
pub mod error;
pub mod histogram;
pub mod interferometer;
pub mod math;
pub mod report;
pub mod source;
pub mod tomography;
pub mod verify;

pub use error::{Error, Result};
