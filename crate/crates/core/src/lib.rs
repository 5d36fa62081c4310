//! Simulation and analysis of un-collapsing quantum error detection on a
//! superconducting qubit-resonator device.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod protocol;
pub mod tomography;

pub use error::{QedError, Result};
pub use hilbert::C64;
