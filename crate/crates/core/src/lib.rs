//! Simulation of a two-qubit photonic phase gate built from a quantum dot in a
//! cavity whose exciton energy is switched by a fast Stark-shift schedule.
//!
//! Photons are treated one at a time in the single-excitation sector: the
//! waveguide is discretised into a quasi-continuum of modes, the amplitude
//! equations are integrated with a fixed-step fourth-order integrating-factor Runge-Kutta scheme, and the scattered pulse is
//! reconstructed from the final mode amplitudes.
//!
//! Units: the QD-cavity coupling `g` sets the frequency unit, times are in `1/g`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod output;
pub mod protocol;

pub use error::{Error, ErrorKind, Result};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;
