//! Solver and verification harness for the resonance-broadened three-wave
//! kinetic equation
//!
//! ```text
//! ∂t f + 2ν k^γ f = C[f],    ω(k) = sqrt(Λ1 + Λ2 k²)
//! ```
//!
//! for radial wave-action spectra. The collision operator replaces the
//! frequency delta by a Lorentzian whose width comes from the spectrum itself.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod broadening;
pub mod collision;
pub mod config;
pub mod error;
pub mod exec;
pub mod integrator;
pub mod io;
pub mod mc;
pub mod params;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
