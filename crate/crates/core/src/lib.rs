//! Fisher information, controlled energy measurements and phase-estimation
//! read-out for finite-dimensional quantum probes.

pub mod cem;
pub mod error;
pub mod fisher;
pub mod matcore;
pub mod models;
pub mod phasesim;
pub mod random;
pub mod selftest;
pub mod tolerances;

pub use error::{QmetError, Result};
pub use tolerances::Tolerances;
