//! Exact simulation of linear-optical quantum experiments.
//!
//! States live at two levels. [`fock::FockState`] holds sparse bosonic
//! amplitudes over a registry of optical modes; [`qubit::QubitRegister`] and
//! [`qubit::DensityOperator`] hold dense qubit amplitudes once photons have
//! been post-selected into a one-photon-per-qubit encoding.

pub mod error;
pub mod fock;
pub mod mbqc;
pub mod nonlocal;
pub mod optics;
pub mod protocols;
pub mod qubit;
pub mod repeater;
pub mod sources;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Crate version, recorded in experiment provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerance for algebraic identities.
pub const TOL: f64 = 1e-10;

/// Amplitudes below this modulus are dropped.
pub const PRUNE: f64 = 1e-14;
