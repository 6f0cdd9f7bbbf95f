//! Simulation core for probing ground-state preparation through the
//! oscillations that follow a diabatic field ramp.
//!
//! The pieces, bottom up:
//!
//! - [`spin`]: Pauli operators, states and observables on a `2^N` basis.
//! - [`couplings`]: ion-chain equilibrium, transverse phonon modes and the
//!   Ising couplings they mediate.
//! - [`model`]: Landau-Zener and transverse-field Ising Hamiltonians and the
//!   field schedules driving them.
//! - [`propagator`]: Crank-Nicolson evolution and an exact reference.
//! - [`analysis`]: spectra, overlaps, amplitudes and spectroscopy.

pub mod analysis;
pub mod couplings;
pub mod error;
pub mod model;
pub mod propagator;
pub mod spin;

pub use error::{Error, Result};
