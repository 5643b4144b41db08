//! Thermal ensembles of a finite quantum system, contrasted two ways.
//!
//! * [`vnte`] averages an observable over energy eigenstates with Gibbs
//!   weights (the trace formula).
//! * [`ste`] averages a functional of the wavefunction over the whole unit
//!   sphere of normalized amplitude vectors, weighted by `exp(-E(psi)/T)`,
//!   so ensemble members are superpositions almost surely.
//!
//! [`models`] supplies a two-level enantiomer model and the symmetric sector
//! of a Curie–Weiss magnet, both with an optional wavefunction-energy term
//! that penalizes centre-of-mass dispersion. [`analysis`] turns these into
//! the questions of interest: which state wins at low temperature, where the
//! crossover sits, and what the ensemble looks like to a detector.

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod rng;
pub mod ste;
pub mod vnte;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use hilbert::{eigendecompose, expectation, EigenSystem, HermitianOperator, StateVector};
pub use num_complex::Complex64;
pub use vnte::{vnte_expectation, vnte_partition, PartitionFunction, ThermalParams};
