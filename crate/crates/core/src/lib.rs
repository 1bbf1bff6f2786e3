//! Multi-shot classical shadow estimation.
//!
//! The crate simulates randomized-measurement experiments on small quantum
//! states (M sampled unitaries, K computational-basis shots per unitary),
//! evaluates shadow estimators, and checks the exact variance of those
//! estimators against analytic predictions and brute-force oracles.
//!
//! Layout:
//! - [`pauli`] and [`dense`]: Pauli strings in (x, z) bit encoding and dense operators.
//! - [`clifford`]: single-qubit and global Clifford elements, Haar unitaries.
//! - [`state`]: statevectors, density matrices, Born distributions.
//! - [`shadow`]: data collection, snapshots, estimators, shadow-set files.
//! - [`variance`]: second-moment functionals, variance predictors, twirl checks.
//! - [`sweep`], [`config`], [`verify`]: the experiment harness behind the CLI.

pub mod clifford;
pub mod config;
pub mod dense;
pub mod error;
pub mod exec;
pub mod observable;
pub mod pauli;
pub mod shadow;
pub mod state;
pub mod stats;
pub mod sweep;
pub mod variance;
pub mod verify;

pub use clifford::{CliffordTableau, Ensemble, SingleQubitClifford, UnitaryDescriptor};
pub use dense::DenseOperator;
pub use error::{Error, Result};
pub use exec::Execution;
pub use observable::Observable;
pub use pauli::{Pauli, PauliString};
pub use shadow::{EstimateReport, MeasurementRecord, ShadowSet};
pub use state::{OutcomeDistribution, QuantumState};

pub use num_complex::Complex64;
