//! Low-rank state tomography for multi-qubit Pauli-setting measurements.
//!
//! The crate covers the whole pipeline of an ion-trap style tomography study:
//!
//! * [`pauli_model`]: the measurement design (settings, outcomes, the linear
//!   map from Pauli coefficients to outcome probabilities and its inverse);
//! * [`sampler`]: multinomial count simulation, batch splitting and the
//!   dataset/state JSON formats;
//! * [`estimators`]: least squares, rank truncation, the rank-penalised and
//!   physical threshold estimators, and the oracle benchmark;
//! * [`model_selection`]: cross-validation of the truncation rank and of the
//!   penalty/threshold constants;
//! * [`state_gen`]: random rank-r density matrices;
//! * [`fisher_bounds`]: Fisher information of basis measurements, its Haar
//!   average and the asymptotic minimax bound;
//! * [`experiments`]: the scenario harness, aggregation and CSV/JSON/SVG output.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fisher_bounds;
pub mod linalg;
pub mod model_selection;
pub mod pauli_model;
pub mod sampler;
pub mod seed;
pub mod state_gen;
pub mod svg;

pub use error::{Result, TomoError};
pub use linalg::{CMatrix, DensityMatrix, HermitianEstimate};
