//! Pure-state quantum circuit simulation with Lie-algebra geometry diagnostics.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantum`] dense statevectors, Pauli/dense generators, rotations, fidelity
//!   and the eigen-sum fidelity derivative.
//! * [`cla`] classical-to-Lie-algebra coefficient maps, their weight/data
//!   Jacobians, numerical rank and the almost-complete-local-selectivity check.
//! * [`ansatz`] layered circuit builders for pure data re-uploading (PDR) and
//!   aCLS models together with their gate/weight counts.
//! * [`model`], [`train`] and [`metrics`] forward pass, adjoint gradients,
//!   Adam with plateau decay and early stopping, ROC AUC and confusion matrices.
//! * [`data`] synthetic hypersphere benchmark, min-max scaling and CSV I/O.
//! * [`verify`] the cross-module invariant suite used by `qfeat verify`.

pub mod ansatz;
pub mod cla;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod quantum;
pub mod train;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used for amplitudes and operator entries.
pub type C64 = nalgebra::Complex<f64>;
