//! Clifford+T unitary synthesis driven by a learned estimate of the minimum
//! description length (remaining gate count) of residual unitaries.
//!
//! The pipeline: sample training circuits ([`datagen`]), fit a small MLP
//! regressor ([`nn`]), then run stochastic beam search over residuals
//! ([`search`]). [`oracle`] provides exact breadth-first synthesis for small
//! registers and [`bench`] the evaluation harnesses.
//!
//! Qubit 0 is the most significant tensor factor everywhere.

pub mod bench;
pub mod circuit;
pub mod datagen;
pub mod error;
pub mod gate;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod peephole;
pub mod rng;
pub mod search;
pub mod unitary;

pub use circuit::{circuit_unitary, Circuit};
pub use error::{Error, Result};
pub use gate::{Gate, GateKind};
pub use metrics::{avg_fidelity, hs_distance, is_converged, worst_case_distance, FidelityScore};
pub use unitary::{gate_matrix, kron_pad, residual, Unitary};
