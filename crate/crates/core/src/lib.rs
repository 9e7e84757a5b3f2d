//! Simulation toolkit for fault-tolerant Toffoli gates built from distilled
//! two-qubit ancillas.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: dense pure-state and density-matrix simulation.
//! - [`gadgets`]: the measurement-based Toffoli gadget and `|psi3>` synthesis.
//! - [`distill`]: the `rho(alpha)` algebra, distillation trees and cost model.
//! - [`noisy_meas`]: cat-state ancillas and noisy transversal C-NOT / C-PHASE
//!   measurement.
//! - [`error_models`]: decoherent and unitary error classes and their closed
//!   forms.
//! - [`concat`]: log-space progressive concatenation estimates.
//! - [`cli`]: configuration, reports and the experiment harness behind the
//!   `toffoli-distill` binary.

pub mod cli;
pub mod concat;
pub mod distill;
pub mod error;
pub mod error_models;
pub mod gadgets;
pub mod noisy_meas;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
