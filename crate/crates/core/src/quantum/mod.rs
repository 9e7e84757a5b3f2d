//! Dense exact simulation of small qubit registers.

mod gate;
mod measure;
mod state;

pub use gate::{GateKind, GateSpec};
pub use measure::{
    MeasureMode, MeasurementRecord, Observable, Outcome, Pauli, MIN_BRANCH_PROBABILITY,
};
pub use state::{
    labels, QuantumState, QubitLabel, Role, MAX_MIXED_QUBITS, MAX_PURE_QUBITS, ZERO_TOL,
};

#[allow(unused_imports)]
pub(crate) use gate::{kron, matmul};
