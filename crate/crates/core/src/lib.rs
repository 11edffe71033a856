//! Simulation and training toolkit for 2-local quantum restricted Boltzmann machines.

pub mod ansatz;
pub mod error;
pub mod exactdiag;
pub mod experiment;
pub mod gadgets;
pub mod hamiltonians;
pub mod pauli;
pub mod qite;
pub mod statevec;
pub mod trainers;

pub use error::{QrbmError, Result};
pub use pauli::{pauli_mul, sum_combine, Pauli, PauliString, PauliSum, Phase};
pub use statevec::StateVector;
