//! Noiseless ADAPT-VQE simulator for small molecular Hamiltonians.
//!
//! The pipeline runs from FCIDUMP integrals through restricted/unrestricted
//! Hartree-Fock and natural orbitals, a Jordan-Wigner qubit mapping, a
//! spin-adapted excitation pool and the adaptive ansatz loop. Exact
//! diagonalization, density-matrix fidelity and circuit-resource counts are
//! provided for analysis.

pub mod engine;
pub mod error;
pub mod io_integrals;
mod linalg;
pub mod oracle;
pub mod pool;
pub mod qubit_map;
pub mod resources;
pub mod scf;

pub use error::{Error, Result};
pub use io_integrals::IntegralSet;

/// Chemical accuracy threshold in Hartree (1 kcal/mol).
pub const CHEMICAL_ACCURACY: f64 = 1.6e-3;
