//! Fermionic operators, the Jordan-Wigner mapping, weighted Pauli-string
//! algebra and sparse realizations over the occupation-number basis.
//!
//! Spin orbitals are interleaved: spin orbital `2p` is the alpha partner of
//! spatial orbital `p`, `2p + 1` the beta partner. Qubit `k` carries the
//! occupation of spin orbital `k`, and bit `k` of a basis-state index is the
//! state of qubit `k`.

mod amplitude;
pub mod fermion;
pub mod hamiltonian;
pub mod pauli;
pub mod sector;
pub mod sparse;
pub mod state;

pub use amplitude::Amplitude;
pub use fermion::{jordan_wigner, FermionOperator, Ladder};
pub use hamiltonian::{
    build_hamiltonian, fermion_hamiltonian, number_operator, s2_operator, sz_operator,
};
pub use pauli::{Pauli, PauliString, QubitOperator};
pub use sector::{SectorBasis, SectorGenerator};
pub use sparse::{to_sparse, CsrMatrix};
pub use state::{apply_exponential, expectation, Statevector};

/// Spin-orbital index of spatial orbital `p` with spin `beta`.
#[inline]
pub fn spin_orbital(p: usize, beta: bool) -> usize {
    2 * p + beta as usize
}
