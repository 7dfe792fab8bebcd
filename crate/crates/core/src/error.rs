use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("FCIDUMP line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "{method} did not converge in {iterations} iterations \
         (last energy {energy:.12}, commutator norm {commutator:.3e})"
    )]
    ScfNotConverged {
        method: &'static str,
        iterations: usize,
        energy: f64,
        commutator: f64,
    },

    #[error("invalid orbital selection: {0}")]
    Selection(String),

    #[error("generator is not anti-Hermitian (|G + G^dagger| = {0:.3e})")]
    NotAntiHermitian(f64),

    #[error("imaginary residual {0:.3e} in an expectation value")]
    ImaginaryResidual(f64),

    #[error("operator acts on qubit {qubit} outside a register of {n_qubits}")]
    Register { qubit: usize, n_qubits: usize },

    #[error("operator couples the particle sector to states outside it (weight {0:.3e})")]
    SectorLeak(f64),

    #[error("eigensolver did not converge (residual {0:.3e})")]
    Eigensolver(f64),

    #[error("invalid density matrix: eigenvalue {0:.3e}")]
    InvalidDensity(f64),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("fixture {id}: {msg}")]
    Fixture { id: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
