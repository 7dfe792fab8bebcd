//! Python bindings. Results cross the boundary as JSON strings so the Python
//! side needs nothing beyond the standard library.

use adaptforge::engine::{run_adapt, RunConfig};
use adaptforge::io_integrals::Fixture;
use adaptforge::scf::{run_rhf, run_uhf, UhfGuess};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: adaptforge::Error) -> PyErr {
    match e {
        adaptforge::Error::Config(_) | adaptforge::Error::Selection(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// `(n_orb, n_elec, sha256)` of a fixture.
#[pyfunction]
fn fixture_info(fixture: &str) -> PyResult<(usize, usize, String)> {
    let f = Fixture::load(fixture).map_err(to_py)?;
    Ok((f.ints.n_orb, f.ints.n_elec, f.checksum))
}

/// `(E_RHF, E_UHF)` in Hartree for a fixture.
#[pyfunction]
fn scf_energies(fixture: &str) -> PyResult<(f64, f64)> {
    let f = Fixture::load(fixture).map_err(to_py)?;
    let rhf = run_rhf(&f.ints).map_err(to_py)?;
    let uhf = run_uhf(&f.ints, UhfGuess::default()).map_err(to_py)?;
    Ok((rhf.energy, uhf.energy))
}

/// Runs ADAPT from a JSON config and returns a JSON object with `trace`,
/// `ansatz`, `final_energy`, `fci_energy` and `stop`.
#[pyfunction]
fn run(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config = RunConfig::from_json(config_json).map_err(to_py)?;
    let r = py.detach(|| run_adapt(&config)).map_err(to_py)?;
    let out = serde_json::json!({
        "trace": r.trace.rows,
        "ansatz": r.ansatz,
        "final_energy": r.final_energy,
        "fci_energy": r.fci_energy,
        "rhf_energy": r.rhf_energy,
        "stop": r.stop,
        "n_qubits": r.n_qubits,
        "pool_size": r.pool_size,
    });
    serde_json::to_string(&out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn adaptforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(fixture_info, m)?)?;
    m.add_function(wrap_pyfunction!(scf_energies, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
