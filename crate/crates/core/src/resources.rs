//! Gate, CNOT and depth counts of first-order Trotterized ansatz circuits.

use serde::{Deserialize, Serialize};

use crate::engine::AdaptTrace;
use crate::qubit_map::{Pauli, PauliString, QubitOperator};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    /// Hadamard (basis change for X).
    H(usize),
    /// `Rx(+-pi/2)` (basis change for Y).
    Rx(usize),
    Rz(usize),
    X(usize),
    Cnot {
        control: usize,
        target: usize,
    },
}

impl Gate {
    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Rx(q) | Gate::Rz(q) | Gate::X(q) => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }
}

/// `exp(i theta P)` as basis changes, a CNOT ladder onto the highest support
/// qubit, one `Rz`, and the mirrored uncompute. The identity gives no gates.
pub fn synthesize_term(pauli: PauliString, n_qubits: usize) -> Result<Vec<Gate>> {
    if let Some(q) = pauli.max_qubit() {
        if q >= n_qubits {
            return Err(Error::Register { qubit: q, n_qubits });
        }
    }
    let support = pauli.support();
    let Some(&last) = support.last() else {
        return Ok(Vec::new());
    };
    let mut basis = Vec::new();
    for &q in &support {
        match pauli.get(q) {
            Pauli::X => basis.push(Gate::H(q)),
            Pauli::Y => basis.push(Gate::Rx(q)),
            _ => {}
        }
    }
    let ladder: Vec<Gate> = support
        .windows(2)
        .map(|w| Gate::Cnot {
            control: w[0],
            target: w[1],
        })
        .collect();
    let mut gates = basis.clone();
    gates.extend(ladder.iter().copied());
    gates.push(Gate::Rz(last));
    gates.extend(ladder.iter().rev().copied());
    gates.extend(basis);
    Ok(gates)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub total_gates: usize,
    pub cnot_gates: usize,
    pub single_qubit_gates: usize,
    /// Longest gate path with gates on disjoint qubits run in parallel.
    pub depth: usize,
}

/// An ansatz as a circuit: X gates on `occupied`, then one Trotter step of
/// every generator in order.
#[derive(Clone, Debug, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub occupied: Vec<usize>,
    pub generators: Vec<QubitOperator>,
}

struct Tally {
    ready: Vec<usize>,
    count: ResourceCount,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            ready: vec![0; n],
            count: ResourceCount::default(),
        }
    }

    fn push(&mut self, g: Gate) {
        let (a, b) = g.qubits();
        let start = b.map_or(self.ready[a], |b| self.ready[a].max(self.ready[b]));
        self.ready[a] = start + 1;
        if let Some(b) = b {
            self.ready[b] = start + 1;
        }
        self.count.total_gates += 1;
        if g.is_cnot() {
            self.count.cnot_gates += 1;
        } else {
            self.count.single_qubit_gates += 1;
        }
        self.count.depth = self.count.depth.max(start + 1);
    }
}

/// Counts for the whole circuit; Pauli terms within a generator are taken in
/// their canonical order.
pub fn ansatz_resources(circuit: &Circuit) -> Result<ResourceCount> {
    let mut t = Tally::new(circuit.n_qubits);
    for &q in &circuit.occupied {
        if q >= circuit.n_qubits {
            return Err(Error::Register {
                qubit: q,
                n_qubits: circuit.n_qubits,
            });
        }
        t.push(Gate::X(q));
    }
    for g in &circuit.generators {
        for (p, _) in g.terms() {
            for gate in synthesize_term(p, circuit.n_qubits)? {
                t.push(gate);
            }
        }
    }
    Ok(t.count)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub iteration: usize,
    pub energy_error: f64,
    pub counts: ResourceCount,
}

/// One row per trace row, counting the circuit recorded for that row.
pub fn resource_curve(trace: &AdaptTrace, history: &[Circuit]) -> Result<Vec<ResourceRow>> {
    if trace.rows.len() != history.len() {
        return Err(Error::Misaligned(format!(
            "{} trace rows but {} circuits",
            trace.rows.len(),
            history.len()
        )));
    }
    trace
        .rows
        .iter()
        .zip(history)
        .map(|(row, c)| {
            Ok(ResourceRow {
                iteration: row.iteration,
                energy_error: row.energy_error_vs_fci,
                counts: ansatz_resources(c)?,
            })
        })
        .collect()
}

/// CSV with columns `iteration,energy_error_Ha,total_gates,cnot_gates,depth`.
pub fn resource_csv(rows: &[ResourceRow]) -> String {
    let mut out = String::from("iteration,energy_error_Ha,total_gates,cnot_gates,depth\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.12e},{},{},{}\n",
            r.iteration, r.energy_error, r.counts.total_gates, r.counts.cnot_gates, r.counts.depth
        ));
    }
    out
}
