use adaptforge::engine::{AdaptTrace, TraceRow};
use adaptforge::pool::build_pool;
use adaptforge::qubit_map::{Pauli, PauliString};
use adaptforge::resources::{ansatz_resources, resource_curve, synthesize_term, Circuit, Gate};
use proptest::prelude::*;

#[test]
fn singlet_single_hand_count() {
    // 0 -> 1 on two spatial orbitals: four weight-3 strings (X Z Y, Y Z X per
    // spin) at 4 CNOTs and 5 one-qubit gates each, plus two reference X.
    let pool = build_pool(2, 1).unwrap();
    let single = &pool[0];
    assert_eq!(single.qubit_form.len(), 4);
    let c = Circuit {
        n_qubits: 4,
        occupied: vec![0, 1],
        generators: vec![single.qubit_form.clone()],
    };
    let r = ansatz_resources(&c).unwrap();
    assert_eq!(
        (r.cnot_gates, r.single_qubit_gates, r.total_gates),
        (16, 22, 38)
    );
}

#[test]
fn misaligned_history_is_an_error() {
    let trace = AdaptTrace {
        rows: Vec::<TraceRow>::new(),
    };
    assert!(resource_curve(&trace, &[Circuit::default()]).is_err());
    assert!(resource_curve(&trace, &[]).unwrap().is_empty());
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliString> {
    proptest::collection::vec(0u8..4, n).prop_map(|letters| {
        let l: Vec<(usize, Pauli)> = letters
            .iter()
            .enumerate()
            .filter_map(|(q, &k)| match k {
                1 => Some((q, Pauli::X)),
                2 => Some((q, Pauli::Y)),
                3 => Some((q, Pauli::Z)),
                _ => None,
            })
            .collect();
        PauliString::from_letters(&l)
    })
}

proptest! {
    #[test]
    fn cnots_per_term(p in pauli_strategy(12)) {
        let gates = synthesize_term(p, 12).unwrap();
        let w = p.weight();
        let cnots = gates.iter().filter(|g| g.is_cnot()).count();
        prop_assert_eq!(cnots, if w == 0 { 0 } else { 2 * (w - 1) });
        let rz = gates.iter().filter(|g| matches!(g, Gate::Rz(_))).count();
        prop_assert_eq!(rz, usize::from(w > 0));
        let xy = p.support().iter().filter(|&&q| p.get(q) != Pauli::Z).count();
        prop_assert_eq!(gates.len() - cnots - rz, 2 * xy);
    }
}
