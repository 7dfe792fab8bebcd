use super::fermion::{jordan_wigner, FermionOperator, Ladder};
use super::pauli::{QubitOperator, ZERO_TOL};
use super::spin_orbital;
use crate::IntegralSet;

/// Second-quantized molecular Hamiltonian over `2 * n_orb` spin orbitals:
/// `e_core + sum h_pq a+_p a_q + 1/2 sum <pq|rs> a+_p a+_q a_s a_r`.
pub fn fermion_hamiltonian(ints: &IntegralSet) -> FermionOperator {
    let n = ints.n_orb;
    let mut f = FermionOperator::new();
    if ints.e_core != 0.0 {
        f.push(ints.e_core, vec![]);
    }
    for p in 0..n {
        for q in 0..n {
            let h = ints.h_core[(p, q)];
            if h == 0.0 {
                continue;
            }
            for beta in [false, true] {
                f.push(
                    h,
                    vec![
                        Ladder::create(spin_orbital(p, beta)),
                        Ladder::annihilate(spin_orbital(q, beta)),
                    ],
                );
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let v = ints.eri_phys(p, q, r, s);
                    if v == 0.0 {
                        continue;
                    }
                    for sp in [false, true] {
                        for sq in [false, true] {
                            let (a, b) = (spin_orbital(p, sp), spin_orbital(q, sq));
                            let (c, d) = (spin_orbital(r, sp), spin_orbital(s, sq));
                            if a == b || c == d {
                                continue;
                            }
                            f.push(
                                0.5 * v,
                                vec![
                                    Ladder::create(a),
                                    Ladder::create(b),
                                    Ladder::annihilate(d),
                                    Ladder::annihilate(c),
                                ],
                            );
                        }
                    }
                }
            }
        }
    }
    f
}

/// Jordan-Wigner image of [`fermion_hamiltonian`].
pub fn build_hamiltonian(ints: &IntegralSet) -> QubitOperator {
    let mut q = jordan_wigner(&fermion_hamiltonian(ints));
    q.simplify(ZERO_TOL);
    q
}

/// Singlet excitation `E_pq = sum_sigma a+_{p sigma} a_{q sigma}`.
pub fn spatial_excitation(p: usize, q: usize) -> FermionOperator {
    FermionOperator::hopping(1.0, spin_orbital(p, false), spin_orbital(q, false)).add(
        &FermionOperator::hopping(1.0, spin_orbital(p, true), spin_orbital(q, true)),
    )
}

/// Total particle number on `n_modes` spin orbitals.
pub fn number_operator(n_modes: usize) -> QubitOperator {
    let mut f = FermionOperator::new();
    for k in 0..n_modes {
        f.push(1.0, vec![Ladder::create(k), Ladder::annihilate(k)]);
    }
    jordan_wigner(&f)
}

fn sz_fermion(n_orb: usize) -> FermionOperator {
    let mut f = FermionOperator::new();
    for p in 0..n_orb {
        let (a, b) = (spin_orbital(p, false), spin_orbital(p, true));
        f.push(0.5, vec![Ladder::create(a), Ladder::annihilate(a)]);
        f.push(-0.5, vec![Ladder::create(b), Ladder::annihilate(b)]);
    }
    f
}

/// `S_z` on `n_orb` spatial orbitals.
pub fn sz_operator(n_orb: usize) -> QubitOperator {
    jordan_wigner(&sz_fermion(n_orb))
}

/// `S^2 = S- S+ + S_z + S_z^2` on `n_orb` spatial orbitals.
pub fn s2_operator(n_orb: usize) -> QubitOperator {
    let mut s_plus = FermionOperator::new();
    for p in 0..n_orb {
        s_plus.push(
            1.0,
            vec![
                Ladder::create(spin_orbital(p, false)),
                Ladder::annihilate(spin_orbital(p, true)),
            ],
        );
    }
    let sz = sz_fermion(n_orb);
    let f = s_plus
        .dagger()
        .mul(&s_plus)
        .add(&sz)
        .add(&sz.mul(&sz))
        .canonical();
    let mut q = jordan_wigner(&f);
    q.simplify(ZERO_TOL);
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit_map::sector::SectorBasis;
    use crate::qubit_map::sparse::to_sparse;
    use crate::qubit_map::state::{expectation, Statevector};

    #[test]
    fn single_site_closed_form() {
        let mut ints = IntegralSet::zeros(1, 2);
        ints.set_h(0, 0, -1.0);
        ints.set_eri(0, 0, 0, 0, 0.5);
        let h = build_hamiltonian(&ints);
        assert!(h.is_hermitian(1e-14));
        let m = to_sparse(&h, 2).unwrap();
        let psi = Statevector::basis(2, 0b11).unwrap();
        assert!((expectation(&m, &psi).unwrap() + 1.5).abs() < 1e-14);
        let sector = SectorBasis::new(1, 1, 1).unwrap();
        let hs = sector.to_sparse(&h).unwrap();
        assert!((hs.get(0, 0) + 1.5).abs() < 1e-14);
    }

    #[test]
    fn spin_of_simple_states() {
        let s2 = to_sparse(&s2_operator(1), 2).unwrap();
        let n = to_sparse(&number_operator(2), 2).unwrap();
        let pair = Statevector::basis(2, 0b11).unwrap();
        assert!(expectation(&s2, &pair).unwrap().abs() < 1e-14);
        assert!((expectation(&n, &pair).unwrap() - 2.0).abs() < 1e-14);
        let alpha = Statevector::basis(2, 0b01).unwrap();
        assert!((expectation(&s2, &alpha).unwrap() - 0.75).abs() < 1e-14);
        // Open-shell singlet/triplet mixture |a0 b1>: <S^2> = 1.
        let s2 = to_sparse(&s2_operator(2), 4).unwrap();
        let mixed = Statevector::basis(4, 0b1001).unwrap();
        assert!((expectation(&s2, &mixed).unwrap() - 1.0).abs() < 1e-14);
    }
}
