mod common;

use adaptforge::engine::{OrbitalBasis, Problem};
use adaptforge::qubit_map::{
    build_hamiltonian, jordan_wigner, s2_operator, to_sparse, FermionOperator, Ladder, SectorBasis,
    Statevector,
};
use adaptforge::scf::run_rhf;
use adaptforge::IntegralSet;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn dense(op: &FermionOperator, n: usize) -> Vec<Complex64> {
    to_sparse(&jordan_wigner(op), n).unwrap().to_dense()
}

fn matmul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for k in 0..d {
            let x = a[i * d + k];
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += x * b[k * d + j];
            }
        }
    }
    c
}

#[test]
fn jordan_wigner_canonical_anticommutators() {
    let n = 4;
    let d = 1 << n;
    for p in 0..n {
        for q in 0..n {
            let ap = dense(&FermionOperator::term(1.0, vec![Ladder::annihilate(p)]), n);
            let aq_dag = dense(&FermionOperator::term(1.0, vec![Ladder::create(q)]), n);
            let aq = dense(&FermionOperator::term(1.0, vec![Ladder::annihilate(q)]), n);
            let anti: Vec<Complex64> = matmul(&ap, &aq_dag, d)
                .iter()
                .zip(matmul(&aq_dag, &ap, d))
                .map(|(x, y)| x + y)
                .collect();
            let same: Vec<Complex64> = matmul(&ap, &aq, d)
                .iter()
                .zip(matmul(&aq, &ap, d))
                .map(|(x, y)| x + y)
                .collect();
            for i in 0..d {
                for j in 0..d {
                    let want = if p == q && i == j { 1.0 } else { 0.0 };
                    assert!((anti[i * d + j] - want).norm() < 1e-14);
                    assert!(same[i * d + j].norm() < 1e-14);
                }
            }
        }
    }
}

/// Applies `a_p^dagger a_q^dagger a_s a_r` (modes right to left) to a bit
/// string; returns the sign and result, or `None` if it vanishes.
fn apply_ladders(bits: u64, ops: &[(usize, bool)]) -> Option<(f64, u64)> {
    let mut b = bits;
    let mut sign = 1.0;
    for &(mode, create) in ops.iter().rev() {
        let occupied = b >> mode & 1 == 1;
        if occupied == create {
            return None;
        }
        if (b & ((1u64 << mode) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b ^= 1 << mode;
    }
    Some((sign, b))
}

/// Second-quantized Hamiltonian matrix on the determinant sector, built
/// from the integrals directly without any qubit mapping.
fn determinant_hamiltonian(ints: &IntegralSet, basis: &SectorBasis) -> Vec<f64> {
    let n = 2 * ints.n_orb;
    let d = basis.dim();
    let mut m = vec![0.0; d * d];
    for col in 0..d {
        let bits = basis.state(col);
        m[col * d + col] += ints.e_core;
        for p in 0..n {
            for q in 0..n {
                if p % 2 != q % 2 {
                    continue;
                }
                let h = ints.h_core[(p / 2, q / 2)];
                if let Some((s, b)) = apply_ladders(bits, &[(p, true), (q, false)]) {
                    m[basis.index(b).unwrap() * d + col] += s * h;
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        if p % 2 != r % 2 || q % 2 != s % 2 {
                            continue;
                        }
                        let v = ints.eri_phys(p / 2, q / 2, r / 2, s / 2);
                        if v == 0.0 {
                            continue;
                        }
                        let ops = [(p, true), (q, true), (s, false), (r, false)];
                        if let Some((sg, b)) = apply_ladders(bits, &ops) {
                            m[basis.index(b).unwrap() * d + col] += 0.5 * sg * v;
                        }
                    }
                }
            }
        }
    }
    m
}

fn compare_with_determinant_oracle(ints: &IntegralSet) {
    let basis = SectorBasis::for_electrons(ints.n_orb, ints.n_elec, ints.ms2).unwrap();
    let h = basis
        .to_sparse(&build_hamiltonian(ints))
        .unwrap()
        .to_dense();
    let want = determinant_hamiltonian(ints, &basis);
    let worst = h
        .iter()
        .zip(&want)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    assert!(
        worst < 1e-13 * scale,
        "max deviation {worst} at scale {scale}"
    );
}

#[test]
fn sector_hamiltonian_matches_determinant_oracle() {
    compare_with_determinant_oracle(&common::random_ints(4, 4, 11));
    compare_with_determinant_oracle(&common::random_ints(3, 2, 12));
    compare_with_determinant_oracle(&common::load("h4_tetra_1.5").ints);
}

#[test]
fn reference_energy_is_rhf_energy() {
    for id in common::H4_IDS.into_iter().chain(common::H2O_IDS) {
        let f = common::load(id);
        let (frozen, deleted) = common::active_space(id);
        let p = Problem::prepare(&f.ints, OrbitalBasis::Canonical, &frozen, &deleted).unwrap();
        let rhf = run_rhf(&f.ints).unwrap().energy;
        assert!((p.reference_energy - rhf).abs() < 1e-8, "{id}");
        assert!((p.rhf_energy - rhf).abs() < 1e-8, "{id}");
    }
}

#[test]
fn sector_agrees_with_full_register() {
    let ints = common::random_ints(3, 4, 5);
    let basis = SectorBasis::for_electrons(3, 4, 0).unwrap();
    let q = build_hamiltonian(&ints);
    let full = to_sparse(&q, 6).unwrap();
    let sector = basis.to_sparse(&q).unwrap();
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            let f = full.get(basis.state(i) as usize, basis.state(j) as usize);
            assert!(f.im.abs() < 1e-14);
            assert!((f.re - sector.get(i, j)).abs() < 1e-14);
        }
    }
}

#[test]
fn hamiltonian_commutes_with_spin_squared() {
    let ints = common::random_ints(3, 2, 9);
    let comm = build_hamiltonian(&ints).commutator(&s2_operator(3));
    assert!(comm.one_norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sector_embedding_round_trips(seed in any::<u64>()) {
        let basis = SectorBasis::new(4, 2, 1).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(n > 1e-6);
        v.iter_mut().for_each(|x| *x /= n);
        let psi = Statevector::from_sector(&basis, &v).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        let back = psi.to_sector(&basis).unwrap();
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
