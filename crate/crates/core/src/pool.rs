//! Spin-adapted occupied-to-virtual excitation pool, orbital subspaces and
//! the mapping of subspace ansatze back into the full orbital space.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qubit_map::hamiltonian::spatial_excitation;
use crate::qubit_map::{
    jordan_wigner, to_sparse, CsrMatrix, FermionOperator, Ladder, QubitOperator,
};
use crate::scf::{OrbitalRotation, Provenance};
use crate::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// Which singlet coupling of a double excitation `(ij -> ab)`.
///
/// With `T1 = E_ai E_bj` and `T2 = E_aj E_bi`, coupling `A` uses
/// `T1 - T2` and `B` uses `T1 + T2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coupling {
    A,
    B,
}

/// Spatial-orbital label of a pool operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Excitation {
    Single {
        i: usize,
        a: usize,
    },
    Double {
        i: usize,
        j: usize,
        a: usize,
        b: usize,
        coupling: Coupling,
    },
}

impl Excitation {
    pub fn orbitals(&self) -> Vec<usize> {
        match *self {
            Excitation::Single { i, a } => vec![i, a],
            Excitation::Double { i, j, a, b, .. } => vec![i, j, a, b],
        }
    }

    pub fn is_double(&self) -> bool {
        matches!(self, Excitation::Double { .. })
    }

    /// Applies `f` to every spatial index.
    pub fn map(&self, f: impl Fn(usize) -> usize) -> Self {
        match *self {
            Excitation::Single { i, a } => Excitation::Single { i: f(i), a: f(a) },
            Excitation::Double {
                i,
                j,
                a,
                b,
                coupling,
            } => Excitation::Double {
                i: f(i),
                j: f(j),
                a: f(a),
                b: f(b),
                coupling,
            },
        }
    }

    fn try_map(&self, f: impl Fn(usize) -> Option<usize>) -> Option<Self> {
        if self.orbitals().into_iter().all(|p| f(p).is_some()) {
            Some(self.map(|p| f(p).unwrap()))
        } else {
            None
        }
    }
}

impl fmt::Display for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Excitation::Single { i, a } => write!(f, "{i}->{a}"),
            Excitation::Double {
                i,
                j,
                a,
                b,
                coupling,
            } => write!(f, "{i},{j}->{a},{b}/{coupling:?}"),
        }
    }
}

/// An anti-Hermitian, spin-adapted excitation generator.
#[derive(Clone, Debug)]
pub struct PoolOperator {
    pub id: usize,
    pub label: Excitation,
    /// Normal-ordered, unit coefficient norm.
    pub generator: FermionOperator,
    pub qubit_form: QubitOperator,
    sparse: OnceLock<CsrMatrix<Complex64>>,
}

impl PoolOperator {
    fn new(id: usize, label: Excitation, generator: FermionOperator) -> Self {
        let qubit_form = jordan_wigner(&generator);
        Self {
            id,
            label,
            generator,
            qubit_form,
            sparse: OnceLock::new(),
        }
    }

    /// Full-register sparse matrix, built on first use.
    pub fn sparse_form(&self, n_qubits: usize) -> Result<&CsrMatrix<Complex64>> {
        if let Some(m) = self.sparse.get() {
            if m.n_rows() == 1 << n_qubits {
                return Ok(m);
            }
            return Err(Error::Dimension(
                "sparse form already built for another register".into(),
            ));
        }
        let m = to_sparse(&self.qubit_form, n_qubits)?;
        Ok(self.sparse.get_or_init(|| m))
    }
}

fn inner(a: &BTreeMap<Vec<Ladder>, Complex64>, b: &BTreeMap<Vec<Ladder>, Complex64>) -> Complex64 {
    a.iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| va.conj() * vb))
        .sum()
}

fn norm(a: &BTreeMap<Vec<Ladder>, Complex64>) -> f64 {
    a.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn anti_hermitian_part(t: &FermionOperator) -> FermionOperator {
    t.add(&t.dagger().scale(-1.0))
}

/// Normalized generator, or `None` when it vanishes or is linearly dependent
/// on `kept` (Gram residual below 1e-10).
fn orthogonal_generator(
    g: FermionOperator,
    kept: &[BTreeMap<Vec<Ladder>, Complex64>],
) -> Option<(FermionOperator, BTreeMap<Vec<Ladder>, Complex64>)> {
    let no = g.normal_ordered();
    let n = norm(&no);
    if n <= RANK_TOL {
        return None;
    }
    let mut residual = no.clone();
    for k in kept {
        let overlap = inner(k, &no) / (norm(k) * norm(k));
        for (key, v) in k {
            *residual.entry(key.clone()).or_default() -= overlap * v;
        }
    }
    if norm(&residual) / n <= RANK_TOL {
        return None;
    }
    let scaled = g.canonical().scale(1.0 / n);
    let scaled_no = scaled.normal_ordered();
    Some((scaled, scaled_no))
}

/// Singlet singles and doubles from the `n_occ` lowest (doubly occupied)
/// orbitals into the remaining `n_orb - n_occ`.
///
/// Order: singles by `(i, a)`, then doubles by `(i, j, a, b)` with `i <= j`,
/// `a <= b`, coupling `A` before `B`. When indices coincide only one coupling
/// survives the rank check.
pub fn build_pool(n_orb: usize, n_occ: usize) -> Result<Vec<PoolOperator>> {
    if n_occ == 0 || n_occ >= n_orb {
        return Err(Error::InvalidInput(format!(
            "pool needs 0 < n_occ < n_orb, got n_occ={n_occ}, n_orb={n_orb}"
        )));
    }
    let mut pool = Vec::new();
    for i in 0..n_occ {
        for a in n_occ..n_orb {
            let g = anti_hermitian_part(&spatial_excitation(a, i));
            if let Some((g, _)) = orthogonal_generator(g, &[]) {
                pool.push(PoolOperator::new(
                    pool.len(),
                    Excitation::Single { i, a },
                    g,
                ));
            }
        }
    }
    for i in 0..n_occ {
        for j in i..n_occ {
            for a in n_occ..n_orb {
                for b in a..n_orb {
                    let t1 = spatial_excitation(a, i).mul(&spatial_excitation(b, j));
                    let t2 = spatial_excitation(a, j).mul(&spatial_excitation(b, i));
                    let mut kept = Vec::new();
                    for (coupling, sign) in [(Coupling::A, -1.0), (Coupling::B, 1.0)] {
                        let g = anti_hermitian_part(&t1.add(&t2.scale(sign)));
                        if let Some((g, no)) = orthogonal_generator(g, &kept) {
                            kept.push(no);
                            let label = Excitation::Double {
                                i,
                                j,
                                a,
                                b,
                                coupling,
                            };
                            pool.push(PoolOperator::new(pool.len(), label, g));
                        }
                    }
                }
            }
        }
    }
    Ok(pool)
}

/// Ordered subset of full-space spatial orbitals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceMap {
    pub active_spatial: Vec<usize>,
    pub n_orb: usize,
    /// Doubly occupied orbitals of the full-space reference.
    pub n_occ: usize,
}

impl SubspaceMap {
    pub fn new(active_spatial: Vec<usize>, n_orb: usize, n_occ: usize) -> Result<Self> {
        if active_spatial.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Selection(
                "subspace indices must be strictly increasing".into(),
            ));
        }
        if active_spatial.last().is_some_and(|&p| p >= n_orb) {
            return Err(Error::Selection("subspace index out of range".into()));
        }
        Ok(Self {
            active_spatial,
            n_orb,
            n_occ,
        })
    }

    pub fn identity(n_orb: usize, n_occ: usize) -> Self {
        Self {
            active_spatial: (0..n_orb).collect(),
            n_orb,
            n_occ,
        }
    }

    pub fn n_s(&self) -> usize {
        self.active_spatial.len()
    }

    pub fn is_identity(&self) -> bool {
        self.n_s() == self.n_orb
    }

    /// Occupied orbitals inside the subspace.
    pub fn n_occ_sub(&self) -> usize {
        self.active_spatial
            .iter()
            .filter(|&&p| p < self.n_occ)
            .count()
    }

    pub fn to_sub(&self, p: usize) -> Option<usize> {
        self.active_spatial.binary_search(&p).ok()
    }

    pub fn to_full(&self, k: usize) -> usize {
        self.active_spatial[k]
    }

    /// Reference-occupied orbitals outside the subspace.
    pub fn frozen_occupied(&self) -> Vec<usize> {
        (0..self.n_occ)
            .filter(|&p| self.to_sub(p).is_none())
            .collect()
    }

    /// Reference-virtual orbitals outside the subspace.
    pub fn deleted_virtual(&self) -> Vec<usize> {
        (self.n_occ..self.n_orb)
            .filter(|&p| self.to_sub(p).is_none())
            .collect()
    }
}

/// Pool operators whose orbitals all lie in `map`, relabeled onto the compact
/// `2 * n_s` qubit register and renumbered from zero in pool order.
pub fn restrict_pool(pool: &[PoolOperator], map: &SubspaceMap) -> Vec<PoolOperator> {
    let mut out = Vec::new();
    for op in pool {
        let Some(label) = op.label.try_map(|p| map.to_sub(p)) else {
            continue;
        };
        let g = op
            .generator
            .relabel(|m| 2 * map.to_sub(m / 2).expect("label checked") + m % 2);
        out.push(PoolOperator::new(out.len(), label, g));
    }
    out
}

/// Maps subspace ansatz elements onto the full pool by label, keeping order
/// and amplitudes.
pub fn embed_ansatz<'a>(
    elements: &[(&PoolOperator, f64)],
    map: &SubspaceMap,
    full_pool: &'a [PoolOperator],
) -> Result<Vec<(&'a PoolOperator, f64)>> {
    let by_label: BTreeMap<Excitation, &PoolOperator> =
        full_pool.iter().map(|op| (op.label, op)).collect();
    elements
        .iter()
        .map(|(op, theta)| {
            if op.label.orbitals().iter().any(|&k| k >= map.n_s()) {
                return Err(Error::Internal(format!(
                    "operator {} does not fit the subspace",
                    op.label
                )));
            }
            let full = op.label.map(|k| map.to_full(k));
            by_label
                .get(&full)
                .map(|f| (*f, *theta))
                .ok_or_else(|| Error::Internal(format!("no full-space operator {full}")))
        })
        .collect()
}

/// How natural-orbital subspaces are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceCriterion {
    /// Occupation numbers closest to 1.
    #[default]
    Occupancy,
    /// Attached orbital energies nearest the Fermi level.
    OrbitalEnergy,
}

/// Picks `n_s / 2` occupied and `n_s / 2` virtual orbitals nearest the Fermi
/// level. Canonical orbitals always use orbital energies; natural orbitals use
/// `criterion`. Ties go to the lower index. `n_s == n_orb` is the identity.
pub fn select_subspace(
    rot: &OrbitalRotation,
    n_occ: usize,
    n_s: usize,
    criterion: SubspaceCriterion,
) -> Result<SubspaceMap> {
    let n = rot.n_orb();
    if n_s % 2 != 0 || n_s == 0 || n_s > n {
        return Err(Error::Selection(format!(
            "subspace size {n_s} must be even and in 2..={n}"
        )));
    }
    if n_s == n {
        return Ok(SubspaceMap::identity(n, n_occ));
    }
    let half = n_s / 2;
    if half > n_occ || half > n - n_occ {
        return Err(Error::Selection(format!(
            "{half} occupied and {half} virtual orbitals needed, have {n_occ} and {}",
            n - n_occ
        )));
    }
    let use_occupancy =
        rot.provenance == Provenance::Natural && criterion == SubspaceCriterion::Occupancy;
    // Distance from the Fermi level: smaller is closer.
    let key = |p: usize| -> f64 {
        if use_occupancy {
            (rot.occupancies[p] - 1.0).abs()
        } else if let Some(e) = &rot.orbital_energies {
            if p < n_occ {
                -e[p]
            } else {
                e[p]
            }
        } else if p < n_occ {
            (n_occ - p) as f64
        } else {
            (p - n_occ) as f64
        }
    };
    let pick = |range: std::ops::Range<usize>| -> Vec<usize> {
        let mut idx: Vec<usize> = range.collect();
        idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        idx.truncate(half);
        idx
    };
    let mut active = pick(0..n_occ);
    active.extend(pick(n_occ..n));
    active.sort_unstable();
    SubspaceMap::new(active, n, n_occ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn minimal_pool() {
        let pool = build_pool(2, 1).unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool[0].label, Excitation::Single { i: 0, a: 1 });
        assert!(pool[1].label.is_double());
        for op in &pool {
            assert!(op.generator.is_anti_hermitian(1e-12));
            assert!((op.generator.coefficient_norm() - 1.0).abs() < 1e-12);
            assert!(op.qubit_form.is_anti_hermitian(1e-12));
        }
    }

    #[test]
    fn pool_sizes() {
        assert_eq!(build_pool(8, 2).unwrap().len(), 90);
        assert_eq!(build_pool(4, 2).unwrap().len(), 14);
        assert!(build_pool(3, 0).is_err());
        assert!(build_pool(3, 3).is_err());
    }

    #[test]
    fn embed_single_operator() {
        let full = build_pool(8, 2).unwrap();
        let map = SubspaceMap::new(vec![1, 2, 3, 4], 8, 2).unwrap();
        let sub = restrict_pool(&full, &map);
        let op = sub
            .iter()
            .find(|o| o.label == Excitation::Single { i: 0, a: 1 })
            .unwrap();
        let embedded = embed_ansatz(&[(op, 0.1)], &map, &full).unwrap();
        assert_eq!(embedded[0].0.label, Excitation::Single { i: 1, a: 2 });
        assert_eq!(embedded[0].1, 0.1);
        assert!(embed_ansatz(&[], &map, &full).unwrap().is_empty());
    }

    #[test]
    fn restriction_without_virtuals_is_empty() {
        let full = build_pool(6, 3).unwrap();
        let map = SubspaceMap::new(vec![0, 1, 2], 6, 3).unwrap();
        assert!(restrict_pool(&full, &map).is_empty());
        let id = SubspaceMap::identity(6, 3);
        let same = restrict_pool(&full, &id);
        assert_eq!(same.len(), full.len());
        for (a, b) in same.iter().zip(&full) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.qubit_form, b.qubit_form);
        }
    }

    fn rotation(occ: &[f64], energies: Option<&[f64]>, provenance: Provenance) -> OrbitalRotation {
        let n = occ.len();
        OrbitalRotation {
            u: nalgebra::DMatrix::identity(n, n),
            occupancies: DVector::from_column_slice(occ),
            provenance,
            orbital_energies: energies.map(DVector::from_column_slice),
        }
    }

    #[test]
    fn subspace_selection_rules() {
        let e = [-2.0, -1.0, -0.5, 0.1, 0.2, 0.2, 0.9, 1.5];
        let occ = [2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let canon = rotation(&occ, Some(&e), Provenance::Canonical);
        let map = select_subspace(&canon, 2, 4, SubspaceCriterion::Occupancy).unwrap();
        assert_eq!(map.active_spatial, vec![0, 1, 2, 3]);
        // 0.2 tie between orbitals 4 and 5 at the cut: lower index wins.
        let e3 = [-2.0, -1.0, -0.9, 0.1, 0.2, 0.2, 0.9, 1.5];
        let canon3 = rotation(
            &[2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            Some(&e3),
            Provenance::Canonical,
        );
        let map = select_subspace(&canon3, 3, 6, SubspaceCriterion::Occupancy).unwrap();
        assert_eq!(map.active_spatial, vec![0, 1, 2, 3, 4, 5]);
        let map = select_subspace(&canon3, 3, 4, SubspaceCriterion::Occupancy).unwrap();
        assert_eq!(map.active_spatial, vec![1, 2, 3, 4]);
        let nat = rotation(&[1.99, 1.2, 0.8, 0.01], None, Provenance::Natural);
        let map = select_subspace(&nat, 2, 2, SubspaceCriterion::Occupancy).unwrap();
        assert_eq!(map.active_spatial, vec![1, 2]);
        assert_eq!(
            select_subspace(&canon, 2, 8, SubspaceCriterion::Occupancy).unwrap(),
            SubspaceMap::identity(8, 2)
        );
        assert!(select_subspace(&canon, 2, 3, SubspaceCriterion::Occupancy).is_err());
        assert!(select_subspace(&canon, 2, 10, SubspaceCriterion::Occupancy).is_err());
    }
}
