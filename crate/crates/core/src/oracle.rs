//! Exact references and diagnostics: Lanczos ground states, one-particle
//! densities, density-matrix fidelity, MP1 amplitudes and spin expectations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::AnsatzState;
use crate::linalg::sqrt_psd;
use crate::qubit_map::{
    build_hamiltonian, number_operator, s2_operator, to_sparse, Amplitude, CsrMatrix, SectorBasis,
    Statevector,
};
use crate::scf::{rotate_integrals, OrbitalRotation, ScfKind, ScfSolution};
use crate::{Error, IntegralSet, Result};

const LANCZOS_TOL: f64 = 1e-9;
const KRYLOV_DIM: usize = 80;
const MAX_RESTARTS: usize = 200;

fn dot<T: Amplitude>(a: &[T], b: &[T]) -> T {
    let mut acc = T::default();
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * *y;
    }
    acc
}

fn norm<T: Amplitude>(a: &[T]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic start vector in `(-0.5, 0.5)`.
fn start_vector(dim: usize) -> Vec<f64> {
    let mut s: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..dim)
        .map(|_| {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Lowest eigenpair of a Hermitian operator given by `matvec`, by restarted
/// Lanczos with full reorthogonalization, starting from `start`.
pub fn lanczos<T: Amplitude>(
    matvec: impl Fn(&[T], &mut [T]),
    start: Vec<T>,
    tol: f64,
) -> Result<(f64, Vec<T>)> {
    let dim = start.len();
    let n0 = norm(&start);
    if dim == 0 || n0 == 0.0 {
        return Err(Error::InvalidInput("empty Lanczos start vector".into()));
    }
    let mut x: Vec<T> = start.iter().map(|&v| v * (1.0 / n0)).collect();
    let mut hx = vec![T::default(); dim];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_RESTARTS {
        let m = KRYLOV_DIM.min(dim);
        let mut basis: Vec<Vec<T>> = vec![x.clone()];
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![T::default(); dim];
        for j in 0..m {
            matvec(&basis[j], &mut w);
            let alpha = dot(&basis[j], &w).re();
            alphas.push(alpha);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi = *wi - *vi * c;
                    }
                }
            }
            let beta = norm(&w);
            if beta < 1e-12 || j + 1 == m {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|&v| v * (1.0 / beta)).collect());
        }
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let lowest = (0..k)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let s = eig.eigenvectors.column(lowest);
        let mut next = vec![T::default(); dim];
        for (c, v) in s.iter().zip(&basis) {
            for (ni, vi) in next.iter_mut().zip(v) {
                *ni += *vi * *c;
            }
        }
        let nn = norm(&next);
        next.iter_mut().for_each(|v| *v = *v * (1.0 / nn));
        matvec(&next, &mut hx);
        let e = dot(&next, &hx).re();
        residual = hx
            .iter()
            .zip(&next)
            .map(|(h, v)| (*h - *v * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        x = next;
        if residual < tol {
            fix_phase(&mut x);
            return Ok((e, x));
        }
    }
    Err(Error::Eigensolver(residual))
}

/// Makes the largest-magnitude amplitude real and positive.
fn fix_phase<T: Amplitude>(x: &mut [T]) {
    let Some((k, _)) = x
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
    else {
        return;
    };
    let p = x[k];
    let a = p.abs();
    if a == 0.0 {
        return;
    }
    let phase = p.conj() * (1.0 / a);
    x.iter_mut().for_each(|v| *v = *v * phase);
}

/// Ground state of a real sector Hamiltonian.
pub fn fci_sector(h: &CsrMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    lanczos(
        |x, y| h.matvec_into(x, y),
        start_vector(h.n_rows()),
        LANCZOS_TOL,
    )
}

/// Ground state of a full-register Hamiltonian within the `(n_alpha,
/// n_beta)` sector: the start vector is projected onto that sector, which the
/// number- and spin-conserving `h` never leaves.
pub fn fci_ground_state(
    h: &CsrMatrix<Complex64>,
    n_alpha: usize,
    n_beta: usize,
) -> Result<(f64, Statevector)> {
    let dim = h.n_rows();
    let raw = start_vector(dim);
    let start: Vec<Complex64> = raw
        .iter()
        .enumerate()
        .map(|(bits, &v)| {
            let b = bits as u64;
            let na = (b & 0x5555_5555_5555_5555).count_ones() as usize;
            let nb = (b & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as usize;
            if na == n_alpha && nb == n_beta {
                Complex64::new(v, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let (e, v) = lanczos(|x, y| h.matvec_into(x, y), start, LANCZOS_TOL)?;
    Ok((e, Statevector::from_amplitudes(v)?))
}

/// FCI of an integral set in its electron/spin sector.
#[derive(Clone, Debug)]
pub struct FciSolution {
    pub energy: f64,
    pub basis: SectorBasis,
    pub vector: Vec<f64>,
    /// Further ground states of the same spin within `DEGENERACY_TOL` of
    /// `energy`, orthonormal to `vector` and to each other.
    pub partners: Vec<Vec<f64>>,
}

impl FciSolution {
    /// Equal-weight average of the ground-manifold densities. Unlike the
    /// density of any single member, this does not depend on which vector
    /// of a degenerate level the eigensolver happened to return.
    pub fn ground_rdm(&self) -> Result<OneParticleDensity> {
        let mut rho = one_rdm_sector(&self.basis, &self.vector)?.rho;
        for v in &self.partners {
            rho += one_rdm_sector(&self.basis, v)?.rho;
        }
        rho /= (1 + self.partners.len()) as f64;
        Ok(OneParticleDensity { rho })
    }
}

/// Weight of the `S^2` penalty that pushes higher-spin states of the
/// `M_S` sector above the lowest-spin ground state.
const SPIN_PENALTY: f64 = 1.0;
/// Levels closer than this to the ground energy count as degenerate with it.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Shift that lifts already-found ground states out of the way of the next
/// Lanczos search.
const DEFLATION_SHIFT: f64 = 1.0;

/// Lowest state of spin `S = |MS2|/2`. The sector also holds every higher
/// multiplet, any of which may lie lowest, so the search runs on
/// `H + mu (S^2 - S(S+1))` and reports `<H>`. Degenerate partners of that
/// state (e.g. the E pair of a tetrahedral H4) are found by repeating the
/// search with the states found so far shifted up.
pub fn fci(ints: &IntegralSet) -> Result<FciSolution> {
    let basis = SectorBasis::for_electrons(ints.n_orb, ints.n_elec, ints.ms2)?;
    let h = basis.to_sparse(&build_hamiltonian(ints))?;
    let s2 = basis.to_sparse(&s2_operator(ints.n_orb))?;
    let s = ints.ms2.unsigned_abs() as f64 / 2.0;
    let shift = SPIN_PENALTY * s * (s + 1.0);
    let scratch = std::cell::RefCell::new(vec![0.0; h.n_rows()]);
    let found = std::cell::RefCell::new(Vec::<Vec<f64>>::new());
    let penalized = |x: &[f64], y: &mut [f64]| {
        let mut t = scratch.borrow_mut();
        h.matvec_into(x, y);
        s2.matvec_into(x, &mut t);
        for ((yi, ti), xi) in y.iter_mut().zip(t.iter()).zip(x) {
            *yi += SPIN_PENALTY * ti - shift * xi;
        }
        for v in found.borrow().iter() {
            let c = DEFLATION_SHIFT * dot(v, x);
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += c * vi;
            }
        }
    };
    let energy_of = |v: &[f64]| -> f64 { v.iter().zip(&h.matvec(v)).map(|(a, b)| a * b).sum() };
    let (_, vector) = lanczos(penalized, start_vector(h.n_rows()), LANCZOS_TOL)?;
    let energy = energy_of(&vector);
    found.borrow_mut().push(vector);
    let probe = SpinProbe::new(&basis)?;
    while found.borrow().len() < h.n_rows() {
        let (_, next) = lanczos(penalized, start_vector(h.n_rows()), LANCZOS_TOL)?;
        // with nothing else below the shift, the search lands back on a found state
        let fresh = found.borrow().iter().all(|v| dot(v, &next).abs() < 1e-6);
        let (s2_next, _) = probe.evaluate(&next);
        let same_spin = (s2_next - s * (s + 1.0)).abs() < 1e-6;
        if !fresh || !same_spin || energy_of(&next) - energy > DEGENERACY_TOL {
            break;
        }
        found.borrow_mut().push(next);
    }
    let mut found = found.into_inner();
    let vector = found.remove(0);
    Ok(FciSolution {
        energy,
        basis,
        vector,
        partners: found,
    })
}

/// Spin-summed spatial one-particle density `rho[p][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleDensity {
    pub rho: DMatrix<f64>,
}

impl OneParticleDensity {
    /// Closed-shell determinant with `n_occ` doubly occupied orbitals.
    pub fn closed_shell(n_orb: usize, n_occ: usize) -> Self {
        Self {
            rho: DMatrix::from_diagonal(&DVector::from_fn(n_orb, |p, _| {
                if p < n_occ {
                    2.0
                } else {
                    0.0
                }
            })),
        }
    }

    pub fn n_orb(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace()
    }

    /// Occupation numbers, descending.
    pub fn occupations(&self) -> DVector<f64> {
        let (vals, _) = crate::linalg::eigh(&self.rho);
        DVector::from_iterator(vals.len(), vals.iter().rev().copied())
    }

    /// Embeds a subspace density: `map[k]` is the full index of subspace
    /// orbital `k`; orbitals in `doubly_occupied` get 2, the rest 0.
    pub fn embed(&self, n_orb: usize, map: &[usize], doubly_occupied: &[usize]) -> Self {
        let mut rho = DMatrix::zeros(n_orb, n_orb);
        for &c in doubly_occupied {
            rho[(c, c)] = 2.0;
        }
        for (i, &p) in map.iter().enumerate() {
            for (j, &q) in map.iter().enumerate() {
                rho[(p, q)] = self.rho[(i, j)];
            }
        }
        Self { rho }
    }
}

fn accumulate_rdm<T: Amplitude>(
    n_orb: usize,
    entries: impl Iterator<Item = (u64, T)>,
    lookup: impl Fn(u64) -> Option<T>,
) -> Result<OneParticleDensity> {
    let mut re = DMatrix::<f64>::zeros(n_orb, n_orb);
    let mut im = DMatrix::<f64>::zeros(n_orb, n_orb);
    for (bits, amp) in entries {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        for spin in 0..2 {
            for q in 0..n_orb {
                let mq = 2 * q + spin;
                if bits >> mq & 1 == 0 {
                    continue;
                }
                re[(q, q)] += amp.norm_sqr();
                for p in 0..n_orb {
                    let mp = 2 * p + spin;
                    if p == q || bits >> mp & 1 == 1 {
                        continue;
                    }
                    let target = bits ^ (1 << mq) ^ (1 << mp);
                    let Some(t) = lookup(target) else { continue };
                    let (lo, hi) = if mp < mq { (mp, mq) } else { (mq, mp) };
                    let between = (bits >> (lo + 1)) & ((1u64 << (hi - lo - 1)) - 1);
                    let sign = if between.count_ones() % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    };
                    let v = t.conj() * amp * sign;
                    re[(p, q)] += v.re();
                    im[(p, q)] += v.im();
                }
            }
        }
    }
    let worst = im.amax();
    if worst > 1e-10 {
        return Err(Error::ImaginaryResidual(worst));
    }
    Ok(OneParticleDensity { rho: re })
}

/// One-particle density of a full-register state with `n_orb` spatial
/// orbitals.
pub fn one_rdm(psi: &Statevector, n_orb: usize) -> Result<OneParticleDensity> {
    if psi.n_qubits() != 2 * n_orb {
        return Err(Error::Dimension(format!(
            "state has {} qubits, expected {}",
            psi.n_qubits(),
            2 * n_orb
        )));
    }
    let amps = psi.amplitudes();
    accumulate_rdm(
        n_orb,
        amps.iter().enumerate().map(|(b, &a)| (b as u64, a)),
        |b| Some(amps[b as usize]),
    )
}

/// One-particle density of a real sector vector.
pub fn one_rdm_sector(basis: &SectorBasis, v: &[f64]) -> Result<OneParticleDensity> {
    if v.len() != basis.dim() {
        return Err(Error::Dimension("sector vector length".into()));
    }
    accumulate_rdm(
        basis.n_orb(),
        v.iter().enumerate().map(|(i, &a)| (basis.state(i), a)),
        |b| basis.index(b).map(|i| v[i]),
    )
}

/// Normalization applied before the fidelity formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityNormalization {
    /// Divide each density by its trace; `F` lies in `[0, 1]`.
    #[default]
    UnitTrace,
    /// Use the densities as given (trace `N`); `F` lies in `[0, N^2]`.
    Raw,
}

const CLIP_TOL: f64 = 1e-9;
const NEG_EIG_TOL: f64 = 1e-8;

/// `F = (tr sqrt(sqrt(a) b sqrt(a)))^2`.
pub fn fidelity(
    rho_ref: &OneParticleDensity,
    rho: &OneParticleDensity,
    normalization: FidelityNormalization,
) -> Result<f64> {
    if rho_ref.n_orb() != rho.n_orb() {
        return Err(Error::Dimension("densities differ in size".into()));
    }
    let (a, b) = match normalization {
        FidelityNormalization::UnitTrace => {
            let (ta, tb) = (rho_ref.trace(), rho.trace());
            if ta <= 0.0 || tb <= 0.0 {
                return Err(Error::InvalidDensity(ta.min(tb)));
            }
            (&rho_ref.rho / ta, &rho.rho / tb)
        }
        FidelityNormalization::Raw => (rho_ref.rho.clone(), rho.rho.clone()),
    };
    let sa = sqrt_psd(&a, NEG_EIG_TOL).map_err(Error::InvalidDensity)?;
    sqrt_psd(&b, NEG_EIG_TOL).map_err(Error::InvalidDensity)?;
    let m = &sa * &b * &sa;
    let sm = sqrt_psd(&m, NEG_EIG_TOL).map_err(Error::InvalidDensity)?;
    let f = sm.trace().powi(2);
    if normalization == FidelityNormalization::Raw {
        return Ok(f);
    }
    if f > 1.0 + CLIP_TOL || f < -CLIP_TOL {
        return Err(Error::Internal(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// First-order amplitudes `t[i][j][a][b] = -<ab||ij> / (e_a + e_b - e_i - e_j)`
/// over occupied (`i`, `j`) and virtual (`a`, `b`) spin orbitals.
#[derive(Clone, Debug)]
pub struct Mp1Amplitudes {
    /// Occupied spin orbitals (`2 * n_occ`).
    pub n_occ: usize,
    /// Virtual spin orbitals.
    pub n_virt: usize,
    /// Row-major `[i][j][a][b]`.
    pub t: Vec<f64>,
    /// Entries whose denominator magnitude is at or below 1e-8; stored as 0.
    pub flagged: Vec<[usize; 4]>,
    /// `1/4 sum <ij||ab> t_ijab`.
    pub energy: f64,
}

impl Mp1Amplitudes {
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.t[((i * self.n_occ + j) * self.n_virt + a) * self.n_virt + b]
    }

    /// Largest `|t|` involving each spatial orbital, a measure of how strongly
    /// that orbital takes part in first-order correlation.
    pub fn orbital_weights(&self, n_orb: usize) -> Vec<f64> {
        let no = self.n_occ / 2;
        let mut w = vec![0.0f64; n_orb];
        for i in 0..self.n_occ {
            for j in 0..self.n_occ {
                for a in 0..self.n_virt {
                    for b in 0..self.n_virt {
                        let v = self.get(i, j, a, b).abs();
                        for p in [i / 2, j / 2, no + a / 2, no + b / 2] {
                            w[p] = w[p].max(v);
                        }
                    }
                }
            }
        }
        w
    }
}

const DENOM_TOL: f64 = 1e-8;

/// Antisymmetrized spin-orbital integral `<PQ||RS>`; spin orbital `2p + s`.
fn antisym(mo: &IntegralSet, p: usize, q: usize, r: usize, s: usize) -> f64 {
    let (sp, sq, sr, ss) = (p % 2, q % 2, r % 2, s % 2);
    let (p, q, r, s) = (p / 2, q / 2, r / 2, s / 2);
    let direct = if sp == sr && sq == ss {
        mo.eri_phys(p, q, r, s)
    } else {
        0.0
    };
    let exchange = if sp == ss && sq == sr {
        mo.eri_phys(p, q, s, r)
    } else {
        0.0
    };
    direct - exchange
}

pub fn mp1_amplitudes(ints: &IntegralSet, sol: &ScfSolution) -> Result<Mp1Amplitudes> {
    if sol.kind != ScfKind::Restricted {
        return Err(Error::InvalidInput(
            "MP1 amplitudes need a restricted solution".into(),
        ));
    }
    let mo = rotate_integrals(ints, &OrbitalRotation::canonical(sol))?;
    let n_occ_sp = sol.n_alpha;
    let n_orb = ints.n_orb;
    let no = 2 * n_occ_sp;
    let nv = 2 * (n_orb - n_occ_sp);
    let eps = |k: usize| sol.eps_alpha[k / 2];
    let mut t = vec![0.0; no * no * nv * nv];
    let mut flagged = Vec::new();
    let mut energy = 0.0;
    for i in 0..no {
        for j in 0..no {
            for a in 0..nv {
                for b in 0..nv {
                    let (va, vb) = (a + no, b + no);
                    let num = antisym(&mo, va, vb, i, j);
                    let d = eps(va) + eps(vb) - eps(i) - eps(j);
                    let idx = ((i * no + j) * nv + a) * nv + b;
                    if d.abs() <= DENOM_TOL {
                        if num != 0.0 {
                            flagged.push([i, j, a, b]);
                        }
                        continue;
                    }
                    t[idx] = -num / d;
                    energy += 0.25 * antisym(&mo, i, j, va, vb) * t[idx];
                }
            }
        }
    }
    Ok(Mp1Amplitudes {
        n_occ: no,
        n_virt: nv,
        t,
        flagged,
        energy,
    })
}

/// Closed-shell MP2 correlation energy from spatial integrals:
/// `sum (ia|jb) [2 (ia|jb) - (ib|ja)] / (e_i + e_j - e_a - e_b)`.
pub fn mp2_energy_closed_shell(ints: &IntegralSet, sol: &ScfSolution) -> Result<f64> {
    let mo = rotate_integrals(ints, &OrbitalRotation::canonical(sol))?;
    let n_occ = sol.n_alpha;
    let e = &sol.eps_alpha;
    let mut sum = 0.0;
    for i in 0..n_occ {
        for j in 0..n_occ {
            for a in n_occ..ints.n_orb {
                for b in n_occ..ints.n_orb {
                    let iajb = mo.eri(i, a, j, b);
                    let ibja = mo.eri(i, b, j, a);
                    sum += iajb * (2.0 * iajb - ibja) / (e[i] + e[j] - e[a] - e[b]);
                }
            }
        }
    }
    Ok(sum)
}

/// `<S^2>` and `<N>` of a full-register state.
pub fn spin_and_number(psi: &Statevector) -> Result<(f64, f64)> {
    let n = psi.n_qubits();
    let s2 = to_sparse(&s2_operator(n / 2), n)?;
    let num = to_sparse(&number_operator(n), n)?;
    Ok((
        crate::qubit_map::expectation(&s2, psi)?,
        crate::qubit_map::expectation(&num, psi)?,
    ))
}

/// Spin and number expectations on sector vectors, with `S^2` realized once.
#[derive(Clone, Debug)]
pub struct SpinProbe {
    s2: CsrMatrix<f64>,
    popcounts: Vec<u32>,
}

impl SpinProbe {
    pub fn new(basis: &SectorBasis) -> Result<Self> {
        Ok(Self {
            s2: basis.to_sparse(&s2_operator(basis.n_orb()))?,
            popcounts: (0..basis.dim())
                .map(|i| basis.state(i).count_ones())
                .collect(),
        })
    }

    /// `(<S^2>, <N>)` of a normalized sector vector.
    pub fn evaluate(&self, v: &[f64]) -> (f64, f64) {
        let s2v = self.s2.matvec(v);
        let s2 = v.iter().zip(&s2v).map(|(a, b)| a * b).sum();
        let n = v
            .iter()
            .zip(&self.popcounts)
            .map(|(a, &c)| a * a * c as f64)
            .sum();
        (s2, n)
    }
}

/// `(operator id, |theta|)` in ansatz order.
pub fn amplitude_report(ansatz: &AnsatzState) -> Vec<(usize, f64)> {
    ansatz
        .elements
        .iter()
        .map(|e| (e.op_id, e.theta.abs()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_hamiltonian() {
        let d = [0.3, -1.2, 0.7, -0.4, 2.0];
        let m = CsrMatrix::from_dense(5, 5, &{
            let mut v = vec![0.0; 25];
            for i in 0..5 {
                v[i * 6] = d[i];
            }
            v
        });
        let (e, v) = fci_sector(&m).unwrap();
        assert!((e + 1.2).abs() < 1e-12);
        assert!((v[1].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_site_fci() {
        let mut ints = IntegralSet::zeros(1, 2);
        ints.set_h(0, 0, -1.0);
        ints.set_eri(0, 0, 0, 0, 0.5);
        assert!((fci(&ints).unwrap().energy + 1.5).abs() < 1e-12);
        let h = to_sparse(&build_hamiltonian(&ints), 2).unwrap();
        let (e, _) = fci_ground_state(&h, 1, 1).unwrap();
        assert!((e + 1.5).abs() < 1e-12);
    }

    #[test]
    fn determinant_density() {
        let psi = Statevector::basis(6, 0b001111).unwrap();
        let rho = one_rdm(&psi, 3).unwrap();
        assert_eq!(rho, OneParticleDensity::closed_shell(3, 2));
    }

    #[test]
    fn sector_density_matches_excitation_expectations() {
        use crate::qubit_map::hamiltonian::spatial_excitation;
        use crate::qubit_map::jordan_wigner;
        let basis = SectorBasis::new(4, 2, 2).unwrap();
        let mut v: Vec<f64> = (0..basis.dim())
            .map(|k| (1.7 * k as f64 + 0.3).sin())
            .collect();
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        let rho = one_rdm_sector(&basis, &v).unwrap();
        for p in 0..4 {
            for q in 0..4 {
                let e = basis
                    .to_sparse(&jordan_wigner(&spatial_excitation(p, q)))
                    .unwrap();
                let want: f64 = v.iter().zip(&e.matvec(&v)).map(|(a, b)| a * b).sum();
                assert!((rho.rho[(p, q)] - want).abs() < 1e-12, "{p} {q}");
            }
        }
    }

    #[test]
    fn fidelity_limits() {
        let a = OneParticleDensity::closed_shell(2, 1);
        let b = OneParticleDensity {
            rho: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0])),
        };
        let u = FidelityNormalization::UnitTrace;
        assert!((fidelity(&a, &a, u).unwrap() - 1.0).abs() < 1e-10);
        assert!(fidelity(&a, &b, u).unwrap().abs() < 1e-10);
        let bad = OneParticleDensity {
            rho: DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, -0.5])),
        };
        assert!(matches!(
            fidelity(&a, &bad, u),
            Err(Error::InvalidDensity(_))
        ));
    }

    #[test]
    fn zero_eri_amplitudes_vanish() {
        let mut ints = IntegralSet::zeros(3, 2);
        ints.set_h(0, 0, -1.0);
        ints.set_h(1, 1, 0.5);
        ints.set_h(2, 2, 1.0);
        let sol = crate::scf::run_rhf(&ints).unwrap();
        let t = mp1_amplitudes(&ints, &sol).unwrap();
        assert!(t.t.iter().all(|&x| x == 0.0));
        assert_eq!(t.energy, 0.0);
    }

    #[test]
    fn amplitude_sign() {
        // Two orbitals, positive exchange-type coupling (01|01) > 0 and a
        // positive gap: t must come out negative.
        let mut ints = IntegralSet::zeros(2, 2);
        ints.set_h(0, 0, -1.0);
        ints.set_h(1, 1, 1.0);
        ints.set_eri(0, 1, 0, 1, 0.2);
        let sol = crate::scf::run_rhf(&ints).unwrap();
        let t = mp1_amplitudes(&ints, &sol).unwrap();
        // i = 0a, j = 0b, a = 1a, b = 1b: <ab||ij> = (10|10) > 0.
        assert!(t.get(0, 1, 0, 1) < 0.0);
        let closed = mp2_energy_closed_shell(&ints, &sol).unwrap();
        assert!((t.energy - closed).abs() < 1e-14);
    }

    #[test]
    fn spin_probe_counts() {
        let basis = SectorBasis::new(2, 1, 1).unwrap();
        let probe = SpinProbe::new(&basis).unwrap();
        let (s2, n) = probe.evaluate(&basis.reference_vector());
        assert!(s2.abs() < 1e-14);
        assert_eq!(n, 2.0);
    }
}
