//! Restricted and unrestricted Hartree-Fock in the orthonormal orbital basis
//! of an [`IntegralSet`], natural orbitals of the spin-summed density, and
//! integral transformations (orbital rotations, frozen core, deleted virtuals).

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{dominant_index, eigh};
use crate::{Error, IntegralSet, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScfKind {
    Restricted,
    Unrestricted,
}

/// Converged mean-field solution. Orbital columns are expressed in the
/// (orthonormal) basis of the integrals the solver was given.
#[derive(Clone, Debug)]
pub struct ScfSolution {
    pub kind: ScfKind,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub c_alpha: DMatrix<f64>,
    pub c_beta: DMatrix<f64>,
    pub eps_alpha: DVector<f64>,
    pub eps_beta: DVector<f64>,
    pub energy: f64,
    pub density_alpha: DMatrix<f64>,
    pub density_beta: DMatrix<f64>,
    pub density_total: DMatrix<f64>,
    pub iterations: usize,
    pub commutator_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ScfOptions {
    pub max_iter: usize,
    pub energy_tol: f64,
    pub density_tol: f64,
    pub diis_size: usize,
    /// Mixing weight of the previous Fock matrix when DIIS cannot be used.
    pub damping: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            energy_tol: 1e-10,
            density_tol: 1e-8,
            diis_size: 8,
            damping: 0.3,
        }
    }
}

/// Symmetry-breaking seed for UHF. A nonzero `mix_angle` starts several
/// SCF runs (alpha HOMO/LUMO rotation, opposite-spin rotations of all
/// frontier pairs, and each unstable RHF triplet mode, all by `mix_angle`)
/// and keeps the lowest. Zero starts from RHF only.
#[derive(Clone, Copy, Debug)]
pub struct UhfGuess {
    pub mix_angle: f64,
}

impl Default for UhfGuess {
    fn default() -> Self {
        Self {
            mix_angle: 30f64.to_radians(),
        }
    }
}

impl UhfGuess {
    pub fn symmetric() -> Self {
        Self { mix_angle: 0.0 }
    }
}

/// Rotates occupied orbital `n_occ - 1 - k` into virtual `n_occ + k` by
/// `angle` for the first `pairs` pairs that exist.
fn mix_frontier(c: &DMatrix<f64>, n_occ: usize, angle: f64, pairs: usize) -> DMatrix<f64> {
    let mut out = c.clone();
    if angle == 0.0 {
        return out;
    }
    let (cs, sn) = (angle.cos(), angle.sin());
    for k in 0..pairs.min(n_occ).min(c.ncols() - n_occ) {
        let (i, a) = (n_occ - 1 - k, n_occ + k);
        let occ = c.column(i).into_owned();
        let vir = c.column(a).into_owned();
        out.set_column(i, &(&occ * cs + &vir * sn));
        out.set_column(a, &(&vir * cs - &occ * sn));
    }
    out
}

/// `J[p,q] = sum_rs (pq|rs) P[r,s]`.
fn coulomb(ints: &IntegralSet, dm: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ints.n_orb;
    let eri = ints.eri_slice();
    let n2 = n * n;
    DMatrix::from_fn(n, n, |p, q| {
        let base = (p * n + q) * n2;
        let mut acc = 0.0;
        for r in 0..n {
            for s in 0..n {
                acc += eri[base + r * n + s] * dm[(r, s)];
            }
        }
        acc
    })
}

/// `K[p,q] = sum_rs (pr|qs) P[r,s]`.
fn exchange(ints: &IntegralSet, dm: &DMatrix<f64>) -> DMatrix<f64> {
    let n = ints.n_orb;
    let eri = ints.eri_slice();
    DMatrix::from_fn(n, n, |p, q| {
        let mut acc = 0.0;
        for r in 0..n {
            let base = ((p * n + r) * n + q) * n;
            for s in 0..n {
                acc += eri[base + s] * dm[(r, s)];
            }
        }
        acc
    })
}

fn occupied_density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    occ * occ.transpose()
}

fn spin_focks(
    ints: &IntegralSet,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let j = coulomb(ints, &(da + db));
    let fa = &ints.h_core + &j - exchange(ints, da);
    let fb = &ints.h_core + &j - exchange(ints, db);
    (fa, fb)
}

fn scf_energy(
    ints: &IntegralSet,
    da: &DMatrix<f64>,
    db: &DMatrix<f64>,
    fa: &DMatrix<f64>,
    fb: &DMatrix<f64>,
) -> f64 {
    let dt = da + db;
    0.5 * (dt.dot(&ints.h_core) + da.dot(fa) + db.dot(fb)) + ints.e_core
}

/// Spin-averaged closed-shell Fock matrix `h + J(P) - K(P)/2` for the total
/// density of `sol`.
pub fn fock_matrix(ints: &IntegralSet, sol: &ScfSolution) -> DMatrix<f64> {
    let dt = &sol.density_total;
    &ints.h_core + coulomb(ints, dt) - exchange(ints, dt) * 0.5
}

struct Diis {
    size: usize,
    focks: VecDeque<Vec<DMatrix<f64>>>,
    errors: VecDeque<Vec<f64>>,
}

impl Diis {
    fn new(size: usize) -> Self {
        Self {
            size,
            focks: VecDeque::new(),
            errors: VecDeque::new(),
        }
    }

    fn push(&mut self, focks: Vec<DMatrix<f64>>, error: Vec<f64>) {
        if self.focks.len() == self.size {
            self.focks.pop_front();
            self.errors.pop_front();
        }
        self.focks.push_back(focks);
        self.errors.push_back(error);
    }

    fn extrapolate(&self) -> Option<Vec<DMatrix<f64>>> {
        let m = self.focks.len();
        if m < 2 {
            return None;
        }
        let mut b = DMatrix::<f64>::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..=i {
                let v: f64 = self.errors[i]
                    .iter()
                    .zip(&self.errors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
            b[(i, m)] = -1.0;
            b[(m, i)] = -1.0;
        }
        let mut rhs = DVector::<f64>::zeros(m + 1);
        rhs[m] = -1.0;
        let coeffs = b.lu().solve(&rhs)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let n_spin = self.focks[0].len();
        let mut out: Vec<DMatrix<f64>> = self.focks[0].iter().map(|f| f * 0.0).collect();
        for (k, fs) in self.focks.iter().enumerate() {
            for s in 0..n_spin {
                out[s] += &fs[s] * coeffs[k];
            }
        }
        Some(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn scf_loop(
    ints: &IntegralSet,
    n_alpha: usize,
    n_beta: usize,
    restricted: bool,
    ca0: &DMatrix<f64>,
    cb0: &DMatrix<f64>,
    opts: &ScfOptions,
) -> Result<ScfSolution> {
    let method = if restricted { "RHF" } else { "UHF" };
    let n = ints.n_orb;
    if ca0.nrows() != n || cb0.nrows() != n {
        return Err(Error::Dimension(format!(
            "initial orbitals have {} rows for {} orbitals",
            ca0.nrows(),
            n
        )));
    }
    let mut da = occupied_density(ca0, n_alpha);
    let mut db = occupied_density(cb0, n_beta);
    let mut diis = Diis::new(opts.diis_size);
    let mut e_prev = f64::NAN;
    let mut d_change = f64::INFINITY;
    let mut prev_focks: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut energy = f64::NAN;
    let mut comm = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let (fa, fb) = spin_focks(ints, &da, &db);
        energy = scf_energy(ints, &da, &db, &fa, &fb);
        let ea = &fa * &da - &da * &fa;
        let eb = &fb * &db - &db * &fb;
        comm = ea.amax().max(eb.amax());
        if it > 1 && (energy - e_prev).abs() < opts.energy_tol && d_change < opts.density_tol {
            return Ok(finish(
                ints, n_alpha, n_beta, restricted, &fa, &fb, it, comm,
            ));
        }
        let error: Vec<f64> = ea.iter().chain(eb.iter()).copied().collect();
        diis.push(vec![fa.clone(), fb.clone()], error);
        let (fa_use, fb_use) = match diis.extrapolate() {
            Some(mut f) => {
                let fb = f.pop().unwrap();
                (f.pop().unwrap(), fb)
            }
            None => match &prev_focks {
                Some((pa, pb)) => (
                    &fa * (1.0 - opts.damping) + pa * opts.damping,
                    &fb * (1.0 - opts.damping) + pb * opts.damping,
                ),
                None => (fa.clone(), fb.clone()),
            },
        };
        prev_focks = Some((fa, fb));
        let (_, ca) = eigh(&fa_use);
        let cb = if restricted {
            ca.clone()
        } else {
            eigh(&fb_use).1
        };
        let da_new = occupied_density(&ca, n_alpha);
        let db_new = occupied_density(&cb, n_beta);
        d_change = (&da_new - &da).amax().max((&db_new - &db).amax());
        da = da_new;
        db = db_new;
        e_prev = energy;
    }
    Err(Error::ScfNotConverged {
        method,
        iterations: opts.max_iter,
        energy,
        commutator: comm,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ints: &IntegralSet,
    n_alpha: usize,
    n_beta: usize,
    restricted: bool,
    fa: &DMatrix<f64>,
    fb: &DMatrix<f64>,
    iterations: usize,
    commutator_norm: f64,
) -> ScfSolution {
    let (eps_a, ca) = eigh(fa);
    let (eps_b, cb) = if restricted {
        (eps_a.clone(), ca.clone())
    } else {
        eigh(fb)
    };
    let da = occupied_density(&ca, n_alpha);
    let db = if restricted {
        da.clone()
    } else {
        occupied_density(&cb, n_beta)
    };
    let (fa2, fb2) = spin_focks(ints, &da, &db);
    let energy = scf_energy(ints, &da, &db, &fa2, &fb2);
    ScfSolution {
        kind: if restricted {
            ScfKind::Restricted
        } else {
            ScfKind::Unrestricted
        },
        n_alpha,
        n_beta,
        c_alpha: ca,
        c_beta: cb,
        eps_alpha: eps_a,
        eps_beta: eps_b,
        energy,
        density_total: &da + &db,
        density_alpha: da,
        density_beta: db,
        iterations,
        commutator_norm,
    }
}

/// Closed-shell RHF starting from the reference determinant of the given
/// basis (the lowest `n_elec/2` orbitals).
pub fn run_rhf(ints: &IntegralSet) -> Result<ScfSolution> {
    let n = ints.n_orb;
    run_rhf_from(ints, &DMatrix::identity(n, n), &ScfOptions::default())
}

/// RHF from explicit starting orbitals (columns; the first `n_elec/2` are
/// occupied).
pub fn run_rhf_from(
    ints: &IntegralSet,
    c0: &DMatrix<f64>,
    opts: &ScfOptions,
) -> Result<ScfSolution> {
    if ints.n_elec % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "RHF needs an even electron count, got {}",
            ints.n_elec
        )));
    }
    let n_occ = ints.n_elec / 2;
    scf_loop(ints, n_occ, n_occ, true, c0, c0, opts)
}

/// Lowest UHF found from several symmetry-broken starts built on the RHF
/// orbitals (the input basis for odd electron counts). Each converged start
/// is walked downhill along negative orbital-Hessian directions until it is
/// stable, since broken-symmetry starts often settle on a saddle point.
pub fn run_uhf(ints: &IntegralSet, guess: UhfGuess) -> Result<ScfSolution> {
    run_uhf_with(ints, guess, &ScfOptions::default())
}

pub fn run_uhf_with(ints: &IntegralSet, guess: UhfGuess, opts: &ScfOptions) -> Result<ScfSolution> {
    let n = ints.n_orb;
    let ms2 = ints.ms2.max(0) as usize;
    if (ints.n_elec + ms2) % 2 != 0 || ms2 > ints.n_elec {
        return Err(Error::InvalidInput(format!(
            "inconsistent NELEC={} and MS2={}",
            ints.n_elec, ints.ms2
        )));
    }
    let n_alpha = (ints.n_elec + ms2) / 2;
    let n_beta = ints.n_elec - n_alpha;
    if ints.n_elec % 2 != 0 {
        let c = DMatrix::identity(n, n);
        let ca = mix_frontier(&c, n_alpha, guess.mix_angle, 1);
        return scf_loop(ints, n_alpha, n_beta, false, &ca, &c, opts);
    }
    let rhf = run_rhf(ints)?;
    let c = rhf.c_alpha.clone();
    if guess.mix_angle == 0.0 {
        return scf_loop(ints, n_alpha, n_beta, false, &c, &c, opts);
    }
    // Seeds: alpha HOMO/LUMO only, every frontier pair with opposite signs
    // for the two spins, and the unstable triplet rotations of RHF.
    let t = guess.mix_angle;
    let mut seeds = vec![
        (mix_frontier(&c, n_alpha, t, 1), c.clone()),
        (
            mix_frontier(&c, n_alpha, t, n),
            mix_frontier(&c, n_beta, -t, n),
        ),
    ];
    for k in triplet_instabilities(ints, &rhf)? {
        seeds.push((&c * (&k * t).exp(), &c * (&k * -t).exp()));
    }
    let mut best: Option<ScfSolution> = None;
    let mut first_err = None;
    for (ca, cb) in &seeds {
        match scf_loop(ints, n_alpha, n_beta, false, ca, cb, opts)
            .and_then(|sol| follow_instabilities(ints, sol, t, opts))
        {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.energy < b.energy - 1e-10) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Internal("no UHF seeds".into())),
    }
}

/// Rounds of instability following per UHF seed.
const MAX_FOLLOW: usize = 8;
/// Hessian eigenvalues below this count as an instability.
const INSTABILITY_TOL: f64 = -1e-6;

/// Re-converges a UHF solution along its lowest internal (UHF -> UHF)
/// instability until it is stable or no step lowers the energy.
fn follow_instabilities(
    ints: &IntegralSet,
    mut sol: ScfSolution,
    angle: f64,
    opts: &ScfOptions,
) -> Result<ScfSolution> {
    for _ in 0..MAX_FOLLOW {
        let Some((ka, kb)) = uhf_instability(ints, &sol)? else {
            break;
        };
        let mut stepped = None;
        for t in [angle, -angle] {
            let ca = &sol.c_alpha * (&ka * t).exp();
            let cb = &sol.c_beta * (&kb * t).exp();
            if let Ok(next) = scf_loop(ints, sol.n_alpha, sol.n_beta, false, &ca, &cb, opts) {
                if next.energy < sol.energy - 1e-10 {
                    stepped = Some(next);
                    break;
                }
            }
        }
        match stepped {
            Some(next) => sol = next,
            None => break,
        }
    }
    Ok(sol)
}

/// `(pq|rs)` with each index in its own orbital set, as a dense
/// `n1 x n2 x n3 x n4` array.
fn mixed_eri(ints: &IntegralSet, c: [&DMatrix<f64>; 4]) -> (Vec<f64>, [usize; 4]) {
    let n = ints.n_orb;
    let dims = c.map(|m| m.ncols());
    let mut cur = ints.eri_slice().to_vec();
    let mut shape = [n, n, n, n];
    // Transform one index at a time, rotating it to the back each pass.
    for k in 0..4 {
        let (d0, rest) = (shape[0], shape[1] * shape[2] * shape[3]);
        let m = dims[k];
        let mut next = vec![0.0; rest * m];
        for p in 0..d0 {
            for r in 0..rest {
                let v = cur[p * rest + r];
                if v == 0.0 {
                    continue;
                }
                for q in 0..m {
                    next[r * m + q] += c[k][(p, q)] * v;
                }
            }
        }
        cur = next;
        shape = [shape[1], shape[2], shape[3], m];
    }
    (cur, dims)
}

/// Lowest mode of the real UHF orbital Hessian `A + B` at a converged
/// solution, if it is negative: `(K_alpha, K_beta)` antisymmetric generators
/// in the solution's MO bases.
fn uhf_instability(
    ints: &IntegralSet,
    sol: &ScfSolution,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    let n = ints.n_orb;
    let spins = [
        (&sol.c_alpha, &sol.eps_alpha, sol.n_alpha),
        (&sol.c_beta, &sol.eps_beta, sol.n_beta),
    ];
    let pairs: Vec<(usize, usize, usize)> = (0..2)
        .flat_map(|s| {
            let n_occ = spins[s].2;
            (0..n_occ).flat_map(move |i| (n_occ..n).map(move |a| (s, i, a)))
        })
        .collect();
    let dim = pairs.len();
    if dim == 0 {
        return Ok(None);
    }
    let mut eri = Vec::new();
    for s in 0..2 {
        for t in 0..2 {
            eri.push(mixed_eri(
                ints,
                [spins[s].0, spins[s].0, spins[t].0, spins[t].0],
            ));
        }
    }
    let get = |s: usize, t: usize, p: usize, q: usize, r: usize, u: usize| {
        let (v, d) = &eri[2 * s + t];
        v[((p * d[1] + q) * d[2] + r) * d[3] + u]
    };
    let mut h = DMatrix::zeros(dim, dim);
    for (x, &(s, i, a)) in pairs.iter().enumerate() {
        for (y, &(t, j, b)) in pairs.iter().enumerate() {
            let mut v = 2.0 * get(s, t, i, a, j, b);
            if s == t {
                v -= get(s, s, i, j, a, b) + get(s, s, i, b, j, a);
                if i == j && a == b {
                    v += spins[s].1[a] - spins[s].1[i];
                }
            }
            h[(x, y)] = v;
        }
    }
    let (vals, vecs) = eigh(&h);
    if vals[0] >= INSTABILITY_TOL {
        return Ok(None);
    }
    let mut k = [DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (x, &(s, i, a)) in pairs.iter().enumerate() {
        k[s][(a, i)] = vecs[(x, 0)];
        k[s][(i, a)] = -vecs[(x, 0)];
    }
    let [ka, kb] = k;
    Ok(Some((ka, kb)))
}

/// Lowest (at most four) negative modes of the real RHF -> UHF stability
/// matrix `(e_a - e_i) d_ij d_ab - (ij|ab) - (ib|ja)`, each as a normalized
/// antisymmetric generator in the RHF orbital basis.
fn triplet_instabilities(ints: &IntegralSet, rhf: &ScfSolution) -> Result<Vec<DMatrix<f64>>> {
    let n = ints.n_orb;
    let n_occ = rhf.n_alpha;
    let n_virt = n - n_occ;
    if n_occ == 0 || n_virt == 0 {
        return Ok(Vec::new());
    }
    let mo = rotate_integrals(ints, &OrbitalRotation::canonical(rhf))?;
    let eps = &rhf.eps_alpha;
    let dim = n_occ * n_virt;
    let idx = |i: usize, a: usize| i * n_virt + (a - n_occ);
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..n_occ {
        for a in n_occ..n {
            for j in 0..n_occ {
                for b in n_occ..n {
                    let mut v = -mo.eri(i, j, a, b) - mo.eri(i, b, j, a);
                    if i == j && a == b {
                        v += eps[a] - eps[i];
                    }
                    m[(idx(i, a), idx(j, b))] = v;
                }
            }
        }
    }
    let (vals, vecs) = eigh(&m);
    let mut out = Vec::new();
    for k in 0..dim.min(4) {
        if vals[k] >= -1e-8 {
            break;
        }
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n_occ {
            for a in n_occ..n {
                let v = vecs[(idx(i, a), k)];
                g[(a, i)] = v;
                g[(i, a)] = -v;
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Where a set of orbitals came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Canonical,
    Natural,
    External,
}

/// A change of spatial-orbital basis. Column `k` of `u` is new orbital `k`
/// expressed in the old basis.
#[derive(Clone, Debug)]
pub struct OrbitalRotation {
    pub u: DMatrix<f64>,
    /// Occupation numbers in `[0, 2]`, descending.
    pub occupancies: DVector<f64>,
    pub provenance: Provenance,
    /// Canonical orbital energies, or the diagonal of the RHF Fock operator in
    /// the new basis for natural orbitals.
    pub orbital_energies: Option<DVector<f64>>,
}

impl OrbitalRotation {
    pub fn identity(n: usize, n_elec: usize) -> Self {
        let occ = DVector::from_fn(n, |p, _| {
            if 2 * p + 1 < n_elec {
                2.0
            } else if 2 * p < n_elec {
                1.0
            } else {
                0.0
            }
        });
        Self {
            u: DMatrix::identity(n, n),
            occupancies: occ,
            provenance: Provenance::External,
            orbital_energies: None,
        }
    }

    /// Canonical orbitals of a restricted solution.
    pub fn canonical(sol: &ScfSolution) -> Self {
        let n = sol.c_alpha.ncols();
        let occ = DVector::from_fn(n, |p, _| {
            (p < sol.n_alpha) as u8 as f64 + (p < sol.n_beta) as u8 as f64
        });
        Self {
            u: sol.c_alpha.clone(),
            occupancies: occ,
            provenance: Provenance::Canonical,
            orbital_energies: Some(sol.eps_alpha.clone()),
        }
    }

    pub fn n_orb(&self) -> usize {
        self.u.ncols()
    }

    /// Sets `orbital_energies` to `diag(u^T F u)`.
    pub fn attach_fock_diagonal(&mut self, fock: &DMatrix<f64>) {
        let f = self.u.transpose() * fock * &self.u;
        self.orbital_energies = Some(f.diagonal());
    }
}

/// Natural orbitals: eigenvectors of the spin-summed density, sorted by
/// descending occupation (ties: ascending index of the dominant component).
pub fn natural_orbitals(sol: &ScfSolution) -> OrbitalRotation {
    let (vals, vecs) = eigh(&sol.density_total);
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    let dom: Vec<usize> = (0..n)
        .map(|k| dominant_index(&vecs.column(k).into_owned()))
        .collect();
    order.sort_by(|&a, &b| {
        if (vals[a] - vals[b]).abs() > 1e-10 {
            vals[b].total_cmp(&vals[a])
        } else {
            dom[a].cmp(&dom[b])
        }
    });
    let mut u = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        u.set_column(col, &vecs.column(k));
    }
    OrbitalRotation {
        u,
        occupancies: DVector::from_iterator(n, order.iter().map(|&k| vals[k])),
        provenance: Provenance::Natural,
        orbital_energies: None,
    }
}

/// Transforms integrals into the basis of `rot`: `h' = u^T h u` and the
/// four-index ERI transform. The core energy is unchanged.
pub fn rotate_integrals(ints: &IntegralSet, rot: &OrbitalRotation) -> Result<IntegralSet> {
    let n = ints.n_orb;
    let u = &rot.u;
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::Dimension(format!(
            "rotation is {}x{} but integrals have {} orbitals",
            u.nrows(),
            u.ncols(),
            n
        )));
    }
    let mut out = ints.clone();
    out.h_core = u.transpose() * &ints.h_core * u;
    out.h_core = (&out.h_core + out.h_core.transpose()) * 0.5;

    // Transform one index at a time; after each pass the transformed index
    // moves to the end so the same kernel applies four times.
    let mut cur = ints.eri_slice().to_vec();
    let n3 = n * n * n;
    for _ in 0..4 {
        let mut next = vec![0.0; cur.len()];
        // cur[p, q, r, s] -> next[q, r, s, a] = sum_p u[p, a] cur[p, q, r, s]
        for p in 0..n {
            for rest in 0..n3 {
                let v = cur[p * n3 + rest];
                if v == 0.0 {
                    continue;
                }
                let dst = rest * n;
                for a in 0..n {
                    next[dst + a] += u[(p, a)] * v;
                }
            }
        }
        cur = next;
    }
    out.eri_mut().copy_from_slice(&cur);
    out.symmetrize();
    Ok(out)
}

/// Removes `frozen_occ` (doubly occupied, folded into an effective one-body
/// operator and the core energy) and `deleted_virt` (dropped) from the
/// orbital space. Remaining orbitals keep their relative order.
pub fn freeze_and_select(
    ints: &IntegralSet,
    frozen_occ: &[usize],
    deleted_virt: &[usize],
) -> Result<IntegralSet> {
    let n = ints.n_orb;
    let n_occ = ints.n_occ();
    let mut role = vec![0u8; n];
    for &c in frozen_occ {
        if c >= n {
            return Err(Error::Selection(format!("frozen orbital {c} out of range")));
        }
        if c >= n_occ {
            return Err(Error::Selection(format!(
                "frozen orbital {c} is virtual in the reference"
            )));
        }
        if role[c] != 0 {
            return Err(Error::Selection(format!("orbital {c} listed twice")));
        }
        role[c] = 1;
    }
    for &d in deleted_virt {
        if d >= n {
            return Err(Error::Selection(format!(
                "deleted orbital {d} out of range"
            )));
        }
        if role[d] != 0 {
            return Err(Error::Selection(format!(
                "orbital {d} is both frozen and deleted (or listed twice)"
            )));
        }
        if d < n_occ {
            return Err(Error::Selection(format!(
                "deleted orbital {d} is occupied in the reference"
            )));
        }
        role[d] = 2;
    }
    if frozen_occ.is_empty() && deleted_virt.is_empty() {
        return Ok(ints.clone());
    }
    let active: Vec<usize> = (0..n).filter(|&p| role[p] == 0).collect();
    let frozen: Vec<usize> = (0..n).filter(|&p| role[p] == 1).collect();

    let mut e_frozen = 0.0;
    for &c in &frozen {
        e_frozen += 2.0 * ints.h_core[(c, c)];
        for &d in &frozen {
            e_frozen += 2.0 * ints.eri(c, c, d, d) - ints.eri(c, d, d, c);
        }
    }
    let m = active.len();
    let mut out = IntegralSet::zeros(m, ints.n_elec - 2 * frozen.len());
    out.ms2 = ints.ms2;
    out.e_core = ints.e_core + e_frozen;
    for (i, &p) in active.iter().enumerate() {
        for (j, &q) in active.iter().enumerate() {
            let mut v = ints.h_core[(p, q)];
            for &c in &frozen {
                v += 2.0 * ints.eri(p, q, c, c) - ints.eri(p, c, c, q);
            }
            out.h_core[(i, j)] = v;
        }
    }
    out.h_core = (&out.h_core + out.h_core.transpose()) * 0.5;
    {
        let buf = out.eri_mut();
        let mut k = 0;
        for &p in &active {
            for &q in &active {
                for &r in &active {
                    for &s in &active {
                        buf[k] = ints.eri(p, q, r, s);
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}
