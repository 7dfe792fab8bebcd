//! Fixed (N_alpha, N_beta) sector of the occupation-number space.
//!
//! Every operator the simulator applies conserves both spin populations, so
//! states can be stored as real vectors over this sector instead of the full
//! `2^n` register. Index layout: `alpha_rank * n_beta_strings + beta_rank`,
//! with strings in ascending bit order.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::pauli::QubitOperator;
use super::sparse::{group_by_x, CsrMatrix};
use crate::{Error, Result};

const LEAK_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_orb: usize,
    n_alpha: usize,
    n_beta: usize,
    alpha_strings: Vec<u32>,
    beta_strings: Vec<u32>,
    alpha_rank: Vec<u32>,
    beta_rank: Vec<u32>,
}

fn strings(n: usize, k: usize) -> (Vec<u32>, Vec<u32>) {
    let mut list = Vec::new();
    let mut rank = vec![u32::MAX; 1usize << n];
    for s in 0..(1u32 << n) {
        if s.count_ones() as usize == k {
            rank[s as usize] = list.len() as u32;
            list.push(s);
        }
    }
    (list, rank)
}

/// Moves bit `k` of `s` to bit `2k`.
#[inline]
fn spread(s: u32) -> u64 {
    let mut x = s as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

/// Inverse of [`spread`] on the even bits of `x`.
#[inline]
fn compress(x: u64) -> u32 {
    let mut x = x & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

impl SectorBasis {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_orb == 0 || n_orb > 20 || n_alpha > n_orb || n_beta > n_orb {
            return Err(Error::InvalidInput(format!(
                "sector ({n_alpha}, {n_beta}) over {n_orb} orbitals is not supported"
            )));
        }
        let (alpha_strings, alpha_rank) = strings(n_orb, n_alpha);
        let (beta_strings, beta_rank) = strings(n_orb, n_beta);
        Ok(Self {
            n_orb,
            n_alpha,
            n_beta,
            alpha_strings,
            beta_strings,
            alpha_rank,
            beta_rank,
        })
    }

    /// Sector holding `n_elec` electrons with spin projection `ms2 / 2`.
    pub fn for_electrons(n_orb: usize, n_elec: usize, ms2: i32) -> Result<Self> {
        let twice_alpha = n_elec as i64 + ms2 as i64;
        if twice_alpha < 0 || twice_alpha % 2 != 0 || twice_alpha / 2 > n_elec as i64 {
            return Err(Error::InvalidInput(format!(
                "no spin sector with {n_elec} electrons and MS2={ms2}"
            )));
        }
        let n_alpha = (twice_alpha / 2) as usize;
        Self::new(n_orb, n_alpha, n_elec - n_alpha)
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orb
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_elec(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn dim(&self) -> usize {
        self.alpha_strings.len() * self.beta_strings.len()
    }

    /// Occupation bits (qubit `k` = bit `k`) of sector state `idx`.
    #[inline]
    pub fn state(&self, idx: usize) -> u64 {
        let nb = self.beta_strings.len();
        spread(self.alpha_strings[idx / nb]) | (spread(self.beta_strings[idx % nb]) << 1)
    }

    /// Sector index of a basis state, or `None` outside the sector.
    #[inline]
    pub fn index(&self, bits: u64) -> Option<usize> {
        if bits >> (2 * self.n_orb) != 0 {
            return None;
        }
        let ra = self.alpha_rank[compress(bits) as usize];
        let rb = self.beta_rank[compress(bits >> 1) as usize];
        if ra == u32::MAX || rb == u32::MAX {
            None
        } else {
            Some(ra as usize * self.beta_strings.len() + rb as usize)
        }
    }

    /// Index of the determinant with the lowest `n_alpha` / `n_beta` spatial
    /// orbitals occupied.
    pub fn reference_index(&self) -> usize {
        let a = (1u64 << self.n_alpha) - 1;
        let b = (1u64 << self.n_beta) - 1;
        self.index(spread(a as u32) | (spread(b as u32) << 1))
            .expect("aufbau determinant lies in its own sector")
    }

    /// Unit vector on the aufbau determinant.
    pub fn reference_vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[self.reference_index()] = 1.0;
        v
    }

    /// Real matrix of `q` restricted to the sector.
    ///
    /// Fails if `q` couples a sector state to one outside it, or if a matrix
    /// element has a non-negligible imaginary part.
    pub fn to_sparse(&self, q: &QubitOperator) -> Result<CsrMatrix<f64>> {
        let needed = q.n_qubits();
        if needed > self.n_qubits() {
            return Err(Error::Register {
                qubit: needed - 1,
                n_qubits: self.n_qubits(),
            });
        }
        let groups = group_by_x(q);
        let split: Vec<(u32, u32)> = groups
            .iter()
            .map(|g| (compress(g.x), compress(g.x >> 1)))
            .collect();
        let nb = self.beta_strings.len();
        let dim = self.dim();
        let mut m = CsrMatrix::new(dim, dim);
        let mut row = Vec::new();
        for r in 0..dim {
            let sa = self.alpha_strings[r / nb];
            let sb = self.beta_strings[r % nb];
            let t = spread(sa) | (spread(sb) << 1);
            for (g, &(xa, xb)) in groups.iter().zip(&split) {
                let b = t ^ g.x;
                let v = g.value_at(b);
                let ra = self.alpha_rank[(sa ^ xa) as usize];
                let rb = self.beta_rank[(sb ^ xb) as usize];
                if ra == u32::MAX || rb == u32::MAX {
                    if v.norm() > LEAK_TOL {
                        return Err(Error::SectorLeak(v.norm()));
                    }
                    continue;
                }
                if v.im.abs() > IMAG_TOL {
                    return Err(Error::ImaginaryResidual(v.im.abs()));
                }
                if v.re != 0.0 {
                    row.push(((ra as usize * nb + rb as usize) as u32, v.re));
                }
            }
            m.push_row(std::mem::take(&mut row));
        }
        Ok(m)
    }
}

/// A real anti-symmetric sector operator stored only on the states it
/// touches, for cheap repeated exponentiation.
///
/// On a determinant basis a generator splits into small disconnected blocks
/// (at most a handful of determinants each). Each block is diagonalized once
/// through `-G^2 = Q diag(w^2) Q^T`, after which
/// `exp(theta G) x = Q (cos(theta w) Q^T x) + G Q (sin(theta w) / w Q^T x)`.
/// Blocks with bitwise identical matrices share one decomposition.
#[derive(Clone, Debug)]
pub struct SectorGenerator {
    support: Vec<u32>,
    local: CsrMatrix<f64>,
    /// Distinct block frequencies `w`.
    freqs: Vec<f64>,
    shapes: Vec<BlockShape>,
    /// Shape of each block; its sector indices are the next `m` entries of
    /// `block_states`.
    block_shapes: Vec<u32>,
    block_states: Vec<u32>,
}

#[derive(Clone, Debug)]
struct BlockShape {
    m: usize,
    /// Row-major `Q`.
    q: Vec<f64>,
    /// Row-major `G Q`.
    gq: Vec<f64>,
    /// Index into `freqs` for each column of `Q`.
    freq: Vec<u32>,
}

/// Two squared frequencies closer than this count as one.
const FREQ_TOL: f64 = 1e-12;

fn find(parent: &mut [u32], x: u32) -> u32 {
    let mut r = x;
    while parent[r as usize] != r {
        r = parent[r as usize];
    }
    let mut y = x;
    while parent[y as usize] != r {
        let next = parent[y as usize];
        parent[y as usize] = r;
        y = next;
    }
    r
}

impl SectorGenerator {
    pub fn new(q: &QubitOperator, basis: &SectorBasis) -> Result<Self> {
        Self::from_matrix(&basis.to_sparse(q)?)
    }

    pub fn from_matrix(m: &CsrMatrix<f64>) -> Result<Self> {
        let defect = m.adjoint_defect(-1.0);
        if defect > 1e-10 {
            return Err(Error::NotAntiHermitian(defect));
        }
        let support: Vec<u32> = (0..m.n_rows())
            .filter(|&r| !m.row(r).0.is_empty())
            .map(|r| r as u32)
            .collect();
        let mut local_of = vec![u32::MAX; m.n_rows()];
        for (k, &r) in support.iter().enumerate() {
            local_of[r as usize] = k as u32;
        }
        let mut local = CsrMatrix::new(support.len(), support.len());
        for &r in &support {
            let (cols, vals) = m.row(r as usize);
            let entries = cols
                .iter()
                .zip(vals)
                .map(|(&c, &v)| (local_of[c as usize], v))
                .collect();
            local.push_row(entries);
        }

        let n = support.len();
        let mut parent: Vec<u32> = (0..n as u32).collect();
        for r in 0..n {
            for &c in local.row(r).0 {
                let (a, b) = (find(&mut parent, r as u32), find(&mut parent, c));
                parent[a.max(b) as usize] = a.min(b);
            }
        }
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); n];
        for r in 0..n as u32 {
            let root = find(&mut parent, r);
            members[root as usize].push(r);
        }

        let mut freqs: Vec<f64> = Vec::new();
        let mut shapes: Vec<BlockShape> = Vec::new();
        let mut shape_of: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut block_shapes = Vec::new();
        let mut block_states = Vec::with_capacity(n);
        for idx in members.into_iter().filter(|v| !v.is_empty()) {
            let mm = idx.len();
            let mut g = DMatrix::<f64>::zeros(mm, mm);
            for (i, &r) in idx.iter().enumerate() {
                let (cols, vals) = local.row(r as usize);
                for (&c, &v) in cols.iter().zip(vals) {
                    let j = idx.binary_search(&c).expect("block is closed");
                    g[(i, j)] = v;
                }
            }
            let key: Vec<u64> = g.iter().map(|v| v.to_bits()).collect();
            let shape = match shape_of.get(&key) {
                Some(&k) => k,
                None => {
                    let eig = SymmetricEigen::new(-(&g * &g));
                    let q = eig.eigenvectors;
                    let gq = &g * &q;
                    let freq = eig
                        .eigenvalues
                        .iter()
                        .map(|&w2| {
                            let w = w2.max(0.0).sqrt();
                            let k = freqs
                                .iter()
                                .position(|&f| (f * f - w * w).abs() <= FREQ_TOL * (1.0 + w * w))
                                .unwrap_or_else(|| {
                                    freqs.push(w);
                                    freqs.len() - 1
                                });
                            k as u32
                        })
                        .collect();
                    shapes.push(BlockShape {
                        m: mm,
                        q: q.transpose().iter().copied().collect(),
                        gq: gq.transpose().iter().copied().collect(),
                        freq,
                    });
                    let k = (shapes.len() - 1) as u32;
                    shape_of.insert(key, k);
                    k
                }
            };
            block_shapes.push(shape);
            block_states.extend(idx.iter().map(|&r| support[r as usize]));
        }
        Ok(Self {
            support,
            local,
            freqs,
            shapes,
            block_shapes,
            block_states,
        })
    }

    /// Sector states on which the generator acts.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn nnz(&self) -> usize {
        self.local.nnz()
    }

    /// `v <- exp(theta G) v`, exact up to rounding.
    pub fn apply_exp(&self, theta: f64, v: &mut [f64]) {
        if theta == 0.0 || self.support.is_empty() {
            return;
        }
        let (cos, sinc): (Vec<f64>, Vec<f64>) = self
            .freqs
            .iter()
            .map(|&w| {
                let x = theta * w;
                (x.cos(), if w > 0.0 { x.sin() / w } else { theta })
            })
            .unzip();
        let mut buf = Vec::new();
        let mut at = 0;
        for &shape in &self.block_shapes {
            let b = &self.shapes[shape as usize];
            let m = b.m;
            let idx = &self.block_states[at..at + m];
            at += m;
            buf.clear();
            buf.resize(3 * m, 0.0);
            let (x, cs) = buf.split_at_mut(m);
            let (c, s) = cs.split_at_mut(m);
            for (xi, &r) in x.iter_mut().zip(idx) {
                *xi = v[r as usize];
            }
            for k in 0..m {
                let mut y = 0.0;
                for i in 0..m {
                    y += b.q[i * m + k] * x[i];
                }
                let f = b.freq[k] as usize;
                c[k] = cos[f] * y;
                s[k] = sinc[f] * y;
            }
            for (i, &r) in idx.iter().enumerate() {
                let (q, gq) = (&b.q[i * m..(i + 1) * m], &b.gq[i * m..(i + 1) * m]);
                let mut out = 0.0;
                for k in 0..m {
                    out += q[k] * c[k] + gq[k] * s[k];
                }
                v[r as usize] = out;
            }
        }
    }

    /// `<lambda| G |phi>`.
    pub fn inner(&self, lambda: &[f64], phi: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, &r) in self.support.iter().enumerate() {
            let (cols, vals) = self.local.row(k);
            let mut row = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                row += v * phi[self.support[c as usize] as usize];
            }
            acc += lambda[r as usize] * row;
        }
        acc
    }

    /// `out = G v` over the whole sector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (k, &r) in self.support.iter().enumerate() {
            let (cols, vals) = self.local.row(k);
            let mut row = 0.0;
            for (&c, &val) in cols.iter().zip(vals) {
                row += val * v[self.support[c as usize] as usize];
            }
            out[r as usize] = row;
        }
        out
    }
}
