use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use super::pauli::{i_pow, PauliString, QubitOperator, ZERO_TOL};

/// A single creation (`dagger = true`) or annihilation operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self {
            mode,
            dagger: false,
        }
    }
}

/// Sum of products of ladder operators with complex coefficients.
///
/// Terms are stored as given; [`FermionOperator::normal_ordered`] produces the
/// canonical form used for comparisons.
#[derive(Clone, Debug, Default)]
pub struct FermionOperator {
    terms: Vec<(Complex64, Vec<Ladder>)>,
}

impl FermionOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(coeff: impl Into<Complex64>, ops: Vec<Ladder>) -> Self {
        Self {
            terms: vec![(coeff.into(), ops)],
        }
    }

    /// `coeff * a_p^dagger a_q`.
    pub fn hopping(coeff: impl Into<Complex64>, p: usize, q: usize) -> Self {
        Self::term(coeff, vec![Ladder::create(p), Ladder::annihilate(q)])
    }

    pub fn push(&mut self, coeff: impl Into<Complex64>, ops: Vec<Ladder>) {
        self.terms.push((coeff.into(), ops));
    }

    pub fn terms(&self) -> &[(Complex64, Vec<Ladder>)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        Self {
            terms: self.terms.iter().map(|(v, o)| (v * c, o.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for (ca, a) in &self.terms {
            for (cb, b) in &other.terms {
                let mut ops = a.clone();
                ops.extend_from_slice(b);
                out.terms.push((ca * cb, ops));
            }
        }
        out
    }

    /// Hermitian adjoint.
    pub fn dagger(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, ops)| {
                    let rev = ops
                        .iter()
                        .rev()
                        .map(|l| Ladder {
                            mode: l.mode,
                            dagger: !l.dagger,
                        })
                        .collect();
                    (c.conj(), rev)
                })
                .collect(),
        }
    }

    /// Highest mode index plus one.
    pub fn n_modes(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|(_, ops)| ops.iter().map(|l| l.mode + 1))
            .max()
            .unwrap_or(0)
    }

    /// Canonical normal-ordered form: creation operators left of annihilation
    /// operators, each block in descending mode order. Coefficients with
    /// magnitude at or below 1e-14 are removed.
    pub fn normal_ordered(&self) -> BTreeMap<Vec<Ladder>, Complex64> {
        let mut out: BTreeMap<Vec<Ladder>, Complex64> = BTreeMap::new();
        for (c, ops) in &self.terms {
            for (c2, ops2) in normal_order_term(*c, ops.clone()) {
                *out.entry(ops2).or_default() += c2;
            }
        }
        out.retain(|_, c| c.norm() > ZERO_TOL);
        out
    }

    /// Equality after normal ordering, to `tol` per coefficient.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let diff = self.add(&other.scale(-1.0)).normal_ordered();
        diff.values().all(|c| c.norm() <= tol)
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.add(&self.dagger())
            .normal_ordered()
            .values()
            .all(|c| c.norm() <= tol)
    }

    /// Two-norm of the normal-ordered coefficients.
    pub fn coefficient_norm(&self) -> f64 {
        self.normal_ordered()
            .values()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Rebuilds the operator from its normal-ordered form.
    pub fn canonical(&self) -> Self {
        Self {
            terms: self
                .normal_ordered()
                .into_iter()
                .map(|(ops, c)| (c, ops))
                .collect(),
        }
    }

    /// Maps every mode through `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(c, ops)| {
                    (
                        *c,
                        ops.iter()
                            .map(|l| Ladder {
                                mode: f(l.mode),
                                dagger: l.dagger,
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }
}

fn normal_order_term(coeff: Complex64, ops: Vec<Ladder>) -> Vec<(Complex64, Vec<Ladder>)> {
    let mut done = Vec::new();
    let mut work = vec![(coeff, ops)];
    'outer: while let Some((mut c, mut ops)) = work.pop() {
        for i in 1..ops.len() {
            let mut j = i;
            while j > 0 {
                let (left, right) = (ops[j - 1], ops[j]);
                if right.dagger && !left.dagger {
                    // a_q a_p^dagger = delta_pq - a_p^dagger a_q
                    if left.mode == right.mode {
                        let mut contracted = ops.clone();
                        contracted.drain(j - 1..=j);
                        work.push((c, contracted));
                    }
                    ops.swap(j - 1, j);
                    c = -c;
                } else if right.dagger == left.dagger {
                    if right.mode == left.mode {
                        continue 'outer;
                    }
                    if right.mode > left.mode {
                        ops.swap(j - 1, j);
                        c = -c;
                    } else {
                        break;
                    }
                } else {
                    break;
                }
                j -= 1;
            }
        }
        done.push((c, ops));
    }
    done
}

/// Jordan-Wigner image of a single ladder operator:
/// `a_p^dagger = (X_p - iY_p)/2 Z_{<p}`, `a_p = (X_p + iY_p)/2 Z_{<p}`.
fn ladder_image(l: Ladder) -> [(PauliString, Complex64); 2] {
    let bit = 1u64 << l.mode;
    let zs = bit - 1;
    let x = PauliString::from_masks(bit, zs);
    let y = PauliString::from_masks(bit, zs | bit);
    let yc = if l.dagger {
        Complex64::new(0.0, -0.5)
    } else {
        Complex64::new(0.0, 0.5)
    };
    [(x, Complex64::new(0.5, 0.0)), (y, yc)]
}

/// Jordan-Wigner transformation to a qubit operator on `n_modes` qubits.
pub fn jordan_wigner(f: &FermionOperator) -> QubitOperator {
    let mut acc: HashMap<PauliString, Complex64> = HashMap::new();
    let mut order: Vec<PauliString> = Vec::new();
    let mut partial: Vec<(PauliString, Complex64)> = Vec::new();
    let mut next: Vec<(PauliString, Complex64)> = Vec::new();
    for (c, ops) in f.terms() {
        if c.norm() == 0.0 {
            continue;
        }
        partial.clear();
        partial.push((PauliString::IDENTITY, *c));
        for l in ops {
            next.clear();
            for &(p, cp) in &partial {
                for (q, cq) in ladder_image(*l) {
                    let (k, r) = p.mul(q);
                    next.push((r, cp * cq * i_pow(k)));
                }
            }
            std::mem::swap(&mut partial, &mut next);
        }
        for &(p, cp) in &partial {
            match acc.get_mut(&p) {
                Some(v) => *v += cp,
                None => {
                    acc.insert(p, cp);
                    order.push(p);
                }
            }
        }
    }
    QubitOperator::from_terms(order.into_iter().map(|p| (p, acc[&p])))
}
