use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Coefficients smaller than this are dropped by [`QubitOperator::simplify`].
pub const ZERO_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis on up to 64 qubits.
///
/// Stored as two bit masks (two bits per qubit): qubit `k` is X when only
/// `x` has bit `k`, Z when only `z` has it, Y when both do.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    x: u64,
    z: u64,
}

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k`.
#[inline]
pub fn i_pow(k: u32) -> Complex64 {
    I_POWERS[(k & 3) as usize]
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn from_masks(x: u64, z: u64) -> Self {
        Self { x, z }
    }

    pub fn single(qubit: usize, p: Pauli) -> Self {
        Self::from_letters(&[(qubit, p)])
    }

    pub fn from_letters(letters: &[(usize, Pauli)]) -> Self {
        let mut s = Self::IDENTITY;
        for &(q, p) in letters {
            s = s.with(q, p);
        }
        s
    }

    /// Parses `"X0 Z1 Y3"` (or `"I"` for the identity).
    pub fn parse(text: &str) -> Option<Self> {
        let mut s = Self::IDENTITY;
        for tok in text.split_whitespace() {
            if tok == "I" {
                continue;
            }
            let (letter, idx) = tok.split_at(1);
            let q: usize = idx.parse().ok()?;
            if q >= 64 {
                return None;
            }
            let p = match letter {
                "X" => Pauli::X,
                "Y" => Pauli::Y,
                "Z" => Pauli::Z,
                "I" => Pauli::I,
                _ => return None,
            };
            s = s.with(q, p);
        }
        Some(s)
    }

    fn with(mut self, q: usize, p: Pauli) -> Self {
        let bit = 1u64 << q;
        self.x &= !bit;
        self.z &= !bit;
        match p {
            Pauli::I => {}
            Pauli::X => self.x |= bit,
            Pauli::Z => self.z |= bit,
            Pauli::Y => {
                self.x |= bit;
                self.z |= bit;
            }
        }
        self
    }

    #[inline]
    pub fn x_mask(self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_mask(self) -> u64 {
        self.z
    }

    pub fn get(self, q: usize) -> Pauli {
        let bit = 1u64 << q;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub fn is_identity(self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity letters.
    pub fn weight(self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn y_count(self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(self) -> Vec<usize> {
        let mut m = self.x | self.z;
        let mut out = Vec::with_capacity(m.count_ones() as usize);
        while m != 0 {
            out.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        out
    }

    /// Highest qubit in the support.
    pub fn max_qubit(self) -> Option<usize> {
        let m = self.x | self.z;
        (m != 0).then(|| 63 - m.leading_zeros() as usize)
    }

    /// `self * other = i^k * result`; returns `(k mod 4, result)`.
    #[inline]
    pub fn mul(self, other: Self) -> (u32, Self) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones() + 4 * 64
            - (x & z).count_ones();
        (k & 3, Self { x, z })
    }

    pub fn commutes(self, other: Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Action on a computational basis state: `P|b> = phase |target>`.
    #[inline]
    pub fn apply(self, b: u64) -> (Complex64, u64) {
        let sign = (self.z & b).count_ones() & 1;
        (i_pow(self.y_count() + 2 * sign), b ^ self.x)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for q in self.support() {
            let l = match self.get(q) {
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
                Pauli::I => unreachable!(),
            };
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{l}{q}")?;
            first = false;
        }
        Ok(())
    }
}

/// Complex-weighted sum of Pauli strings, kept in a canonical sorted map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QubitOperator {
    terms: BTreeMap<PauliString, Complex64>,
}

impl QubitOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn identity(c: Complex64) -> Self {
        Self::term(PauliString::IDENTITY, c)
    }

    pub fn term(p: PauliString, c: Complex64) -> Self {
        let mut op = Self::new();
        op.add_term(p, c);
        op
    }

    pub fn from_terms<I: IntoIterator<Item = (PauliString, Complex64)>>(it: I) -> Self {
        let mut op = Self::new();
        for (p, c) in it {
            op.add_term(p, c);
        }
        op.simplify(ZERO_TOL);
        op
    }

    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        *self.terms.entry(p).or_default() += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (PauliString, Complex64)> + '_ {
        self.terms.iter().map(|(p, c)| (*p, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, p: PauliString) -> Complex64 {
        self.terms.get(&p).copied().unwrap_or_default()
    }

    /// Drops coefficients with magnitude at or below `tol`.
    pub fn simplify(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            terms: self.terms.iter().map(|(p, v)| (*p, v * c)).collect(),
        }
    }

    /// Adjoint; Pauli strings are Hermitian so only coefficients conjugate.
    pub fn dagger(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(p, v)| (*p, v.conj())).collect(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.re.abs() <= tol)
    }

    /// Smallest register that contains every term.
    pub fn n_qubits(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|p| p.max_qubit())
            .max()
            .map_or(0, |q| q + 1)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Sum of coefficient magnitudes.
    pub fn one_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }
}

impl Add for &QubitOperator {
    type Output = QubitOperator;
    fn add(self, rhs: &QubitOperator) -> QubitOperator {
        let mut out = self.clone();
        for (p, c) in rhs.terms() {
            out.add_term(p, c);
        }
        out.simplify(ZERO_TOL);
        out
    }
}

impl Sub for &QubitOperator {
    type Output = QubitOperator;
    fn sub(self, rhs: &QubitOperator) -> QubitOperator {
        let mut out = self.clone();
        for (p, c) in rhs.terms() {
            out.add_term(p, -c);
        }
        out.simplify(ZERO_TOL);
        out
    }
}

impl Mul for &QubitOperator {
    type Output = QubitOperator;
    fn mul(self, rhs: &QubitOperator) -> QubitOperator {
        let mut out = QubitOperator::new();
        for (a, ca) in self.terms() {
            for (b, cb) in rhs.terms() {
                let (k, p) = a.mul(b);
                out.add_term(p, ca * cb * i_pow(k));
            }
        }
        out.simplify(ZERO_TOL);
        out
    }
}
