use num_complex::Complex64;

use super::sector::SectorBasis;
use super::sparse::CsrMatrix;
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-10;
const ANTI_HERMITIAN_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-10;
const TAYLOR_TOL: f64 = 1e-16;

/// Dense state over `2^n_qubits` occupation-number basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state `|bits>`.
    pub fn basis(n_qubits: usize, bits: u64) -> Result<Self> {
        if n_qubits > 30 || bits >> n_qubits != 0 {
            return Err(Error::InvalidInput(format!(
                "basis state {bits:#b} does not fit {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[bits as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps amplitudes; the vector must have length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "{n} amplitudes is not a power of two"
            )));
        }
        let s = Self {
            n_qubits: n.trailing_zeros() as usize,
            amps,
        };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!("state norm {norm} is not 1")));
        }
        Ok(s)
    }

    /// Embeds a real sector vector into the full register.
    pub fn from_sector(basis: &SectorBasis, v: &[f64]) -> Result<Self> {
        if v.len() != basis.dim() {
            return Err(Error::Dimension(format!(
                "sector vector has {} entries, basis has {}",
                v.len(),
                basis.dim()
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << basis.n_qubits()];
        for (i, &x) in v.iter().enumerate() {
            amps[basis.state(i) as usize] = Complex64::new(x, 0.0);
        }
        Self::from_amplitudes(amps)
    }

    /// Real sector coordinates; fails if weight lies outside the sector or
    /// any amplitude has an imaginary part above 1e-10.
    pub fn to_sector(&self, basis: &SectorBasis) -> Result<Vec<f64>> {
        if basis.n_qubits() != self.n_qubits {
            return Err(Error::Dimension(
                "register size differs from the sector".into(),
            ));
        }
        let mut out = vec![0.0; basis.dim()];
        let mut outside = 0.0;
        for (bits, a) in self.amps.iter().enumerate() {
            match basis.index(bits as u64) {
                Some(i) => {
                    if a.im.abs() > IMAG_TOL {
                        return Err(Error::ImaginaryResidual(a.im.abs()));
                    }
                    out[i] = a.re;
                }
                None => outside += a.norm_sqr(),
            }
        }
        if outside > NORM_TOL {
            return Err(Error::SectorLeak(outside));
        }
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// `exp(theta G)|psi>` for an anti-Hermitian sparse `G`, by a scaled Taylor
/// series. `theta = 0` returns an exact copy.
pub fn apply_exponential(
    generator: &CsrMatrix<Complex64>,
    theta: f64,
    psi: &Statevector,
) -> Result<Statevector> {
    if generator.n_rows() != psi.amps.len() || generator.n_cols() != psi.amps.len() {
        return Err(Error::Dimension(format!(
            "generator is {}x{}, state has {} amplitudes",
            generator.n_rows(),
            generator.n_cols(),
            psi.amps.len()
        )));
    }
    let defect = generator.adjoint_defect(-1.0);
    if defect >= ANTI_HERMITIAN_TOL {
        return Err(Error::NotAntiHermitian(defect));
    }
    if theta == 0.0 {
        return Ok(psi.clone());
    }
    let steps = (theta.abs() * generator.max_row_sum() / 0.5)
        .ceil()
        .max(1.0) as usize;
    let h = theta / steps as f64;
    let mut w = psi.amps.clone();
    let mut term = vec![Complex64::new(0.0, 0.0); w.len()];
    let mut next = term.clone();
    for _ in 0..steps {
        term.copy_from_slice(&w);
        let scale = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for k in 1..=40 {
            generator.matvec_into(&term, &mut next);
            let f = h / k as f64;
            let mut biggest: f64 = 0.0;
            for (t, (n, out)) in term.iter_mut().zip(next.iter().zip(w.iter_mut())) {
                *t = n * f;
                *out += *t;
                biggest = biggest.max(t.norm());
            }
            if biggest <= TAYLOR_TOL * scale {
                break;
            }
        }
    }
    Ok(Statevector {
        n_qubits: psi.n_qubits,
        amps: w,
    })
}

/// `<psi|O|psi>` for a Hermitian sparse `O`; the imaginary residual must be
/// below 1e-10.
pub fn expectation(op: &CsrMatrix<Complex64>, psi: &Statevector) -> Result<f64> {
    if op.n_rows() != psi.amps.len() || op.n_cols() != psi.amps.len() {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, state has {} amplitudes",
            op.n_rows(),
            op.n_cols(),
            psi.amps.len()
        )));
    }
    let v = op.matvec(&psi.amps);
    let e: Complex64 = psi.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    if e.im.abs() >= IMAG_TOL {
        return Err(Error::ImaginaryResidual(e.im.abs()));
    }
    Ok(e.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit_map::pauli::{PauliString, QubitOperator};
    use crate::qubit_map::sparse::to_sparse;

    fn op(s: &str, c: Complex64) -> QubitOperator {
        QubitOperator::term(PauliString::parse(s).unwrap(), c)
    }

    #[test]
    fn identity_and_z_expectations() {
        let psi = Statevector::basis(1, 1).unwrap();
        let id = to_sparse(&QubitOperator::identity(Complex64::new(1.0, 0.0)), 1).unwrap();
        assert_eq!(expectation(&id, &psi).unwrap(), 1.0);
        let z = to_sparse(&op("Z0", Complex64::new(1.0, 0.0)), 1).unwrap();
        assert_eq!(expectation(&z, &psi).unwrap(), -1.0);
    }

    #[test]
    fn zero_angle_is_exact_copy() {
        let g = to_sparse(&op("Y0 X1", Complex64::new(0.0, 0.5)), 2).unwrap();
        let psi = Statevector::basis(2, 0b01).unwrap();
        assert_eq!(apply_exponential(&g, 0.0, &psi).unwrap(), psi);
    }

    #[test]
    fn rejects_hermitian_generator() {
        let g = to_sparse(&op("X0", Complex64::new(1.0, 0.0)), 1).unwrap();
        let psi = Statevector::basis(1, 0).unwrap();
        assert!(matches!(
            apply_exponential(&g, 0.1, &psi),
            Err(Error::NotAntiHermitian(_))
        ));
    }

    #[test]
    fn non_hermitian_expectation_is_flagged() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Statevector::from_amplitudes(vec![Complex64::new(h, 0.0); 2]).unwrap();
        let ix = to_sparse(&op("X0", Complex64::new(0.0, 1.0)), 1).unwrap();
        assert!(matches!(
            expectation(&ix, &plus),
            Err(Error::ImaginaryResidual(_))
        ));
    }
}
