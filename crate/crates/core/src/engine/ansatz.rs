use num_complex::Complex64;

use super::bfgs::{minimize, BfgsOptions, Objective};
use crate::pool::PoolOperator;
use crate::qubit_map::{CsrMatrix, SectorGenerator, Statevector};
use crate::{Error, Result};

/// Selection floor: gradients at or below this end the ADAPT loop.
pub const GRADIENT_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzElement {
    pub op_id: usize,
    pub theta: f64,
}

/// Ordered product of exponentials applied to a reference determinant.
/// Element 0 acts first. Vectors are sector coordinates.
#[derive(Clone, Debug)]
pub struct AnsatzState {
    pub elements: Vec<AnsatzElement>,
    pub reference: Vec<f64>,
    pub state: Vec<f64>,
}

impl AnsatzState {
    pub fn new(reference: Vec<f64>) -> Self {
        Self {
            elements: Vec::new(),
            state: reference.clone(),
            reference,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn ops(&self) -> Vec<usize> {
        self.elements.iter().map(|e| e.op_id).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.theta).collect()
    }

    pub fn set_thetas(&mut self, thetas: &[f64], gens: &[SectorGenerator]) {
        for (e, &t) in self.elements.iter_mut().zip(thetas) {
            e.theta = t;
        }
        self.refresh(gens);
    }

    /// Recomputes `state` from the reference and amplitudes.
    pub fn refresh(&mut self, gens: &[SectorGenerator]) {
        self.state = prepare_state(gens, &self.ops(), &self.thetas(), &self.reference);
    }
}

/// `prod_k exp(theta_k G_{ops[k]}) |ref>`, with `k = 0` applied first.
pub fn prepare_state(
    gens: &[SectorGenerator],
    ops: &[usize],
    thetas: &[f64],
    reference: &[f64],
) -> Vec<f64> {
    let mut psi = reference.to_vec();
    for (&op, &t) in ops.iter().zip(thetas) {
        gens[op].apply_exp(t, &mut psi);
    }
    psi
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Energy and its gradient with respect to every amplitude, from one
/// forward preparation and one backward sweep.
pub fn energy_and_gradient(
    h: &CsrMatrix<f64>,
    gens: &[SectorGenerator],
    ops: &[usize],
    thetas: &[f64],
    reference: &[f64],
) -> (f64, Vec<f64>) {
    let psi = prepare_state(gens, ops, thetas, reference);
    let hpsi = h.matvec(&psi);
    let e = dot(&psi, &hpsi);
    (e, backward(gens, ops, thetas, psi, hpsi))
}

fn backward(
    gens: &[SectorGenerator],
    ops: &[usize],
    thetas: &[f64],
    mut phi: Vec<f64>,
    mut lambda: Vec<f64>,
) -> Vec<f64> {
    let mut grad = vec![0.0; ops.len()];
    for k in (0..ops.len()).rev() {
        let g = &gens[ops[k]];
        grad[k] = 2.0 * g.inner(&lambda, &phi);
        g.apply_exp(-thetas[k], &mut phi);
        g.apply_exp(-thetas[k], &mut lambda);
    }
    grad
}

/// `dE/dtheta` at `theta = 0` for appending each generator:
/// `<psi|[H, A]|psi> = 2 <H psi| A psi>`.
pub fn pool_gradients(h: &CsrMatrix<f64>, gens: &[SectorGenerator], psi: &[f64]) -> Vec<f64> {
    let hpsi = h.matvec(psi);
    gens.iter().map(|g| 2.0 * g.inner(&hpsi, psi)).collect()
}

/// Full-register pool gradients `<psi|[H, A]|psi>` for small registers.
pub fn pool_gradients_full(
    h: &CsrMatrix<Complex64>,
    pool: &[PoolOperator],
    psi: &Statevector,
) -> Result<Vec<f64>> {
    let n = psi.n_qubits();
    let amps = psi.amplitudes();
    let hpsi = h.matvec(amps);
    pool.iter()
        .map(|op| {
            let a = op.sparse_form(n)?;
            let apsi = a.matvec(amps);
            // <psi|H A|psi> - <psi|A H|psi> = 2 Re <H psi|A psi> for anti-Hermitian A.
            let hap: Complex64 = hpsi.iter().zip(&apsi).map(|(x, y)| x.conj() * y).sum();
            let ahp: Complex64 = apsi.iter().zip(&hpsi).map(|(x, y)| -(x.conj() * y)).sum();
            let g = hap - ahp;
            if g.im.abs() >= 1e-9 {
                return Err(Error::Internal(format!(
                    "pool gradient of {} has imaginary part {:.3e}",
                    op.label, g.im
                )));
            }
            Ok(g.re)
        })
        .collect()
}

/// Index of the largest `|g|` (lowest index on ties), or `None` when every
/// gradient is at or below [`GRADIENT_FLOOR`].
pub fn select_operator(gradients: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, g) in gradients.iter().enumerate() {
        if g.abs() > GRADIENT_FLOOR && best.is_none_or(|b| g.abs() > gradients[b].abs()) {
            best = Some(k);
        }
    }
    best
}

/// Outcome of one inner optimization.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub energy: f64,
    pub value_calls: usize,
    pub gradient_calls: usize,
    pub iterations: usize,
    pub degraded: bool,
}

struct AnsatzObjective<'a> {
    h: &'a CsrMatrix<f64>,
    gens: &'a [SectorGenerator],
    ops: Vec<usize>,
    reference: &'a [f64],
    cache: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl AnsatzObjective<'_> {
    fn forward(&mut self, x: &[f64]) -> f64 {
        let psi = prepare_state(self.gens, &self.ops, x, self.reference);
        let hpsi = self.h.matvec(&psi);
        let e = dot(&psi, &hpsi);
        self.cache = Some((x.to_vec(), psi, hpsi));
        e
    }
}

impl Objective for AnsatzObjective<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.forward(x)
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        let hit = matches!(&self.cache, Some((cx, _, _)) if cx.as_slice() == x);
        if !hit {
            self.forward(x);
        }
        let (_, psi, hpsi) = self.cache.take().expect("forward pass cached");
        let g = backward(self.gens, &self.ops, x, psi.clone(), hpsi.clone());
        self.cache = Some((x.to_vec(), psi, hpsi));
        g
    }
}

/// Minimizes the ansatz energy over all amplitudes, warm-started from the
/// current values, and updates `ansatz` in place.
pub fn optimize(
    h: &CsrMatrix<f64>,
    gens: &[SectorGenerator],
    ansatz: &mut AnsatzState,
    tol: f64,
) -> OptimizeOutcome {
    let mut obj = AnsatzObjective {
        h,
        gens,
        ops: ansatz.ops(),
        reference: &ansatz.reference,
        cache: None,
    };
    let result = minimize(&mut obj, &ansatz.thetas(), &BfgsOptions::from_tol(tol));
    let state = match obj.cache.take() {
        Some((cx, psi, _)) if cx == result.x => Some(psi),
        _ => None,
    };
    for (e, &t) in ansatz.elements.iter_mut().zip(&result.x) {
        e.theta = t;
    }
    match state {
        Some(psi) => ansatz.state = psi,
        None => ansatz.refresh(gens),
    }
    OptimizeOutcome {
        energy: result.f,
        value_calls: result.value_calls,
        gradient_calls: result.gradient_calls,
        iterations: result.iterations,
        degraded: result.degraded(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_rules() {
        assert_eq!(select_operator(&[0.1, -0.5, 0.2]), Some(1));
        assert_eq!(select_operator(&[0.3, -0.3]), Some(0));
        assert_eq!(select_operator(&[1e-10, -5e-10]), None);
        assert_eq!(select_operator(&[]), None);
    }
}
