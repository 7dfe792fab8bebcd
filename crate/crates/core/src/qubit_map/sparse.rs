use std::collections::BTreeMap;

use num_complex::Complex64;

use super::amplitude::Amplitude;
use super::pauli::{i_pow, QubitOperator};
use crate::{Error, Result};

/// Compressed sparse row matrix. Column indices within a row are ascending,
/// so products are computed in a fixed summation order.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

impl<T: Amplitude> CsrMatrix<T> {
    /// Empty matrix with `n_cols` columns; rows are added with
    /// [`CsrMatrix::push_row`] (`rows_hint` only reserves space).
    pub fn new(rows_hint: usize, n_cols: usize) -> Self {
        let mut indptr = Vec::with_capacity(rows_hint + 1);
        indptr.push(0);
        Self {
            n_rows: 0,
            n_cols,
            indptr,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row; entries are sorted by column and duplicates summed.
    pub fn push_row(&mut self, mut entries: Vec<(u32, T)>) {
        entries.sort_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for (c, v) in entries {
            debug_assert!((c as usize) < self.n_cols);
            if last == Some(c) {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.indices.push(c);
                self.values.push(v);
                last = Some(c);
            }
        }
        self.indptr.push(self.indices.len());
        self.n_rows += 1;
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[T]) -> Self {
        let mut m = Self::new(rows, cols);
        for r in 0..rows {
            let row = (0..cols)
                .filter(|&c| data[r * cols + c] != T::default())
                .map(|c| (c as u32, data[r * cols + c]))
                .collect();
            m.push_row(row);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[T]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::default(),
        }
    }

    /// `y = M x`.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            let mut acc = T::default();
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c as usize];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                rows[c as usize].push((r as u32, v.conj()));
            }
        }
        let mut out = Self::new(self.n_cols, self.n_rows);
        for row in rows {
            out.push_row(row);
        }
        out
    }

    /// Largest entry of `|M - sign * M^dagger|`; `sign = 1` measures
    /// non-Hermiticity, `sign = -1` non-anti-Hermiticity.
    pub fn adjoint_defect(&self, sign: f64) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (ca, va) = self.row(r);
            let (cb, vb) = adj.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let d = if j >= cb.len() || (i < ca.len() && ca[i] < cb[j]) {
                    i += 1;
                    va[i - 1]
                } else if i >= ca.len() || cb[j] < ca[i] {
                    j += 1;
                    -(vb[j - 1] * sign)
                } else {
                    i += 1;
                    j += 1;
                    va[i - 1] - vb[j - 1] * sign
                };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::default(); self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * self.n_cols + c as usize] = v;
            }
        }
        out
    }

    /// Largest absolute row sum, an upper bound on the spectral norm of a
    /// matrix whose absolute values are symmetric.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Terms grouped by X mask: every string in a group maps `|b>` to `|b ^ x>`,
/// with a factor `c * (-1)^{|z & b|}`.
pub(crate) struct XGroup {
    pub x: u64,
    pub terms: Vec<(u64, Complex64)>,
}

pub(crate) fn group_by_x(q: &QubitOperator) -> Vec<XGroup> {
    let mut map: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
    for (p, c) in q.terms() {
        map.entry(p.x_mask())
            .or_default()
            .push((p.z_mask(), c * i_pow(p.y_count())));
    }
    map.into_iter()
        .map(|(x, terms)| XGroup { x, terms })
        .collect()
}

impl XGroup {
    #[inline]
    pub fn value_at(&self, b: u64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(z, c) in &self.terms {
            if (z & b).count_ones() & 1 == 1 {
                acc -= c;
            } else {
                acc += c;
            }
        }
        acc
    }
}

/// Matrix of `q` on the full `2^n_qubits` occupation-number space.
pub fn to_sparse(q: &QubitOperator, n_qubits: usize) -> Result<CsrMatrix<Complex64>> {
    let needed = q.n_qubits();
    if needed > n_qubits {
        return Err(Error::Register {
            qubit: needed - 1,
            n_qubits,
        });
    }
    if n_qubits > 30 {
        return Err(Error::InvalidInput(format!(
            "a dense register of {n_qubits} qubits is too large"
        )));
    }
    let dim = 1usize << n_qubits;
    let groups = group_by_x(q);
    let mut m = CsrMatrix::new(dim, dim);
    let mut row = Vec::new();
    for t in 0..dim as u64 {
        row.clear();
        for g in &groups {
            let b = t ^ g.x;
            let v = g.value_at(b);
            if v != Complex64::new(0.0, 0.0) {
                row.push((b as u32, v));
            }
        }
        m.push_row(std::mem::take(&mut row));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit_map::pauli::PauliString;

    fn op(s: &str) -> QubitOperator {
        QubitOperator::term(PauliString::parse(s).unwrap(), Complex64::new(1.0, 0.0))
    }

    #[test]
    fn z_is_diagonal() {
        let m = to_sparse(&op("Z0"), 1).unwrap();
        let d = m.to_dense();
        assert_eq!(d[0], Complex64::new(1.0, 0.0));
        assert_eq!(d[3], Complex64::new(-1.0, 0.0));
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn xx_is_antidiagonal() {
        let m = to_sparse(&op("X0 X1"), 2).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r + c == 3 { 1.0 } else { 0.0 };
                assert_eq!(m.get(r, c), Complex64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn register_too_small() {
        assert!(matches!(
            to_sparse(&op("Z3"), 2),
            Err(Error::Register { qubit: 3, .. })
        ));
    }

    #[test]
    fn adjoint_defect_detects_symmetry() {
        let y = to_sparse(&op("Y0"), 1).unwrap();
        assert_eq!(y.adjoint_defect(1.0), 0.0);
        assert!(y.adjoint_defect(-1.0) > 1.0);
    }
}
