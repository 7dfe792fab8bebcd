//! Dense symmetric helpers shared by the SCF and analysis code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigen-decomposition of a real symmetric matrix with eigenvalues ascending.
///
/// Each eigenvector is sign-fixed so that its largest-magnitude component
/// (lowest index on ties) is positive.
pub fn eigh(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        fix_sign(&mut v);
        vecs.set_column(col, &v);
    }
    (vals, vecs)
}

/// Index of the largest-magnitude component (lowest index on ties).
pub fn dominant_index(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    best
}

pub fn fix_sign(v: &mut DVector<f64>) {
    if v.is_empty() {
        return;
    }
    if v[dominant_index(v)] < 0.0 {
        v.neg_mut();
    }
}

/// Largest deviation of `m^T m` from the identity.
#[cfg(test)]
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

/// Square root of a symmetric positive semi-definite matrix; eigenvalues
/// below `-neg_tol` are reported as the error value.
pub fn sqrt_psd(m: &DMatrix<f64>, neg_tol: f64) -> Result<DMatrix<f64>, f64> {
    let (vals, vecs) = eigh(m);
    if let Some(&bad) = vals.iter().find(|&&v| v < -neg_tol) {
        return Err(bad);
    }
    let d = DMatrix::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    Ok(&vecs * d * vecs.transpose())
}
