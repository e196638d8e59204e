//! Hermitian eigendecomposition, the single numerical primitive behind
//! entropies, trace distances and PSD checks.
//!
//! Exactly-zero rows/columns are compressed away before the solve: they
//! carry eigenvalue 0 with basis eigenvectors, and feeding them to the
//! tridiagonalisation can produce NaN for some zero patterns (conditioned
//! states embedded in the full space are the common case).

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn dense_support(m: &DMatrix<Complex64>) -> Vec<usize> {
    let n = m.nrows();
    (0..n)
        .filter(|&i| (0..n).any(|j| m[(i, j)] != Complex64::ZERO || m[(j, i)] != Complex64::ZERO))
        .collect()
}

fn compress(m: &DMatrix<Complex64>, support: &[usize]) -> DMatrix<Complex64> {
    let k = support.len();
    DMatrix::from_fn(k, k, |a, b| m[(support[a], support[b])])
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvals(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let support = dense_support(m);
    let mut vals: Vec<f64> = if support.len() == n {
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect()
    } else if support.is_empty() {
        Vec::new()
    } else {
        SymmetricEigen::new(compress(m, &support))
            .eigenvalues
            .iter()
            .copied()
            .collect()
    };
    vals.resize(n, 0.0);
    debug_assert!(
        vals.iter().all(|v| v.is_finite()),
        "eigensolver produced NaN"
    );
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigenvalues (ascending) and matching eigenvectors as columns.
pub fn eigh(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let support = dense_support(m);
    // (eigenvalue, eigenvector in the full space)
    let mut pairs: Vec<(f64, nalgebra::DVector<Complex64>)> = Vec::with_capacity(n);
    if support.len() == n {
        let eig = SymmetricEigen::new(m.clone());
        for c in 0..n {
            pairs.push((eig.eigenvalues[c], eig.eigenvectors.column(c).into_owned()));
        }
    } else {
        if !support.is_empty() {
            let eig = SymmetricEigen::new(compress(m, &support));
            for c in 0..support.len() {
                let mut v = nalgebra::DVector::<Complex64>::zeros(n);
                for (a, &i) in support.iter().enumerate() {
                    v[i] = eig.eigenvectors[(a, c)];
                }
                pairs.push((eig.eigenvalues[c], v));
            }
        }
        for i in 0..n {
            if !support.contains(&i) {
                let mut v = nalgebra::DVector::<Complex64>::zeros(n);
                v[i] = Complex64::new(1.0, 0.0);
                pairs.push((0.0, v));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, (_, v)) in pairs.iter().enumerate() {
        vecs.set_column(col, v);
    }
    (vals, vecs)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn top_eigval(m: &DMatrix<Complex64>) -> f64 {
    *eigvals(m).last().expect("nonempty matrix")
}
