//! Dense linear-algebra helpers: symmetric eigendecomposition and LU solves
//! (backed by nalgebra), plus small Frobenius-space utilities used by the
//! solver. Matrices elsewhere in the crate are `ndarray::Array2<f64>` in
//! standard (row-major) layout.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub(crate) struct SymEig {
    /// Eigenvalues, unsorted (as returned by the QL iteration).
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors; column `k` pairs with `values[k]`.
    pub vectors: Array2<f64>,
}

pub(crate) fn sym_eig(m: &Array2<f64>) -> Result<SymEig> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Data(format!(
            "eigendecomposition requires a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "eigendecomposition input contains non-finite entries".into(),
        ));
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(dm, f64::EPSILON, 0)
        .ok_or_else(|| Error::Solver("symmetric eigendecomposition did not converge".into()))?;
    let values = Array1::from_iter(eig.eigenvalues.iter().copied());
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
    Ok(SymEig { values, vectors })
}

/// Solve `a x = b` by dense LU with partial pivoting. `a` is consumed.
pub(crate) fn lu_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::Solver("LU solve failed: system is singular".into()))
}

/// Frobenius inner product of two equal-shape matrices.
pub(crate) fn frob_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn frob_norm(a: &Array2<f64>) -> f64 {
    frob_dot(a, a).sqrt()
}

/// Exact symmetrization: `(m + m^T) / 2`. The result is bitwise symmetric
/// because floating-point addition is commutative.
pub(crate) fn make_symmetric(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| (m[[i, j]] + m[[j, i]]) / 2.0)
}
