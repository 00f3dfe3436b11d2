//! Similarity-to-kernel sanitization and the Kronecker pairwise-kernel
//! operator.
//!
//! Raw pairwise similarity matrices are generally neither symmetric nor
//! positive semidefinite. [`sanitize`] turns them into valid kernels in three
//! steps: averaging with the transpose, clipping negative eigenvalues at a
//! threshold (default `1e-10`), and rescaling to a unit diagonal. The whole
//! matrix is sanitized at once, before any train/test split (a transductive
//! preprocessing step; labels play no part in it).
//!
//! Throughout the crate, matrices are vectorized by **column stacking**:
//! `vec(X)[j*n + i] = X[i][j]`. Under that convention the pairwise Kronecker
//! kernel applies as `(G ⊗ G)·vec(X) = vec(G·X·G^T)`, which [`kron_matvec`]
//! computes without materializing the `n²×n²` product.

use std::collections::HashSet;

use ndarray::{arr2, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// Eigenvalue clipping threshold used by [`sanitize`].
pub const DEFAULT_CLIP_TOL: f64 = 1e-10;

/// Smallest post-projection self-similarity that can be normalized. Objects
/// whose diagonal entry collapses below this are reported as errors instead
/// of being dropped, so ids never silently desynchronize from label files.
pub const DIAG_FLOOR: f64 = 1e-12;

/// Tolerances defining a valid [`KernelMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MIN_EIGENVALUE: f64 = -1e-8;
pub const DIAG_TOL: f64 = 1e-12;

fn check_ids(ids: &[String], n: usize) -> Result<()> {
    if ids.len() != n {
        return Err(Error::Data(format!(
            "id list has {} entries but matrix is {n}x{n}",
            ids.len()
        )));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Data(format!("duplicate object id {id:?}")));
        }
    }
    Ok(())
}

/// A raw pairwise similarity matrix over an indexed object set.
///
/// Entries must be finite and the matrix square; no symmetry or definiteness
/// is assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    ids: Vec<String>,
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::Data(format!(
                "similarity matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        check_ids(&ids, n)?;
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!(
                "similarity matrix entry ({i}, {j}) is not finite: {v}"
            )));
        }
        Ok(SimilarityMatrix { ids, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }
}

/// A sanitized kernel matrix: symmetric (max asymmetry ≤ `1e-12`),
/// numerically PSD (min eigenvalue ≥ `-1e-8`), unit diagonal (± `1e-12`).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    ids: Vec<String>,
    values: Array2<f64>,
}

impl KernelMatrix {
    /// Wrap an existing matrix, checking symmetry and the unit diagonal.
    /// The spectral bound is only verified by [`KernelMatrix::validate`],
    /// which costs an eigendecomposition.
    pub fn new(ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::Data(format!(
                "kernel matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        check_ids(&ids, n)?;
        let k = KernelMatrix { ids, values };
        k.check_symmetry_and_diagonal()?;
        Ok(k)
    }

    fn check_symmetry_and_diagonal(&self) -> Result<()> {
        let v = &self.values;
        for i in 0..v.nrows() {
            if (v[[i, i]] - 1.0).abs() > DIAG_TOL {
                return Err(Error::Data(format!(
                    "kernel diagonal entry for {:?} is {} (expected 1)",
                    self.ids[i],
                    v[[i, i]]
                )));
            }
            for j in (i + 1)..v.ncols() {
                if (v[[i, j]] - v[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::Data(format!(
                        "kernel asymmetry at ({i}, {j}): {} vs {}",
                        v[[i, j]],
                        v[[j, i]]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Full invariant check including the spectral bound.
    pub fn validate(&self) -> Result<()> {
        self.check_symmetry_and_diagonal()?;
        let eig = linalg::sym_eig(&self.values)?;
        let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < MIN_EIGENVALUE {
            return Err(Error::Data(format!(
                "kernel matrix has eigenvalue {min:.3e} below {MIN_EIGENVALUE:.0e}"
            )));
        }
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Principal submatrix over `indices` (a kernel again: principal
    /// submatrices preserve symmetry, PSD-ness and the unit diagonal).
    pub fn submatrix(&self, indices: &[usize]) -> KernelMatrix {
        let values = self
            .values
            .select(Axis(0), indices)
            .select(Axis(1), indices);
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        KernelMatrix { ids, values }
    }

    /// Rectangular slice `values[rows, cols]`.
    pub fn slice(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        self.values.select(Axis(0), rows).select(Axis(1), cols)
    }

    pub fn into_similarity(self) -> SimilarityMatrix {
        SimilarityMatrix {
            ids: self.ids,
            values: self.values,
        }
    }
}

/// Average a similarity matrix with its transpose.
pub fn symmetrize(s: &SimilarityMatrix) -> SimilarityMatrix {
    SimilarityMatrix {
        ids: s.ids.clone(),
        values: linalg::make_symmetric(&s.values),
    }
}

/// Project a symmetric matrix onto the PSD cone by eigenvalue clipping:
/// eigendecompose, zero every eigenvalue below `tol`, reconstruct in the
/// unchanged eigenbasis.
pub fn psd_project(sym: &Array2<f64>, tol: f64) -> Result<Array2<f64>> {
    let eig = linalg::sym_eig(sym)?;
    let clipped = eig.values.mapv(|v| if v < tol { 0.0 } else { v });
    let scaled = &eig.vectors * &clipped; // scales column k by clipped[k]
    let recon = scaled.dot(&eig.vectors.t());
    // Re-symmetrize: gemm rounding can leave ~1e-16 asymmetry.
    Ok(linalg::make_symmetric(&recon))
}

/// Rescale a PSD matrix to unit diagonal: `G[i][j] = S[i][j] / sqrt(S[i][i]·S[j][j])`.
pub fn normalize_diagonal(ids: &[String], psd: &Array2<f64>) -> Result<KernelMatrix> {
    let n = psd.nrows();
    check_ids(ids, n)?;
    let mut roots = Vec::with_capacity(n);
    for i in 0..n {
        let d = psd[[i, i]];
        if d <= DIAG_FLOOR {
            return Err(Error::Data(format!(
                "cannot normalize: self-similarity of {:?} is {d:.3e} (<= {DIAG_FLOOR:.0e})",
                ids[i]
            )));
        }
        roots.push(d.sqrt());
    }
    let values = Array2::from_shape_fn((n, n), |(i, j)| psd[[i, j]] / (roots[i] * roots[j]));
    Ok(KernelMatrix {
        ids: ids.to_vec(),
        values,
    })
}

/// Full sanitization pipeline: symmetrize, PSD-project with threshold `tol`,
/// normalize the diagonal. Idempotent up to `1e-9` (relative Frobenius).
pub fn sanitize(s: &SimilarityMatrix, tol: f64) -> Result<KernelMatrix> {
    let sym = symmetrize(s);
    let psd = psd_project(&sym.values, tol)?;
    normalize_diagonal(&sym.ids, &psd)
}

/// Apply the Kronecker pairwise kernel to a coefficient matrix without
/// materializing it: `(G ⊗ G)·vec(X)` computed as `G·X·G^T` under the
/// column-stacking convention.
pub fn kron_matvec(g: &Array2<f64>, x: &Array2<f64>) -> Result<Array2<f64>> {
    let n = g.nrows();
    if g.ncols() != n || x.nrows() != n || x.ncols() != n {
        return Err(Error::Data(format!(
            "kron_matvec shape mismatch: G is {}x{}, X is {}x{}",
            g.nrows(),
            g.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(g.dot(x).dot(&g.t()))
}

/// `2x2` reference kernel used in doctests and unit tests.
#[doc(hidden)]
pub fn demo_kernel() -> Array2<f64> {
    arr2(&[[1.0, 0.5], [0.5, 1.0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array1};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("o{i}")).collect()
    }

    fn random_square(n: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0))
    }

    fn min_eigenvalue(m: &Array2<f64>) -> f64 {
        let eig = crate::linalg::sym_eig(m).unwrap();
        eig.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn symmetrize_forced_example() {
        let s = SimilarityMatrix::new(
            ids(2),
            arr2(&[[0.0, 2.0], [0.0, 0.0]]),
        )
        .unwrap();
        let sym = symmetrize(&s);
        assert_eq!(sym.values(), &arr2(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn symmetrize_leaves_symmetric_unchanged_and_output_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let raw = random_square(50, &mut rng);
        let s = SimilarityMatrix::new(ids(50), raw).unwrap();
        let sym = symmetrize(&s);
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(sym.values()[[i, j]], sym.values()[[j, i]]);
            }
        }
        let again = symmetrize(&sym);
        assert_eq!(again.values(), sym.values());
    }

    #[test]
    fn psd_project_analytic_two_by_two() {
        // diag(1, -1) has eigenpairs (1, e1), (-1, e2); clipping the negative
        // one reconstructs [[1,0],[0,0]].
        let m = arr2(&[[1.0, 0.0], [0.0, -1.0]]);
        let p = psd_project(&m, DEFAULT_CLIP_TOL).unwrap();
        let want = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        for (a, b) in p.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_project_keeps_psd_input() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let a = random_square(20, &mut rng);
        let psd = a.dot(&a.t());
        let p = psd_project(&psd, DEFAULT_CLIP_TOL).unwrap();
        let num = crate::linalg::frob_norm(&(&p - &psd));
        let den = crate::linalg::frob_norm(&psd);
        assert!(num / den < 1e-9, "relative change {}", num / den);
    }

    #[test]
    fn psd_project_spectrum_nonnegative() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let m = crate::linalg::make_symmetric(&random_square(100, &mut rng));
        let p = psd_project(&m, DEFAULT_CLIP_TOL).unwrap();
        assert!(min_eigenvalue(&p) >= MIN_EIGENVALUE);
    }

    #[test]
    fn normalize_identity_and_forced_example() {
        let k = normalize_diagonal(&ids(2), &arr2(&[[4.0, 2.0], [2.0, 4.0]])).unwrap();
        assert_eq!(k.values(), &arr2(&[[1.0, 0.5], [0.5, 1.0]]));
        let eye = Array2::<f64>::eye(3);
        let k = normalize_diagonal(&ids(3), &eye).unwrap();
        assert_eq!(k.values(), &eye);
    }

    #[test]
    fn normalize_satisfies_cauchy_schwarz() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let a = random_square(30, &mut rng);
        let psd = a.dot(&a.t());
        let k = normalize_diagonal(&ids(30), &psd).unwrap();
        for v in k.values().iter() {
            assert!(v.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn normalize_rejects_zero_diagonal_naming_id() {
        let mut m = Array2::eye(3);
        m[[1, 1]] = 0.0;
        let err = normalize_diagonal(&ids(3), &m).unwrap_err();
        assert!(err.to_string().contains("o1"), "{err}");
    }

    #[test]
    fn sanitize_output_invariants_hold() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let s = SimilarityMatrix::new(ids(30), random_square(30, &mut rng)).unwrap();
        let k = sanitize(&s, DEFAULT_CLIP_TOL).unwrap();
        k.validate().unwrap();
    }

    #[test]
    fn sanitize_is_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let s = SimilarityMatrix::new(ids(25), random_square(25, &mut rng)).unwrap();
        let k1 = sanitize(&s, DEFAULT_CLIP_TOL).unwrap();
        let k2 = sanitize(&k1.clone().into_similarity(), DEFAULT_CLIP_TOL).unwrap();
        let num = crate::linalg::frob_norm(&(k2.values() - k1.values()));
        let den = crate::linalg::frob_norm(k1.values());
        assert!(num / den < 1e-9, "relative drift {}", num / den);
    }

    #[test]
    fn sanitize_propagates_zero_row_error() {
        let mut m = Array2::zeros((3, 3));
        m[[0, 0]] = 1.0;
        m[[1, 1]] = 1.0;
        // row/column 2 entirely zero -> zero diagonal after projection
        let s = SimilarityMatrix::new(ids(3), m).unwrap();
        let err = sanitize(&s, DEFAULT_CLIP_TOL).unwrap_err();
        assert!(err.to_string().contains("o2"), "{err}");
    }

    #[test]
    fn kron_matvec_identity_and_forced_example() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let eye = Array2::eye(2);
        assert_eq!(kron_matvec(&eye, &x).unwrap(), x);

        let g = demo_kernel();
        let x = arr2(&[[1.0, 0.0], [0.0, 0.0]]);
        let h = kron_matvec(&g, &x).unwrap();
        let want = arr2(&[[1.0, 0.5], [0.5, 0.25]]);
        for (a, b) in h.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_matvec_shape_mismatch() {
        let g = Array2::eye(3);
        let x = Array2::eye(2);
        assert!(kron_matvec(&g, &x).is_err());
    }

    /// Explicit n²×n² Kronecker oracle under column stacking:
    /// `(A ⊗ B)[(j·n+i), (l·n+k)] = A[j][l]·B[i][k]`.
    fn explicit_kron_apply(g: &Array2<f64>, x: &Array2<f64>) -> Array2<f64> {
        let n = g.nrows();
        let vec_of = |m: &Array2<f64>| {
            let mut v = Array1::zeros(n * n);
            for j in 0..n {
                for i in 0..n {
                    v[j * n + i] = m[[i, j]];
                }
            }
            v
        };
        let xv = vec_of(x);
        let mut big = Array2::zeros((n * n, n * n));
        for j in 0..n {
            for i in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        big[[j * n + i, l * n + k]] = g[[j, l]] * g[[i, k]];
                    }
                }
            }
        }
        let yv = big.dot(&xv);
        Array2::from_shape_fn((n, n), |(i, j)| yv[j * n + i])
    }

    #[test]
    fn kron_matvec_matches_explicit_kronecker() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for n in [2usize, 3, 5] {
            let g = crate::linalg::make_symmetric(&random_square(n, &mut rng));
            let x = random_square(n, &mut rng);
            let fast = kron_matvec(&g, &x).unwrap();
            let slow = explicit_kron_apply(&g, &x);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kron_matvec_is_linear_and_invertible() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let n = 6;
        // Well-conditioned G: identity plus a small symmetric perturbation.
        let g = &Array2::eye(n) + &(crate::linalg::make_symmetric(&random_square(n, &mut rng)) * 0.1);
        let x = random_square(n, &mut rng);
        let y = random_square(n, &mut rng);

        let lhs = kron_matvec(&g, &(&x * 2.0 + &y)).unwrap();
        let rhs = &(kron_matvec(&g, &x).unwrap() * 2.0) + &kron_matvec(&g, &y).unwrap();
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-10);
        }

        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| g[[i, j]]);
        let inv = dm.try_inverse().unwrap();
        let ginv = Array2::from_shape_fn((n, n), |(i, j)| inv[(i, j)]);
        let back = kron_matvec(&g, &kron_matvec(&ginv, &x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn similarity_matrix_rejects_bad_input() {
        assert!(SimilarityMatrix::new(ids(2), Array2::zeros((2, 3))).is_err());
        let mut m = Array2::zeros((2, 2));
        m[[0, 1]] = f64::NAN;
        assert!(SimilarityMatrix::new(ids(2), m).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(SimilarityMatrix::new(dup, Array2::zeros((2, 2))).is_err());
    }
}
