//! Linear solvers for the training system `(L̄·K + λI)·vec(A) = L̄·vec(Y)`.
//!
//! Direct mode materializes the full `n²×n²` system from closed-form entries
//! and runs dense LU; it shares no operator code with the iterative path, so
//! the two act as cross-checks. Iterative mode is restarted GMRES on the
//! matrix-free operator `X ↦ laplacian_apply(G·X·G^T) + λX`, right-
//! preconditioned with the exactly invertible surrogate `(n−1)·(G⊗G) + λI`
//! applied in the eigenbasis of `G`. The surrogate differs from the true
//! operator by a rank-n term, so the preconditioned iteration terminates in
//! at most ~n+1 steps. Right preconditioning keeps the GMRES residual equal
//! to the residual of the original system; the reported value is always
//! recomputed from scratch.
//!
//! Everything is deterministic: zero initial guess, fixed restart length,
//! fixed reduction orders.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernel::kron_matvec;
use crate::linalg::{self, frob_dot, frob_norm};
use crate::ranker::laplacian_apply;

#[derive(Debug)]
pub(crate) struct SolveOutcome {
    pub coefficients: Array2<f64>,
    pub residual: f64,
    #[allow(dead_code)]
    pub iterations: usize,
}

/// Column-stacking index of matrix entry (row i, col j).
#[inline]
fn vec_index(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

pub(crate) fn solve_direct(
    g: &Array2<f64>,
    rhs: &Array2<f64>,
    lambda: f64,
) -> Result<SolveOutcome> {
    let n = g.nrows();
    let nn = n * n;

    let col_sums: Vec<f64> = (0..n).map(|j| (0..n).map(|i| g[[i, j]]).sum()).collect();

    // (L̄K)[(v,v'),(u,u')] = G[v,u]·((n−1)·G[v',u'] − (colsum[u'] − G[v,u'])),
    // rows of self-couples are zero apart from the λ shift.
    let mut system = DMatrix::<f64>::zeros(nn, nn);
    let scale = (n - 1) as f64;
    for v in 0..n {
        for vp in 0..n {
            let r = vec_index(n, v, vp);
            if v == vp {
                system[(r, r)] = lambda;
                continue;
            }
            for u in 0..n {
                for up in 0..n {
                    let c = vec_index(n, u, up);
                    let mut val = g[[v, u]] * (scale * g[[vp, up]] - (col_sums[up] - g[[v, up]]));
                    if r == c {
                        val += lambda;
                    }
                    system[(r, c)] = val;
                }
            }
        }
    }

    let mut b = DVector::<f64>::zeros(nn);
    for v in 0..n {
        for vp in 0..n {
            b[vec_index(n, v, vp)] = rhs[[v, vp]];
        }
    }

    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(SolveOutcome {
            coefficients: Array2::zeros((n, n)),
            residual: 0.0,
            iterations: 0,
        });
    }

    let solution = linalg::lu_solve(system.clone(), b.clone())?;
    let residual = (&system * &solution - &b).norm() / b_norm;
    let coefficients =
        Array2::from_shape_fn((n, n), |(i, j)| solution[vec_index(n, i, j)]);
    Ok(SolveOutcome {
        coefficients,
        residual,
        iterations: 0,
    })
}

/// Right preconditioner `((n−1)·(G⊗G) + λI)^{-1}`, applied in the eigenbasis
/// of `G`; eigenvalues are clamped at zero so the denominators stay ≥ λ.
/// Output diagonals are zeroed to keep iterates in the masked couple space.
struct EigenbasisShiftInverse {
    vectors: Array2<f64>,
    inv_denom: Array2<f64>,
}

impl EigenbasisShiftInverse {
    fn build(g: &Array2<f64>, lambda: f64) -> Result<Self> {
        let n = g.nrows();
        let eig = linalg::sym_eig(g)?;
        let clamped: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
        let scale = (n - 1) as f64;
        let inv_denom = Array2::from_shape_fn((n, n), |(i, j)| {
            1.0 / (scale * clamped[i] * clamped[j] + lambda)
        });
        Ok(EigenbasisShiftInverse {
            vectors: eig.vectors,
            inv_denom,
        })
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let u = &self.vectors;
        let mut xt = u.t().dot(x).dot(u);
        xt *= &self.inv_denom;
        let mut y = u.dot(&xt).dot(&u.t());
        for i in 0..y.nrows() {
            y[[i, i]] = 0.0;
        }
        y
    }
}

const GMRES_RESTART: usize = 350;

pub(crate) fn solve_iterative(
    g: &Array2<f64>,
    rhs: &Array2<f64>,
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<SolveOutcome> {
    let n = g.nrows();
    let b_norm = frob_norm(rhs);
    if b_norm == 0.0 {
        return Ok(SolveOutcome {
            coefficients: Array2::zeros((n, n)),
            residual: 0.0,
            iterations: 0,
        });
    }

    let apply_op = |x: &Array2<f64>| -> Array2<f64> {
        let kx = kron_matvec(g, x).expect("conforming shapes");
        laplacian_apply(&kx) + &(x * lambda)
    };
    let prec = EigenbasisShiftInverse::build(g, lambda)?;

    let restart = GMRES_RESTART.min(n * n).min(max_iters);
    let mut x = Array2::<f64>::zeros((n, n));
    let mut applications = 0usize;
    let residual;

    'cycles: loop {
        let r = rhs - &apply_op(&x);
        applications += 1;
        let relres = frob_norm(&r) / b_norm;
        if relres <= tol {
            residual = relres;
            break 'cycles;
        }
        if applications >= max_iters {
            return Err(Error::NonConvergence {
                residual: relres,
                iterations: applications,
            });
        }
        let beta = frob_norm(&r);
        let mut basis: Vec<Array2<f64>> = vec![&r / beta];
        // Hessenberg columns after Givens, factored rotations, residual vector.
        let mut h_cols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut gvec: Vec<f64> = vec![beta];
        let mut steps = 0usize;

        for k in 0..restart {
            if applications >= max_iters {
                break;
            }
            let mut w = apply_op(&prec.apply(&basis[k]));
            applications += 1;

            // Modified Gram-Schmidt.
            let mut col = Vec::with_capacity(k + 2);
            for basis_vec in basis.iter().take(k + 1) {
                let hik = frob_dot(&w, basis_vec);
                w = w - &(basis_vec * hik);
                col.push(hik);
            }
            let h_next = frob_norm(&w);
            col.push(h_next);

            // Apply accumulated rotations, then a new one to annihilate h_next.
            for i in 0..k {
                let tmp = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = tmp;
            }
            let denom = (col[k] * col[k] + h_next * h_next).sqrt();
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[k] / denom, h_next / denom) };
            cs.push(c);
            sn.push(s);
            col[k] = c * col[k] + s * h_next;
            col[k + 1] = 0.0;
            gvec.push(-s * gvec[k]);
            gvec[k] *= c;
            h_cols.push(col);
            steps = k + 1;

            let est = gvec[k + 1].abs() / b_norm;
            let breakdown = h_next <= 1e-14 * beta;
            if breakdown {
                break;
            }
            basis.push(&w / h_next);
            if est <= tol {
                break;
            }
        }

        // Back-substitute the triangular system and expand the correction.
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut sum = gvec[i];
            for (j, yj) in y.iter().enumerate().take(steps).skip(i + 1) {
                sum -= h_cols[j][i] * yj;
            }
            y[i] = sum / h_cols[i][i];
        }
        let mut update = Array2::<f64>::zeros((n, n));
        for (i, yi) in y.iter().enumerate() {
            update = update + &(&basis[i] * *yi);
        }
        x = x + &prec.apply(&update);
    }

    Ok(SolveOutcome {
        coefficients: x,
        residual,
        iterations: applications,
    })
}
