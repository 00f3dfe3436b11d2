//! Regularized least-squares conditional ranking (RankRLS) with the Kronecker
//! pairwise kernel, plus the unsupervised similarity-ranking baseline.
//!
//! A couple `e = (v, v')` pairs a query object `v` with a database object
//! `v'`. For each training query `v`, the result set `E_v` holds all couples
//! `(v, v')` with `v' ≠ v`; self-couples are excluded everywhere and their
//! dual coefficients are fixed at zero. Training minimizes a squared
//! surrogate of the pairwise rank loss, regularized in the pairwise-kernel
//! norm, which reduces to the linear system
//!
//! ```text
//! (L̄·K + λI)·vec(A) = L̄·vec(Y),    K = G ⊗ G
//! ```
//!
//! where `L̄` is the block-diagonal per-query Laplacian applied by
//! [`laplacian_apply`]. The system is solved as stated (not via normal
//! equations): dense LU when the couple count is small enough, otherwise a
//! matrix-free Krylov method on `X ↦ laplacian_apply(G·X·G^T) + λX`.

use ndarray::Array2;

use crate::ec::CatalyticSimilarityMatrix;
use crate::error::{Error, Result};
use crate::kernel::{kron_matvec, KernelMatrix};
use crate::solver;

/// Kernel slice over training objects together with the grade matrix
/// `Y[v][v'] = Q(v, v')` they are trained against.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    ids: Vec<String>,
    gram: Array2<f64>,
    labels: Array2<f64>,
}

impl TrainingSet {
    pub fn new(ids: Vec<String>, gram: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Data("training set is empty".into()));
        }
        if gram.dim() != (n, n) || labels.dim() != (n, n) {
            return Err(Error::Data(format!(
                "training set dimension mismatch: {} ids, kernel {:?}, labels {:?}",
                n,
                gram.dim(),
                labels.dim()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let y = labels[[i, j]];
                if !(0.0..=4.0).contains(&y) || (y - y.round()).abs() > 1e-9 {
                    return Err(Error::Data(format!(
                        "label ({i}, {j}) = {y} is not an integer grade in 0..=4"
                    )));
                }
                if labels[[i, j]] != labels[[j, i]] {
                    return Err(Error::Data(format!("label matrix asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(TrainingSet { ids, gram, labels })
    }

    /// Assemble a training set from the rows/columns `indices` of an aligned
    /// kernel and grade matrix.
    pub fn from_kernel_and_grades(
        kernel: &KernelMatrix,
        grades: &CatalyticSimilarityMatrix,
        indices: &[usize],
    ) -> Result<Self> {
        if kernel.ids() != grades.ids() {
            return Err(Error::Data(
                "kernel and grade matrices index different object sets".into(),
            ));
        }
        let sub = kernel.submatrix(indices);
        let n = indices.len();
        let labels = Array2::from_shape_fn((n, n), |(i, j)| {
            grades.grade(indices[i], indices[j]) as f64
        });
        TrainingSet::new(sub.ids().to_vec(), sub.values().clone(), labels)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn labels(&self) -> &Array2<f64> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Direct,
    Iterative,
    /// Direct when the couple count is at most `direct_threshold`, else iterative.
    Auto,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub mode: SolverMode,
    /// Relative residual target for the iterative solver.
    pub cg_tol: f64,
    /// Operator-application budget for the iterative solver.
    pub max_iters: usize,
    /// Largest couple count (n²) the auto mode hands to the dense LU path.
    pub direct_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: SolverMode::Auto,
            cg_tol: 1e-6,
            max_iters: 5000,
            direct_threshold: 4000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol.is_finite()) {
            return Err(Error::Config(format!(
                "cg_tol must be positive and finite, got {}",
                self.cg_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trained dual model: coefficient matrix `A` over training couples, indexed
/// `(query, result)`, plus the metadata needed to serialize and apply it.
#[derive(Debug, Clone)]
pub struct RankModel {
    coefficients: Array2<f64>,
    train_ids: Vec<String>,
    lambda: f64,
    residual: f64,
    solver_mode: &'static str,
}

impl RankModel {
    pub(crate) fn from_parts(
        coefficients: Array2<f64>,
        train_ids: Vec<String>,
        lambda: f64,
        residual: f64,
        solver_mode: &'static str,
    ) -> Self {
        RankModel {
            coefficients,
            train_ids,
            lambda,
            residual,
            solver_mode,
        }
    }

    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn train_ids(&self) -> &[String] {
        &self.train_ids
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn solver_mode(&self) -> &'static str {
        self.solver_mode
    }
}

/// Apply the per-query pairwise-difference Laplacian.
///
/// For each query row `v` over its result set `E_v = {(v, v') : v' ≠ v}`:
/// `out[v][v'] = (n-1)·M[v][v'] − Σ_{v''≠v} M[v][v'']`, and `out[v][v] = 0`.
/// Diagonal entries of the input are ignored.
pub fn laplacian_apply(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "laplacian_apply requires a square matrix");
    let mut out = Array2::zeros((n, n));
    for v in 0..n {
        let mut row_sum = 0.0;
        for vpp in 0..n {
            if vpp != v {
                row_sum += m[[v, vpp]];
            }
        }
        let scale = (n - 1) as f64;
        for vp in 0..n {
            if vp != v {
                out[[v, vp]] = scale * m[[v, vp]] - row_sum;
            }
        }
    }
    out
}

/// Pairwise squared rank loss: the double sum over ordered couple pairs
/// within each query's result set,
/// `Σ_v Σ_{e,ē ∈ E_v} (Y_e − Y_ē − H_e + H_ē)²`. Diagonals are ignored.
pub fn rank_loss(h: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if h.dim() != y.dim() || h.nrows() != h.ncols() {
        return Err(Error::Data(format!(
            "rank_loss shape mismatch: predictions {:?}, labels {:?}",
            h.dim(),
            y.dim()
        )));
    }
    let n = h.nrows();
    if n < 2 {
        return Ok(0.0);
    }
    let m = (n - 1) as f64;
    let mut total = 0.0;
    for v in 0..n {
        // For d_e = Y_e − H_e over E_v: Σ_{e,ē}(d_e − d_ē)² = 2m·Σd² − 2(Σd)².
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for vp in 0..n {
            if vp != v {
                let d = y[[v, vp]] - h[[v, vp]];
                sum += d;
                sum_sq += d * d;
            }
        }
        total += 2.0 * m * sum_sq - 2.0 * sum * sum;
    }
    // Guard against tiny negative rounding residue.
    Ok(total.max(0.0))
}

/// Train the ranking model at regularization `lambda`.
pub fn train(ts: &TrainingSet, lambda: f64, opts: &SolverOptions) -> Result<RankModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "regularization parameter must be positive and finite, got {lambda}"
        )));
    }
    opts.validate()?;
    let n = ts.len();
    let rhs = laplacian_apply(&ts.labels);

    let couple_count = n * n;
    let direct = match opts.mode {
        SolverMode::Direct => true,
        SolverMode::Iterative => false,
        SolverMode::Auto => couple_count <= opts.direct_threshold,
    };

    let outcome = if direct {
        solver::solve_direct(&ts.gram, &rhs, lambda)?
    } else {
        solver::solve_iterative(&ts.gram, &rhs, lambda, opts.cg_tol, opts.max_iters)?
    };

    Ok(RankModel::from_parts(
        outcome.coefficients,
        ts.ids.clone(),
        lambda,
        outcome.residual,
        if direct { "direct" } else { "iterative" },
    ))
}

/// Score couples for `m` queries against `p` database objects:
/// `H = G_query · A · G_db^T`, i.e. the dual expansion
/// `h(v, v') = Σ_{ū,ū'} A[ū][ū']·G(v, ū)·G(v', ū')`.
///
/// Both slices are kernel evaluations against the model's training objects
/// (columns in training order).
pub fn predict(
    model: &RankModel,
    g_query: &Array2<f64>,
    g_db: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = model.train_ids.len();
    if g_query.ncols() != n || g_db.ncols() != n {
        return Err(Error::Data(format!(
            "predict expects kernel slices with {n} columns, got {} and {}",
            g_query.ncols(),
            g_db.ncols()
        )));
    }
    Ok(g_query.dot(&model.coefficients).dot(&g_db.t()))
}

/// Average a square score matrix with its transpose. Applied when the query
/// and database sets coincide, because the target relation is symmetric.
pub fn symmetrize_predictions(h: &Array2<f64>) -> Result<Array2<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::Data(format!(
            "symmetrize_predictions requires a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(crate::linalg::make_symmetric(h))
}

/// Unsupervised baseline: score every other object by its kernel value with
/// the query. Sorting the result descending realizes similarity ranking.
pub fn unsupervised_scores(k: &KernelMatrix, query_id: &str) -> Result<Vec<(String, f64)>> {
    let qi = k
        .index_of(query_id)
        .ok_or_else(|| Error::Data(format!("unknown query id {query_id:?}")))?;
    let values = k.values();
    Ok(k.ids()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != qi)
        .map(|(i, id)| (id.clone(), values[[qi, i]]))
        .collect())
}

/// Objective whose stationary point the trainer's linear system encodes:
/// `J(A) = ½·rank_loss(G·A·G^T, Y) + λ·⟨vec(A), (G⊗G)·vec(A)⟩`.
///
/// Used by optimality and gradient tests; exposed for diagnostics.
pub fn objective(ts: &TrainingSet, a: &Array2<f64>, lambda: f64) -> Result<f64> {
    let h = kron_matvec(&ts.gram, a)?;
    let loss = rank_loss(&h, &ts.labels)?;
    let reg = crate::linalg::frob_dot(a, &kron_matvec(&ts.gram, a)?);
    Ok(0.5 * loss + lambda * reg)
}
