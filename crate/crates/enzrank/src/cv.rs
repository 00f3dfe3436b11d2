//! Nested cross-validation experiment protocol.
//!
//! The object set is shuffled once with a seeded generator and split into
//! near-equal outer folds (default 4). Unsupervised evaluation ranks, within
//! each fold, every member against the rest of that fold. Supervised
//! evaluation holds each fold out as a test set: an inner cross-validation
//! (default 10-fold) over the remaining objects picks the regularization
//! parameter per inner fold by mean validation ranking accuracy, the final
//! per-fold λ is the lower median of those picks, the model is retrained on
//! the whole outer-train set, and the held-out fold is scored test-vs-test
//! with symmetrized predictions. No test id ever reaches training.
//!
//! Inner folds and grid points are evaluated in parallel; results are
//! reduced in fixed (fold, λ) order, so reports do not depend on the worker
//! count. Kernel sanitization happens once on the full matrix beforehand
//! (see [`crate::kernel`]); callers record that in the run manifest.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ec::CatalyticSimilarityMatrix;
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::metrics::{
    aggregate, auc_bipartite, average_precision, ndcg, ranking_accuracy, roc_curve, QueryEval,
};
use crate::ranker::{
    predict, symmetrize_predictions, train, RankModel, SolverOptions, TrainingSet,
};
use crate::report::{EvalReport, MetricSummary};

/// Protocol parameters for one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub lambda_grid: Vec<f64>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub relevance_threshold: u8,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lambda_grid: default_lambda_grid(),
            outer_folds: 4,
            inner_folds: 10,
            relevance_threshold: 3,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Powers of 10 from 1e-4 to 1e5.
pub fn default_lambda_grid() -> Vec<f64> {
    (-4..=5).map(|e| 10f64.powi(e)).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_folds < 2 {
            return Err(Error::Config(format!(
                "outer_folds must be at least 2, got {}",
                self.outer_folds
            )));
        }
        if self.inner_folds < 2 {
            return Err(Error::Config(format!(
                "inner_folds must be at least 2, got {}",
                self.inner_folds
            )));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("lambda grid entries must be positive and finite".into()));
        }
        if self.relevance_threshold == 0 || self.relevance_threshold > 4 {
            return Err(Error::Config(format!(
                "relevance threshold must be in 1..=4, got {}",
                self.relevance_threshold
            )));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerFold {
    pub tune_train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuterFold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub inner: Vec<InnerFold>,
}

/// Index-based fold assignment over an object list (indices refer to
/// positions in the id slice handed to [`make_folds`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub outer: Vec<OuterFold>,
}

fn split_chunks(mut shuffled: Vec<usize>, folds: usize) -> Vec<Vec<usize>> {
    let n = shuffled.len();
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut rest = shuffled.split_off(0);
    for f in 0..folds {
        let take = base + usize::from(f < extra);
        let tail = rest.split_off(take);
        let mut chunk = rest;
        chunk.sort_unstable();
        out.push(chunk);
        rest = tail;
    }
    out
}

/// Deterministic fold plan: outer folds partition the id set into near-equal
/// parts (sizes differ by at most one); inner folds partition each outer
/// train set the same way. Fixed seed ⇒ fixed plan.
pub fn make_folds(n: usize, cfg: &ExperimentConfig) -> Result<FoldPlan> {
    cfg.validate()?;
    if n < cfg.outer_folds * 2 {
        return Err(Error::Data(format!(
            "need at least {} objects for {} outer folds, got {n}",
            cfg.outer_folds * 2,
            cfg.outer_folds
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let test_sets = split_chunks(indices, cfg.outer_folds);

    let mut outer = Vec::with_capacity(cfg.outer_folds);
    for f in 0..cfg.outer_folds {
        let test = test_sets[f].clone();
        let mut train: Vec<usize> = test_sets
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, chunk)| chunk.iter().copied())
            .collect();
        train.sort_unstable();
        if train.len() < cfg.inner_folds {
            return Err(Error::Data(format!(
                "outer fold {f} has {} training objects, fewer than {} inner folds",
                train.len(),
                cfg.inner_folds
            )));
        }
        let mut inner_pool = train.clone();
        inner_pool.shuffle(&mut rng);
        let validation_sets = split_chunks(inner_pool, cfg.inner_folds);
        let inner = validation_sets
            .iter()
            .map(|validation| {
                let tune_train: Vec<usize> = train
                    .iter()
                    .copied()
                    .filter(|i| !validation.contains(i))
                    .collect();
                InnerFold {
                    tune_train,
                    validation: validation.clone(),
                }
            })
            .collect();
        outer.push(OuterFold { train, test, inner });
    }
    Ok(FoldPlan { outer })
}

fn check_alignment(kernel: &KernelMatrix, grades: &CatalyticSimilarityMatrix) -> Result<()> {
    if kernel.ids() != grades.ids() {
        return Err(Error::Data(
            "kernel and label matrices index different object sets (ids must match in order)"
                .into(),
        ));
    }
    Ok(())
}

/// Per-query evaluations for a members-vs-members score matrix: row `qi` of
/// `scores` holds the query's scores against `members` (self column dropped).
fn member_query_evals(
    members: &[usize],
    scores: &ndarray::Array2<f64>,
    grades: &CatalyticSimilarityMatrix,
) -> Result<Vec<QueryEval>> {
    let mut out = Vec::with_capacity(members.len());
    for (qi, &q) in members.iter().enumerate() {
        let mut s = Vec::with_capacity(members.len() - 1);
        let mut g = Vec::with_capacity(members.len() - 1);
        for (di, &dbid) in members.iter().enumerate() {
            if di == qi {
                continue;
            }
            s.push(scores[[qi, di]]);
            g.push(grades.grade(q, dbid));
        }
        out.push(QueryEval::new(grades.ids()[q].clone(), s, g)?);
    }
    Ok(out)
}

struct MetricAccumulator {
    ra: Vec<f64>,
    ra_skipped: usize,
    auc: Vec<f64>,
    auc_skipped: usize,
    map: Vec<f64>,
    map_skipped: usize,
    ndcg: Vec<f64>,
    ndcg_skipped: usize,
    queries: Vec<QueryEval>,
}

impl MetricAccumulator {
    fn new() -> Self {
        MetricAccumulator {
            ra: Vec::new(),
            ra_skipped: 0,
            auc: Vec::new(),
            auc_skipped: 0,
            map: Vec::new(),
            map_skipped: 0,
            ndcg: Vec::new(),
            ndcg_skipped: 0,
            queries: Vec::new(),
        }
    }

    fn push(&mut self, q: QueryEval, threshold: u8) {
        match ranking_accuracy(&q) {
            Some(v) => self.ra.push(v),
            None => self.ra_skipped += 1,
        }
        match auc_bipartite(&q, threshold) {
            Some(v) => self.auc.push(v),
            None => self.auc_skipped += 1,
        }
        match average_precision(&q, threshold) {
            Some(v) => self.map.push(v),
            None => self.map_skipped += 1,
        }
        match ndcg(&q) {
            Some(v) => self.ndcg.push(v),
            None => self.ndcg_skipped += 1,
        }
        self.queries.push(q);
    }

    fn into_report(
        self,
        method: &str,
        threshold: u8,
        chosen_lambdas: Option<Vec<f64>>,
    ) -> Result<EvalReport> {
        let summary = |values: Vec<f64>, skipped: usize| -> Result<MetricSummary> {
            if values.is_empty() {
                // Every query degenerate for this metric: report an empty
                // summary rather than failing the run.
                return Ok(MetricSummary {
                    per_query: values,
                    mean: f64::NAN,
                    std: f64::NAN,
                    skipped,
                });
            }
            let (mean, std) = aggregate(&values)?;
            Ok(MetricSummary {
                per_query: values,
                mean,
                std,
                skipped,
            })
        };
        let roc = roc_curve(&self.queries, threshold).ok();
        Ok(EvalReport {
            method: method.to_string(),
            num_queries: self.queries.len(),
            ra: summary(self.ra, self.ra_skipped)?,
            auc: summary(self.auc, self.auc_skipped)?,
            map: summary(self.map, self.map_skipped)?,
            ndcg: summary(self.ndcg, self.ndcg_skipped)?,
            roc,
            chosen_lambdas,
        })
    }
}

/// Unsupervised protocol: within each outer-fold subset, rank every member
/// against the remaining members by raw kernel value and evaluate.
pub fn run_unsupervised(
    kernel: &KernelMatrix,
    grades: &CatalyticSimilarityMatrix,
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    check_alignment(kernel, grades)?;
    let plan = make_folds(kernel.dim(), cfg)?;
    let mut acc = MetricAccumulator::new();
    for fold in &plan.outer {
        let scores = kernel.slice(&fold.test, &fold.test);
        for q in member_query_evals(&fold.test, &scores, grades)? {
            acc.push(q, cfg.relevance_threshold);
        }
    }
    acc.into_report("unsupervised", cfg.relevance_threshold, None)
}

/// Mean validation ranking accuracy of one (inner fold, λ) cell; NaN when
/// every validation query was degenerate.
fn inner_validation_ra(
    kernel: &KernelMatrix,
    grades: &CatalyticSimilarityMatrix,
    inner: &InnerFold,
    lambda: f64,
    solver: &SolverOptions,
) -> Result<f64> {
    let ts = TrainingSet::from_kernel_and_grades(kernel, grades, &inner.tune_train)?;
    let model = train(&ts, lambda, solver)?;
    let g_val = kernel.slice(&inner.validation, &inner.tune_train);
    let h = predict(&model, &g_val, &g_val)?;
    let h = symmetrize_predictions(&h)?;
    let mut values = Vec::new();
    for q in member_query_evals(&inner.validation, &h, grades)? {
        if let Some(v) = ranking_accuracy(&q) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Ok(f64::NAN);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Inner-CV selection for one outer fold: per inner fold the λ maximizing
/// mean validation RA (first grid entry wins ties), then the lower median of
/// the per-fold picks. A pure function of (fold plan, grid, solver).
pub fn select_lambda(
    kernel: &KernelMatrix,
    grades: &CatalyticSimilarityMatrix,
    fold: &OuterFold,
    cfg: &ExperimentConfig,
) -> Result<f64> {
    let grid = &cfg.lambda_grid;
    let cells: Vec<(usize, usize)> = (0..fold.inner.len())
        .flat_map(|f| (0..grid.len()).map(move |l| (f, l)))
        .collect();
    let scores: Vec<f64> = cells
        .par_iter()
        .map(|&(f, l)| inner_validation_ra(kernel, grades, &fold.inner[f], grid[l], &cfg.solver))
        .collect::<Result<_>>()?;

    let mut best_lambdas = Vec::new();
    for f in 0..fold.inner.len() {
        let mut best: Option<(f64, f64)> = None; // (score, lambda)
        for l in 0..grid.len() {
            let score = scores[f * grid.len() + l];
            if score.is_nan() {
                continue;
            }
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, grid[l]));
            }
        }
        if let Some((_, lambda)) = best {
            best_lambdas.push(lambda);
        }
    }
    if best_lambdas.is_empty() {
        return Err(Error::Data(
            "inner cross-validation produced no usable validation scores".into(),
        ));
    }
    best_lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Lower median keeps the pick on the grid for even counts.
    Ok(best_lambdas[(best_lambdas.len() - 1) / 2])
}

/// Select λ by inner CV and train the final model on the full outer-train
/// set. Exposed separately so leakage tests can poison test-fold labels and
/// compare trained coefficients directly.
pub fn train_outer_fold(
    kernel: &KernelMatrix,
    grades: &CatalyticSimilarityMatrix,
    fold: &OuterFold,
    cfg: &ExperimentConfig,
) -> Result<(RankModel, f64)> {
    let lambda = select_lambda(kernel, grades, fold, cfg)?;
    let ts = TrainingSet::from_kernel_and_grades(kernel, grades, &fold.train)?;
    let model = train(&ts, lambda, &cfg.solver)?;
    Ok((model, lambda))
}

/// Supervised protocol over all outer folds. The returned report carries the
/// chosen λ per fold.
pub fn run_supervised(
    kernel: &KernelMatrix,
    grades: &CatalyticSimilarityMatrix,
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    check_alignment(kernel, grades)?;
    let plan = make_folds(kernel.dim(), cfg)?;
    let mut acc = MetricAccumulator::new();
    let mut lambdas = Vec::with_capacity(plan.outer.len());
    for (fold_idx, fold) in plan.outer.iter().enumerate() {
        let (model, lambda) = train_outer_fold(kernel, grades, fold, cfg).map_err(|e| match e {
            Error::NonConvergence { residual, iterations } => Error::Solver(format!(
                "outer fold {fold_idx}: no convergence (residual {residual:.3e} after {iterations} iterations)"
            )),
            other => other,
        })?;
        lambdas.push(lambda);
        let g_test = kernel.slice(&fold.test, &fold.train);
        let h = predict(&model, &g_test, &g_test)?;
        let h = symmetrize_predictions(&h)?;
        for q in member_query_evals(&fold.test, &h, grades)? {
            acc.push(q, cfg.relevance_threshold);
        }
    }
    acc.into_report("supervised", cfg.relevance_threshold, Some(lambdas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ec::EcNumber;
    use crate::kernel::{sanitize, SimilarityMatrix, DEFAULT_CLIP_TOL};
    use crate::providers::synth::{synth_generate, SynthConfig};
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            lambda_grid: vec![0.01, 1.0, 100.0],
            outer_folds: 4,
            inner_folds: 3,
            seed: 7,
            ..Default::default()
        }
    }

    /// Sanitized grade matrix + labels for a synthetic population.
    fn grade_kernel(total: usize, seed: u64) -> (KernelMatrix, CatalyticSimilarityMatrix) {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        }
        .with_total(total)
        .unwrap();
        let (labels, _) = synth_generate(&cfg).unwrap();
        let grades = CatalyticSimilarityMatrix::from_labels(&labels).unwrap();
        let q_as_sim = SimilarityMatrix::new(
            grades.ids().to_vec(),
            grades.grades().mapv(|g| g as f64),
        )
        .unwrap();
        let kernel = sanitize(&q_as_sim, DEFAULT_CLIP_TOL).unwrap();
        (kernel, grades)
    }

    #[test]
    fn folds_partition_evenly() {
        let cfg = ExperimentConfig {
            inner_folds: 2,
            ..small_cfg()
        };
        let plan = make_folds(8, &cfg).unwrap();
        let sizes: Vec<usize> = plan.outer.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![2, 2, 2, 2]);

        let plan = make_folds(561, &ExperimentConfig::default()).unwrap();
        let mut sizes: Vec<usize> = plan.outer.iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![140, 140, 140, 141]);
    }

    #[test]
    fn folds_are_deterministic_and_disjoint() {
        let cfg = small_cfg();
        let a = make_folds(37, &cfg).unwrap();
        let b = make_folds(37, &cfg).unwrap();
        assert_eq!(a, b);

        let mut seen = std::collections::HashSet::new();
        for fold in &a.outer {
            for &i in &fold.test {
                assert!(seen.insert(i), "test sets overlap at {i}");
                assert!(!fold.train.contains(&i), "{i} in both train and test");
            }
            // Inner folds partition the outer train set.
            let mut inner_seen = std::collections::HashSet::new();
            for inner in &fold.inner {
                for &i in &inner.validation {
                    assert!(inner_seen.insert(i));
                    assert!(fold.train.contains(&i));
                    assert!(!inner.tune_train.contains(&i));
                }
                for &i in &inner.tune_train {
                    assert!(fold.train.contains(&i));
                }
            }
            assert_eq!(inner_seen.len(), fold.train.len());
        }
        assert_eq!(seen.len(), 37);

        let other = make_folds(
            37,
            &ExperimentConfig {
                seed: 8,
                ..small_cfg()
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn folds_reject_too_few_objects() {
        assert!(make_folds(7, &small_cfg()).is_err());
    }

    #[test]
    fn unsupervised_on_sanitized_grades_is_perfect() {
        let (kernel, grades) = grade_kernel(48, 3);
        let cfg = ExperimentConfig {
            inner_folds: 2,
            ..small_cfg()
        };
        let report = run_unsupervised(&kernel, &grades, &cfg).unwrap();
        // Scores equal the ground truth up to a positive rescaling, so every
        // defined query ranks perfectly.
        assert!(report.ra.per_query.iter().all(|&v| v == 1.0));
        assert!(!report.ra.per_query.is_empty());
    }

    #[test]
    fn unsupervised_on_random_kernel_is_chance_level() {
        let (_, grades) = grade_kernel(200, 4);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let raw = Array2::from_shape_fn((200, 200), |_| rng.gen_range(0.0..1.0));
        let s = SimilarityMatrix::new(grades.ids().to_vec(), raw).unwrap();
        let kernel = sanitize(&s, DEFAULT_CLIP_TOL).unwrap();
        let report = run_unsupervised(&kernel, &grades, &ExperimentConfig::default()).unwrap();
        assert!(
            (0.45..=0.55).contains(&report.auc.mean),
            "null AUC {}",
            report.auc.mean
        );
    }

    #[test]
    fn supervised_on_sanitized_grades_is_self_consistent() {
        let (kernel, grades) = grade_kernel(100, 5);
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.01, 1.0, 100.0],
            outer_folds: 4,
            inner_folds: 5,
            seed: 11,
            ..Default::default()
        };
        let report = run_supervised(&kernel, &grades, &cfg).unwrap();
        assert!(report.ra.mean >= 0.99, "self-consistency RA {}", report.ra.mean);
        assert_eq!(report.chosen_lambdas.as_ref().unwrap().len(), 4);
    }

    #[test]
    fn single_entry_grid_forces_lambda() {
        let (kernel, grades) = grade_kernel(32, 6);
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.5],
            outer_folds: 4,
            inner_folds: 2,
            seed: 1,
            ..Default::default()
        };
        let report = run_supervised(&kernel, &grades, &cfg).unwrap();
        assert_eq!(report.chosen_lambdas, Some(vec![0.5; 4]));
    }

    #[test]
    fn poisoned_test_labels_leave_training_untouched() {
        let (kernel, grades) = grade_kernel(32, 8);
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.1, 10.0],
            outer_folds: 4,
            inner_folds: 2,
            seed: 3,
            ..Default::default()
        };
        let plan = make_folds(kernel.dim(), &cfg).unwrap();
        let fold = &plan.outer[0];

        let (model, lambda) = train_outer_fold(&kernel, &grades, fold, &cfg).unwrap();

        // Rebuild the grade matrix with garbage in every test row/column
        // (symmetric, diagonal kept at 4 to satisfy the type invariants).
        let ids = grades.ids().to_vec();
        let n = ids.len();
        let mut poisoned = grades.grades().clone();
        for &t in &fold.test {
            for j in 0..n {
                if j == t {
                    continue;
                }
                let junk = ((t * 31 + j * 17) % 5) as u8;
                poisoned[[t, j]] = junk;
                poisoned[[j, t]] = junk;
            }
        }
        let poisoned_grades = rebuild_grades(&ids, &poisoned);
        let (model2, lambda2) = train_outer_fold(&kernel, &poisoned_grades, fold, &cfg).unwrap();

        assert_eq!(lambda, lambda2);
        for (a, b) in model
            .coefficients()
            .iter()
            .zip(model2.coefficients().iter())
        {
            assert_eq!(a.to_bits(), b.to_bits(), "coefficients differ");
        }
    }

    /// Test-only back door: wrap an arbitrary valid grade matrix.
    fn rebuild_grades(ids: &[String], grades: &Array2<u8>) -> CatalyticSimilarityMatrix {
        CatalyticSimilarityMatrix::from_raw_parts(ids.to_vec(), grades.clone())
    }

    #[test]
    fn reruns_are_identical() {
        let (kernel, grades) = grade_kernel(32, 9);
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.1, 10.0],
            outer_folds: 4,
            inner_folds: 2,
            seed: 5,
            ..Default::default()
        };
        let a = run_supervised(&kernel, &grades, &cfg).unwrap();
        let b = run_supervised(&kernel, &grades, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let u1 = run_unsupervised(&kernel, &grades, &cfg).unwrap();
        let u2 = run_unsupervised(&kernel, &grades, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&u1).unwrap(),
            serde_json::to_string(&u2).unwrap()
        );
    }

    #[test]
    fn misaligned_ids_rejected() {
        let (kernel, _) = grade_kernel(32, 10);
        let (_, grades) = {
            let cfg = SynthConfig {
                seed: 99,
                ..SynthConfig::default()
            }
            .with_total(32)
            .unwrap();
            let (labels, m) = synth_generate(&cfg).unwrap();
            let mut relabeled: Vec<(String, EcNumber)> = labels;
            relabeled.reverse();
            (m, CatalyticSimilarityMatrix::from_labels(&relabeled).unwrap())
        };
        assert!(run_unsupervised(&kernel, &grades, &small_cfg()).is_err());
    }
}
