//! Retrieval metrics over graded relevance: ranking accuracy, bipartite AUC,
//! average precision, nDCG and pooled ROC curves.
//!
//! Conventions, fixed for reproducibility across runs and languages:
//!
//! - Pairwise metrics (ranking accuracy, AUC) credit ties exactly ½.
//! - Position-based metrics (AP, nDCG) sort by descending score and break
//!   ties by ascending database position, i.e. ascending db id when callers
//!   supply objects in id order.
//! - Bipartite conversion: an object is relevant iff its grade is at least
//!   the threshold (default 3).
//! - A query on which a metric is undefined (no differing grades, single
//!   relevance class, ...) yields `None`; callers skip and count it, never
//!   impute a value.
//! - ROC curves pool scores across queries (micro-average); per-query AUC is
//!   macro-averaged in reports. Both views are reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores and grades for one query over its database objects, aligned by
/// position. The query itself must not appear among the database objects.
#[derive(Debug, Clone)]
pub struct QueryEval {
    pub query_id: String,
    scores: Vec<f64>,
    grades: Vec<u8>,
}

impl QueryEval {
    pub fn new(query_id: String, scores: Vec<f64>, grades: Vec<u8>) -> Result<Self> {
        if scores.is_empty() || scores.len() != grades.len() {
            return Err(Error::Data(format!(
                "query {query_id:?}: need equal, non-zero score/grade counts (got {} and {})",
                scores.len(),
                grades.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data(format!(
                "query {query_id:?}: score at position {pos} is not finite"
            )));
        }
        if let Some(pos) = grades.iter().position(|&g| g > 4) {
            return Err(Error::Data(format!(
                "query {query_id:?}: grade at position {pos} exceeds 4"
            )));
        }
        Ok(QueryEval {
            query_id,
            scores,
            grades,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn grades(&self) -> &[u8] {
        &self.grades
    }

    /// Database positions sorted by descending score, ties by ascending
    /// position. The shared order behind AP and nDCG.
    fn ranked_positions(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .expect("scores validated finite")
                .then(a.cmp(&b))
        });
        idx
    }
}

pub const DEFAULT_RELEVANCE_THRESHOLD: u8 = 3;

fn step_credit(diff: f64) -> f64 {
    if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Ranking accuracy: over all database pairs with differing grades, the
/// fraction ordered concordantly with the grades, ties ½. `None` when no
/// pair of grades differs.
pub fn ranking_accuracy(q: &QueryEval) -> Option<f64> {
    let n = q.grades.len();
    let mut pairs = 0u64;
    let mut credit = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if q.grades[i] == q.grades[j] {
                continue;
            }
            pairs += 1;
            let (hi, lo) = if q.grades[i] > q.grades[j] { (i, j) } else { (j, i) };
            credit += step_credit(q.scores[hi] - q.scores[lo]);
        }
    }
    (pairs > 0).then(|| credit / pairs as f64)
}

/// Bipartite AUC at a grade threshold: fraction of (relevant, irrelevant)
/// pairs ranked concordantly, ties ½. `None` when either class is empty.
pub fn auc_bipartite(q: &QueryEval, threshold: u8) -> Option<f64> {
    let n = q.grades.len();
    let mut credit = 0.0;
    let mut pairs = 0u64;
    let mut relevant = 0u64;
    for i in 0..n {
        if q.grades[i] >= threshold {
            relevant += 1;
        }
    }
    if relevant == 0 || relevant == n as u64 {
        return None;
    }
    for i in 0..n {
        if q.grades[i] < threshold {
            continue;
        }
        for j in 0..n {
            if q.grades[j] >= threshold {
                continue;
            }
            pairs += 1;
            credit += step_credit(q.scores[i] - q.scores[j]);
        }
    }
    Some(credit / pairs as f64)
}

/// Average precision of the bipartite ranking: mean over relevant positions
/// `k` (1-based, in the tie-broken order) of precision@k. `None` when no
/// object is relevant.
pub fn average_precision(q: &QueryEval, threshold: u8) -> Option<f64> {
    let order = q.ranked_positions();
    let total_relevant = q.grades.iter().filter(|&&g| g >= threshold).count();
    if total_relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &pos) in order.iter().enumerate() {
        if q.grades[pos] >= threshold {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

/// Gain assigned to a grade inside DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainFunction {
    /// Raw grade.
    Linear,
    /// `2^grade − 1`.
    Exponential,
}

impl GainFunction {
    fn apply(&self, grade: u8) -> f64 {
        match self {
            GainFunction::Linear => grade as f64,
            GainFunction::Exponential => (1u32 << grade) as f64 - 1.0,
        }
    }
}

/// Normalized discounted cumulative gain with discount `log₂(k+1)` over
/// 1-based ranks. The default gain is the raw grade; see [`ndcg_with_gain`].
/// `None` when every grade is zero.
pub fn ndcg(q: &QueryEval) -> Option<f64> {
    ndcg_with_gain(q, GainFunction::Linear)
}

pub fn ndcg_with_gain(q: &QueryEval, gain: GainFunction) -> Option<f64> {
    if q.grades.iter().all(|&g| g == 0) {
        return None;
    }
    let discount = |rank0: usize| ((rank0 + 2) as f64).log2();
    let order = q.ranked_positions();
    let dcg: f64 = order
        .iter()
        .enumerate()
        .map(|(rank0, &pos)| gain.apply(q.grades[pos]) / discount(rank0))
        .sum();
    let mut ideal = q.grades.clone();
    ideal.sort_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .enumerate()
        .map(|(rank0, &g)| gain.apply(g) / discount(rank0))
        .sum();
    Some(dcg / idcg)
}

/// Pooled ROC curve over a batch of queries at a grade threshold. Scores are
/// pooled across queries (micro-average), swept from high to low with tied
/// scores collapsed into single sweep steps; the emitted points run from
/// (0,0) to (1,1) with both coordinates non-decreasing, and the trapezoid
/// area under them equals the pooled AUC.
///
/// Errors when the pool holds a single relevance class.
pub fn roc_curve(qs: &[QueryEval], threshold: u8) -> Result<Vec<(f64, f64)>> {
    let mut pool: Vec<(f64, bool)> = Vec::new();
    for q in qs {
        for (s, g) in q.scores.iter().zip(q.grades.iter()) {
            pool.push((*s, *g >= threshold));
        }
    }
    let positives = pool.iter().filter(|(_, rel)| *rel).count();
    let negatives = pool.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Data(format!(
            "ROC pool is degenerate: {positives} relevant vs {negatives} irrelevant objects"
        )));
    }
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores validated finite"));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pool.len() {
        let mut j = i;
        while j < pool.len() && pool[j].0 == pool[i].0 {
            if pool[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        i = j;
    }
    Ok(points)
}

/// Trapezoid area under a ROC point list.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Arithmetic mean and population standard deviation of the defined
/// per-query values. Errors on an empty list.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Data("cannot aggregate an empty value list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn qe(scores: &[f64], grades: &[u8]) -> QueryEval {
        QueryEval::new("q".into(), scores.to_vec(), grades.to_vec()).unwrap()
    }

    /// Brute-force RA oracle: iterate ordered pairs with grade_e > grade_ē.
    fn ra_oracle(scores: &[f64], grades: &[u8]) -> Option<f64> {
        let mut pairs = 0.0;
        let mut credit = 0.0;
        for e in 0..grades.len() {
            for eb in 0..grades.len() {
                if grades[e] > grades[eb] {
                    pairs += 1.0;
                    credit += step_credit(scores[e] - scores[eb]);
                }
            }
        }
        (pairs > 0.0).then(|| credit / pairs)
    }

    fn ap_oracle(scores: &[f64], grades: &[u8], threshold: u8) -> Option<f64> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let rel: Vec<bool> = order.iter().map(|&i| grades[i] >= threshold).collect();
        let total = rel.iter().filter(|&&r| r).count();
        if total == 0 {
            return None;
        }
        let mut hits = 0;
        let mut sum = 0.0;
        for (k, &r) in rel.iter().enumerate() {
            if r {
                hits += 1;
                sum += hits as f64 / (k + 1) as f64;
            }
        }
        Some(sum / total as f64)
    }

    fn ndcg_oracle(scores: &[f64], grades: &[u8]) -> Option<f64> {
        if grades.iter().all(|&g| g == 0) {
            return None;
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let dcg: f64 = order
            .iter()
            .enumerate()
            .map(|(k, &i)| grades[i] as f64 / ((k + 2) as f64).log2())
            .sum();
        let mut sorted = grades.to_vec();
        sorted.sort_by(|a, b| b.cmp(a));
        let idcg: f64 = sorted
            .iter()
            .enumerate()
            .map(|(k, &g)| g as f64 / ((k + 2) as f64).log2())
            .sum();
        Some(dcg / idcg)
    }

    #[test]
    fn ra_trivial_and_forced_examples() {
        let q = qe(&[3.0, 1.0, 0.0], &[3, 1, 0]);
        assert_eq!(ranking_accuracy(&q), Some(1.0));
        let q = qe(&[-3.0, -1.0, 0.0], &[3, 1, 0]);
        assert_eq!(ranking_accuracy(&q), Some(0.0));
        // (3,1): 0.2 < 0.9 -> 0; (3,0): 0.2 > 0.1 -> 1; (1,0): 0.9 > 0.1 -> 1.
        let q = qe(&[0.2, 0.9, 0.1], &[3, 1, 0]);
        let ra = ranking_accuracy(&q).unwrap();
        assert!((ra - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ra_undefined_when_grades_constant() {
        let q = qe(&[0.4, 0.2], &[2, 2]);
        assert_eq!(ranking_accuracy(&q), None);
    }

    #[test]
    fn auc_trivial_and_tie_examples() {
        let q = qe(&[5.0, 4.0, 1.0, 0.5], &[4, 3, 2, 0]);
        assert_eq!(auc_bipartite(&q, 3), Some(1.0));
        let q = qe(&[1.0, 1.0], &[4, 2]);
        assert_eq!(auc_bipartite(&q, 3), Some(0.5));
        let q = qe(&[1.0, 2.0], &[4, 4]);
        assert_eq!(auc_bipartite(&q, 3), None);
    }

    #[test]
    fn ap_examples() {
        let q = qe(&[9.0, 1.0, 0.0], &[4, 0, 0]);
        assert_eq!(average_precision(&q, 3), Some(1.0));
        // Relevant at ranks 1 and 3 of 3: (1/1 + 2/3) / 2 = 5/6.
        let q = qe(&[9.0, 5.0, 1.0], &[4, 0, 3]);
        let ap = average_precision(&q, 3).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        let q = qe(&[1.0, 2.0], &[0, 1]);
        assert_eq!(average_precision(&q, 3), None);
    }

    #[test]
    fn ndcg_examples() {
        let q = qe(&[4.0, 3.0, 2.0], &[4, 2, 1]);
        assert_eq!(ndcg(&q), Some(1.0));
        // Grades [4,0] predicted reversed: DCG = 0 + 4/log2(3); ideal = 4.
        let q = qe(&[0.0, 1.0], &[4, 0]);
        let v = ndcg(&q).unwrap();
        let want = (4.0 / 3.0f64.log2()) / 4.0;
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.6309).abs() < 5e-5);
        let q = qe(&[1.0, 0.0], &[0, 0]);
        assert_eq!(ndcg(&q), None);
    }

    #[test]
    fn ndcg_exponential_gain_option() {
        let q = qe(&[0.0, 1.0], &[4, 0]);
        let v = ndcg_with_gain(&q, GainFunction::Exponential).unwrap();
        let want = (15.0 / 3.0f64.log2()) / 15.0;
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn metric_oracles_on_random_queries() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..300 {
            let n = rng.gen_range(1..=8);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(-5..=5) as f64) / 2.0).collect();
            let grades: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
            let q = qe(&scores, &grades);
            assert_eq!(ranking_accuracy(&q), ra_oracle(&scores, &grades));
            assert_eq!(average_precision(&q, 3), ap_oracle(&scores, &grades, 3));
            match (ndcg(&q), ndcg_oracle(&scores, &grades)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (a, b) => assert_eq!(a.is_none(), b.is_none()),
            }
        }
    }

    #[test]
    fn ra_on_binarized_grades_equals_auc() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(2..=8);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(-4..=4) as f64) / 2.0).collect();
            let grades: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
            let q = qe(&scores, &grades);
            let binarized: Vec<u8> = grades.iter().map(|&g| u8::from(g >= 3)).collect();
            let qb = qe(&scores, &binarized);
            assert_eq!(auc_bipartite(&q, 3), ranking_accuracy(&qb));
        }
    }

    #[test]
    fn two_level_tie_free_ra_matches_wilcoxon() {
        // Tie-free scores: RA = AUC = U/(n1·n0) with U from the rank-sum.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.gen_range(3..=9);
            let mut scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
            scores.shuffle(&mut rng);
            let grades: Vec<u8> = (0..n).map(|_| if rng.gen_bool(0.5) { 4 } else { 0 }).collect();
            let n1 = grades.iter().filter(|&&g| g == 4).count();
            let n0 = n - n1;
            if n1 == 0 || n0 == 0 {
                continue;
            }
            let q = qe(&scores, &grades);
            // Rank-sum of the relevant class over ascending scores (ranks 1-based).
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
            let rank_sum: f64 = order
                .iter()
                .enumerate()
                .filter(|(_, &i)| grades[i] == 4)
                .map(|(r0, _)| (r0 + 1) as f64)
                .sum();
            let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
            let wilcoxon = u / (n1 * n0) as f64;
            let ra = ranking_accuracy(&q).unwrap();
            let auc = auc_bipartite(&q, 3).unwrap();
            assert!((ra - wilcoxon).abs() < 1e-12);
            assert!((auc - wilcoxon).abs() < 1e-12);
        }
    }

    #[test]
    fn roc_perfect_separation_passes_upper_left() {
        let q = qe(&[3.0, 2.0, 0.5, 0.1], &[4, 4, 0, 1]);
        let points = roc_curve(&[q], 3).unwrap();
        assert!(points.contains(&(0.0, 1.0)));
        assert_eq!(points.first(), Some(&(0.0, 0.0)));
        assert_eq!(points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn roc_two_point_toy_pool_trapezoid() {
        let q = qe(&[1.0, 1.0], &[4, 0]);
        let points = roc_curve(&[q], 3).unwrap();
        assert_eq!(points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((roc_auc(&points) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn roc_random_pool_area_near_half_and_matches_pairwise_auc() {
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let scores: Vec<f64> = (0..4000).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grades: Vec<u8> = (0..4000).map(|_| if rng.gen_bool(0.4) { 4 } else { 0 }).collect();
        let q = qe(&scores, &grades);
        let points = roc_curve(&[q.clone()], 3).unwrap();
        let area = roc_auc(&points);
        assert!((area - 0.5).abs() < 0.05, "area {area}");
        let pairwise = auc_bipartite(&q, 3).unwrap();
        assert!((area - pairwise).abs() < 1e-9);
        for w in points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn roc_rejects_one_class_pool() {
        let q = qe(&[1.0, 2.0], &[4, 4]);
        assert!(roc_curve(&[q], 3).is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(aggregate(&[0.0, 1.0]).unwrap(), (0.5, 0.5));
        assert!(aggregate(&[]).is_err());
        let values = [0.3, 0.7, 0.9, 0.1];
        let (mean, std) = aggregate(&values).unwrap();
        let m = values.iter().sum::<f64>() / 4.0;
        let s = (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 4.0).sqrt();
        assert!((mean - m).abs() < 1e-15 && (std - s).abs() < 1e-15);
    }

    #[test]
    fn query_eval_validation() {
        assert!(QueryEval::new("q".into(), vec![], vec![]).is_err());
        assert!(QueryEval::new("q".into(), vec![1.0], vec![0, 1]).is_err());
        assert!(QueryEval::new("q".into(), vec![f64::NAN], vec![0]).is_err());
        assert!(QueryEval::new("q".into(), vec![1.0], vec![5]).is_err());
    }

    proptest! {
        /// All metrics are invariant under strictly increasing transforms of
        /// the scores (2x+1 and x³), given the fixed tie rule.
        #[test]
        fn metrics_invariant_under_monotone_transforms(
            raw in proptest::collection::vec((0u8..=4, -20i32..=20), 2..9)
        ) {
            let grades: Vec<u8> = raw.iter().map(|(g, _)| *g).collect();
            let scores: Vec<f64> = raw.iter().map(|(_, s)| *s as f64 / 4.0).collect();
            let base = qe(&scores, &grades);
            for transform in [|x: f64| 2.0 * x + 1.0, |x: f64| x * x * x] {
                let mapped: Vec<f64> = scores.iter().map(|&s| transform(s)).collect();
                let t = qe(&mapped, &grades);
                prop_assert_eq!(ranking_accuracy(&base), ranking_accuracy(&t));
                prop_assert_eq!(auc_bipartite(&base, 3), auc_bipartite(&t, 3));
                prop_assert_eq!(average_precision(&base, 3), average_precision(&t, 3));
                prop_assert_eq!(ndcg(&base), ndcg(&t));
            }
        }

        /// AP and nDCG depend only on the induced ordering, not magnitudes.
        #[test]
        fn position_metrics_depend_only_on_order(
            grades in proptest::collection::vec(0u8..=4, 2..8),
            shift in -5.0f64..5.0
        ) {
            let n = grades.len();
            let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
            let shifted: Vec<f64> = scores.iter().map(|s| s * 3.0 + shift).collect();
            let a = qe(&scores, &grades);
            let b = qe(&shifted, &grades);
            prop_assert_eq!(average_precision(&a, 3), average_precision(&b, 3));
            prop_assert_eq!(ndcg(&a), ndcg(&b));
        }
    }
}
