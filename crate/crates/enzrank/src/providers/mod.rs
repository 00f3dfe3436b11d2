//! Similarity providers: raw pairwise similarity matrices computed from
//! primary data, plus the synthetic benchmark generator.
//!
//! All providers emit [`SimilarityMatrix`] values in the shared CSV format;
//! run them through [`crate::kernel::sanitize`] before any learning.

pub mod blosum;
pub mod fingerprint;
pub mod graph;
pub mod seqalign;
pub mod synth;

pub use fingerprint::{fingerprint, jaccard, Fingerprint, FingerprintParams};
pub use graph::{
    cloud_to_graph, mcs_similarity, CavityGraph, LabeledPointCloud, McsOutcome, McsParams,
    Pseudocenter, PseudocenterKind,
};
pub use seqalign::{smith_waterman_identity, sw_similarity_matrix, AlignParams, Sequence};
pub use synth::{synth_generate, SynthConfig};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::SimilarityMatrix;

fn cloud_graphs(clouds: &[LabeledPointCloud]) -> Result<Vec<CavityGraph>> {
    if clouds.is_empty() {
        return Err(Error::Data("no point clouds given".into()));
    }
    clouds.iter().map(cloud_to_graph).collect()
}

/// Pairwise MCS similarity matrix over a set of clouds. The second return
/// value is true when any pair hit the clique-search budget, in which case
/// those entries are lower bounds.
pub fn mcs_similarity_matrix(
    clouds: &[LabeledPointCloud],
    params: &McsParams,
) -> Result<(SimilarityMatrix, bool)> {
    let graphs = cloud_graphs(clouds)?;
    let n = graphs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let outcomes: Vec<McsOutcome> = pairs
        .par_iter()
        .map(|&(i, j)| mcs_similarity(&graphs[i], &graphs[j], params))
        .collect::<Result<_>>()?;
    let mut values = Array2::eye(n);
    let mut truncated = false;
    for (&(i, j), out) in pairs.iter().zip(outcomes.iter()) {
        values[[i, j]] = out.similarity;
        values[[j, i]] = out.similarity;
        truncated |= !out.exact;
    }
    let ids = clouds.iter().map(|c| c.id.clone()).collect();
    Ok((SimilarityMatrix::new(ids, values)?, truncated))
}

/// Pairwise Jaccard similarity of triplet fingerprints over a set of clouds.
pub fn fingerprint_similarity_matrix(
    clouds: &[LabeledPointCloud],
    params: &FingerprintParams,
) -> Result<SimilarityMatrix> {
    let graphs = cloud_graphs(clouds)?;
    let prints: Vec<Fingerprint> = graphs
        .par_iter()
        .map(|g| fingerprint(g, params))
        .collect::<Result<_>>()?;
    let n = prints.len();
    let values = Array2::from_shape_fn((n, n), |(i, j)| jaccard(&prints[i], &prints[j]));
    let ids = clouds.iter().map(|c| c.id.clone()).collect();
    SimilarityMatrix::new(ids, values)
}
