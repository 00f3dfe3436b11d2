//! Triplet fingerprints of cavity graphs and their Jaccard similarity.
//!
//! A feature is a complete labeled 3-node subgraph with binned edge weights:
//! the canonical key of a node triple is the lexicographic minimum, over all
//! six vertex orderings, of its three labels followed by the three distance
//! bins. Bins are half-open `[k·w, (k+1)·w)`; distances are clamped at
//! `max_dist` before binning, so everything at or beyond it lands in one
//! overflow bin. Fingerprints carry presence (set) semantics, matching the
//! Jaccard comparison.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::graph::{CavityGraph, PseudocenterKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerprintParams {
    pub bin_width: f64,
    pub max_dist: f64,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            bin_width: 1.0,
            max_dist: 20.0,
        }
    }
}

impl FingerprintParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Config(format!(
                "bin width must be positive, got {}",
                self.bin_width
            )));
        }
        if !(self.max_dist > 0.0 && self.max_dist.is_finite()) {
            return Err(Error::Config(format!(
                "max distance must be positive, got {}",
                self.max_dist
            )));
        }
        Ok(())
    }
}

/// Canonical triplet key: three node labels plus three distance bins, in the
/// lexicographically minimal vertex ordering. For vertices (p, q, r) the bin
/// order is (pq, pr, qr).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripletKey {
    pub labels: [PseudocenterKind; 3],
    pub bins: [u32; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fingerprint {
    features: BTreeSet<TripletKey>,
}

impl Fingerprint {
    pub fn features(&self) -> &BTreeSet<TripletKey> {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

fn bin_index(distance: f64, params: &FingerprintParams) -> u32 {
    (distance.min(params.max_dist) / params.bin_width).floor() as u32
}

pub(crate) fn canonical_key(
    labels: [PseudocenterKind; 3],
    bins: [u32; 3],
    // bins given as (01, 02, 12) for the vertex order of `labels`
) -> TripletKey {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let bin_of = |a: usize, b: usize| -> u32 {
        match (a.min(b), a.max(b)) {
            (0, 1) => bins[0],
            (0, 2) => bins[1],
            (1, 2) => bins[2],
            _ => unreachable!(),
        }
    };
    let mut best: Option<TripletKey> = None;
    for perm in PERMS {
        let key = TripletKey {
            labels: [labels[perm[0]], labels[perm[1]], labels[perm[2]]],
            bins: [
                bin_of(perm[0], perm[1]),
                bin_of(perm[0], perm[2]),
                bin_of(perm[1], perm[2]),
            ],
        };
        match &best {
            Some(b) if *b <= key => {}
            _ => best = Some(key),
        }
    }
    best.expect("six permutations considered")
}

/// Enumerate every node triple and collect the canonical feature set.
/// Graphs with fewer than three nodes yield the empty fingerprint.
pub fn fingerprint(g: &CavityGraph, params: &FingerprintParams) -> Result<Fingerprint> {
    params.validate()?;
    let n = g.node_count();
    let mut features = BTreeSet::new();
    let labels = g.labels();
    let w = g.weights();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let key = canonical_key(
                    [labels[i], labels[j], labels[k]],
                    [
                        bin_index(w[[i, j]], params),
                        bin_index(w[[i, k]], params),
                        bin_index(w[[j, k]], params),
                    ],
                );
                features.insert(key);
            }
        }
    }
    Ok(Fingerprint { features })
}

/// Jaccard similarity `|a ∩ b| / |a ∪ b|`; 1 when both sets are empty.
pub fn jaccard(a: &Fingerprint, b: &Fingerprint) -> f64 {
    if a.features.is_empty() && b.features.is_empty() {
        return 1.0;
    }
    let intersection = a.features.intersection(&b.features).count();
    let union = a.features.len() + b.features.len() - intersection;
    intersection as f64 / union as f64
}
