//! Cavity point clouds, their complete-graph representation, and the
//! ε-tolerant maximum common subgraph similarity.
//!
//! A cavity is summarized by labeled pseudocenters in 3D. [`cloud_to_graph`]
//! turns a cloud into a complete node-labeled graph whose edges carry the
//! Euclidean distances. [`mcs_similarity`] builds the modular product graph
//! over label-equal node pairs, connecting two correspondences when their
//! edge weights agree within ε (default 0.2 Å), and searches for a maximum
//! clique: its size is the size of the maximum common subgraph, normalized
//! by the larger graph's node count. The common subgraph is not required to
//! be connected (with complete input graphs it always is).
//!
//! The clique search is an exact branch and bound with a greedy coloring
//! bound, capped by a node-expansion budget; when the budget runs out the
//! best clique found so far is returned as a lower bound with `exact` set
//! to false.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven pseudocenter types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudocenterKind {
    Donor,
    Acceptor,
    DonorAcceptor,
    Aliphatic,
    Metal,
    Pi,
    Aromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pseudocenter {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub label: PseudocenterKind,
}

/// A labeled 3D point cloud describing one cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPointCloud {
    pub id: String,
    pub centers: Vec<Pseudocenter>,
}

impl LabeledPointCloud {
    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Data(format!("point cloud {:?} has no centers", self.id)));
        }
        for (i, c) in self.centers.iter().enumerate() {
            if !(c.x.is_finite() && c.y.is_finite() && c.z.is_finite()) {
                return Err(Error::Data(format!(
                    "point cloud {:?}: center {i} has non-finite coordinates",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Complete node-labeled, edge-weighted graph; weights are Euclidean
/// distances in Å, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityGraph {
    labels: Vec<PseudocenterKind>,
    weights: Array2<f64>,
}

impl CavityGraph {
    pub fn new(labels: Vec<PseudocenterKind>, weights: Array2<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Data("cavity graph has no nodes".into()));
        }
        if weights.dim() != (n, n) {
            return Err(Error::Data(format!(
                "cavity graph weight matrix {:?} does not match {n} nodes",
                weights.dim()
            )));
        }
        for i in 0..n {
            if weights[[i, i]] != 0.0 {
                return Err(Error::Data(format!("nonzero self-distance at node {i}")));
            }
            for j in 0..n {
                let w = weights[[i, j]];
                if !w.is_finite() || w < 0.0 || w != weights[[j, i]] {
                    return Err(Error::Data(format!("invalid edge weight at ({i}, {j})")));
                }
            }
        }
        Ok(CavityGraph { labels, weights })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[PseudocenterKind] {
        &self.labels
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

/// Build the complete distance graph of a cloud.
pub fn cloud_to_graph(cloud: &LabeledPointCloud) -> Result<CavityGraph> {
    cloud.validate()?;
    let n = cloud.centers.len();
    let weights = Array2::from_shape_fn((n, n), |(i, j)| {
        let a = &cloud.centers[i];
        let b = &cloud.centers[j];
        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
    });
    let labels = cloud.centers.iter().map(|c| c.label).collect();
    CavityGraph::new(labels, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsParams {
    /// Edge weights are considered equal when they differ by at most this (Å).
    pub epsilon: f64,
    /// Node-expansion cap for the clique search.
    pub budget: u64,
}

impl Default for McsParams {
    fn default() -> Self {
        McsParams {
            epsilon: 0.2,
            budget: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsOutcome {
    /// MCS size divided by the larger graph's node count, in [0, 1].
    pub similarity: f64,
    /// False when the budget ran out; the value is then a lower bound.
    pub exact: bool,
}

/// Fixed-capacity bitset over product-graph vertices.
#[derive(Clone)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn empty(bits: usize) -> Self {
        BitSet {
            words: vec![0; bits.div_ceil(64)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1u64 << (i % 64));
    }


    fn intersect(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(wi, &w)| wi * 64 + w.trailing_zeros() as usize)
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

struct CliqueSearch<'a> {
    adjacency: &'a [BitSet],
    budget: u64,
    expansions: u64,
    best: usize,
    truncated: bool,
}

impl CliqueSearch<'_> {
    /// Greedy coloring upper bound on the clique number of `candidates`.
    fn color_bound(&self, candidates: &BitSet) -> usize {
        let mut remaining = candidates.clone();
        let mut colors = 0;
        while remaining.count() > 0 {
            colors += 1;
            let mut class = remaining.clone();
            while let Some(v) = class.first() {
                remaining.remove(v);
                class.remove(v);
                // Drop v's neighbors from this color class.
                class = class.intersect(&complement_mask(&self.adjacency[v], class.words.len()));
            }
        }
        colors
    }

    fn expand(&mut self, size: usize, candidates: &BitSet) {
        if self.truncated {
            return;
        }
        self.expansions += 1;
        if self.expansions > self.budget {
            self.truncated = true;
            return;
        }
        if size > self.best {
            self.best = size;
        }
        let remaining = candidates.count();
        if remaining == 0 || size + remaining <= self.best {
            return;
        }
        if size + self.color_bound(candidates) <= self.best {
            return;
        }
        let mut cand = candidates.clone();
        let order: Vec<usize> = cand.iter().collect();
        for v in order {
            if size + cand.count() <= self.best {
                return;
            }
            cand.remove(v);
            let next = cand.intersect(&self.adjacency[v]);
            self.expand(size + 1, &next);
            if self.truncated {
                return;
            }
        }
    }
}

fn complement_mask(set: &BitSet, words: usize) -> BitSet {
    BitSet {
        words: (0..words).map(|i| !set.words[i]).collect(),
    }
}

/// Maximum common subgraph similarity of two cavity graphs.
pub fn mcs_similarity(g1: &CavityGraph, g2: &CavityGraph, params: &McsParams) -> Result<McsOutcome> {
    if !(params.epsilon >= 0.0 && params.epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be non-negative, got {}", params.epsilon)));
    }
    if params.budget == 0 {
        return Err(Error::Config("clique search budget must be positive".into()));
    }
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let denom = n1.max(n2) as f64;

    // Modular product over label-equal node pairs.
    let mut vertices: Vec<(usize, usize)> = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if g1.labels[i] == g2.labels[j] {
                vertices.push((i, j));
            }
        }
    }
    if vertices.is_empty() {
        return Ok(McsOutcome {
            similarity: 0.0,
            exact: true,
        });
    }

    let p = vertices.len();
    let mut adjacency = vec![BitSet::empty(p); p];
    for a in 0..p {
        let (i, j) = vertices[a];
        for b in (a + 1)..p {
            let (k, l) = vertices[b];
            if i == k || j == l {
                continue;
            }
            if (g1.weights[[i, k]] - g2.weights[[j, l]]).abs() <= params.epsilon {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
    }

    let mut all = BitSet::empty(p);
    for v in 0..p {
        all.insert(v);
    }
    let mut search = CliqueSearch {
        adjacency: &adjacency,
        budget: params.budget,
        expansions: 0,
        best: 0,
        truncated: false,
    };
    search.expand(0, &all);

    Ok(McsOutcome {
        similarity: search.best as f64 / denom,
        exact: !search.truncated,
    })
}
