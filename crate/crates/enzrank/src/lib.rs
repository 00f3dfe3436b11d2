//! Query-conditioned retrieval of functionally related enzymes.
//!
//! The crate turns raw pairwise similarity measures over an object set into
//! a retrieval engine and evaluates it against EC-derived graded relevance:
//!
//! - [`ec`] — EC labels, catalytic similarity grades, ground-truth rankings;
//! - [`kernel`] — similarity sanitization into valid kernels and the
//!   Kronecker pairwise-kernel operator;
//! - [`ranker`] — the regularized least-squares conditional ranking model
//!   and the unsupervised similarity-ranking baseline;
//! - [`metrics`] — ranking accuracy, bipartite AUC, MAP, nDCG, ROC curves;
//! - [`providers`] — similarity measures computed from primary data
//!   (Smith-Waterman sequence identity, ε-tolerant maximum common subgraph,
//!   triplet fingerprints with Jaccard) and a synthetic benchmark generator;
//! - [`cv`] — the nested cross-validation experiment protocol;
//! - [`io`], [`report`], [`config`] — file formats, report emission and the
//!   experiment configuration surface.

pub mod config;
pub mod cv;
pub mod ec;
pub mod error;
pub mod io;
pub mod kernel;
mod linalg;
pub mod metrics;
pub mod providers;
pub mod ranker;
pub mod report;
mod solver;

pub use ec::{catalytic_similarity, CatalyticSimilarityMatrix, EcNumber};
pub use error::{Error, Result};
pub use kernel::{sanitize, KernelMatrix, SimilarityMatrix};
pub use ranker::{RankModel, SolverMode, SolverOptions, TrainingSet};
