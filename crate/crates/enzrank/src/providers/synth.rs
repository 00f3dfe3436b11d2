//! Synthetic benchmark generator: labeled objects whose raw similarity
//! increases, in expectation, with their catalytic similarity grade.
//!
//! Each distinct EC prefix at level ℓ owns a shared latent vector; an
//! object's embedding is the level-weighted sum of its four prefix vectors
//! plus per-object Gaussian noise (`sigma` per coordinate). Level-1 latents
//! are distinct standard basis vectors, so top-level classes are orthogonal
//! by construction; deeper latents are i.i.d. Gaussian with unit expected
//! norm. The raw similarity is the cosine of the embeddings plus independent
//! observation noise per ordered pair (`obs_sigma`), mimicking an asymmetric
//! measured similarity matrix; self-similarity is exactly 1.
//!
//! Everything is drawn from a single seeded ChaCha12 stream in a fixed
//! order, so a fixed config reproduces the output bit for bit.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::ec::EcNumber;
use crate::error::{Error, Result};
use crate::kernel::SimilarityMatrix;

/// Default class mix: 21 four-level EC classes with membership counts
/// proportional to a curated enzyme benchmark collection (561 objects).
pub fn default_class_mix() -> Vec<(EcNumber, usize)> {
    let raw: [(u32, u32, u32, u32, usize); 21] = [
        (1, 1, 1, 1, 15),
        (1, 1, 1, 21, 30),
        (1, 5, 1, 3, 6),
        (1, 11, 1, 5, 31),
        (1, 14, 15, 1, 36),
        (2, 1, 1, 45, 22),
        (2, 1, 1, 98, 43),
        (2, 4, 1, 1, 40),
        (2, 4, 2, 29, 16),
        (2, 7, 11, 1, 24),
        (3, 1, 1, 7, 13),
        (3, 1, 3, 48, 28),
        (3, 4, 21, 4, 72),
        (3, 4, 21, 5, 51),
        (3, 5, 2, 6, 8),
        (4, 1, 2, 13, 4),
        (4, 2, 1, 1, 76),
        (4, 2, 1, 20, 7),
        (5, 3, 1, 5, 21),
        (5, 3, 3, 1, 10),
        (6, 3, 2, 1, 8),
    ];
    raw.iter()
        .map(|&(a, b, c, d, count)| (EcNumber::new(a, b, c, d).expect("static labels"), count))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// EC classes and how many objects each contributes.
    pub classes: Vec<(EcNumber, usize)>,
    /// Embedding dimension; must be at least the number of distinct
    /// level-1 prefixes.
    pub dim: usize,
    /// Signal weight of the level-1..4 latent vectors.
    pub level_weights: [f64; 4],
    /// Per-coordinate standard deviation of the object embedding noise.
    pub sigma: f64,
    /// Standard deviation of the per-pair observation noise on the raw
    /// similarity values.
    pub obs_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: default_class_mix(),
            dim: 32,
            level_weights: [4.0, 2.0, 1.0, 0.5],
            sigma: 0.5,
            obs_sigma: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Config("synthetic config needs at least one class".into()));
        }
        if self.classes.iter().any(|(_, count)| *count == 0) {
            return Err(Error::Config("every class count must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.obs_sigma >= 0.0 && self.obs_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "obs_sigma must be >= 0, got {}",
                self.obs_sigma
            )));
        }
        if self.level_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("level weights must be finite".into()));
        }
        let level1: std::collections::BTreeSet<u32> =
            self.classes.iter().map(|(ec, _)| ec.digits()[0]).collect();
        if self.dim < level1.len() {
            return Err(Error::Config(format!(
                "dim {} is smaller than the {} distinct level-1 classes",
                self.dim,
                level1.len()
            )));
        }
        Ok(())
    }

    /// Rescale the class counts to sum to `total`, keeping proportions by
    /// the largest-remainder rule (ties broken by class order) and at least
    /// one object per class.
    pub fn with_total(mut self, total: usize) -> Result<Self> {
        if total < self.classes.len() {
            return Err(Error::Config(format!(
                "total {total} is smaller than the number of classes {}",
                self.classes.len()
            )));
        }
        let sum: usize = self.classes.iter().map(|(_, c)| c).sum();
        let mut scaled: Vec<usize> = Vec::with_capacity(self.classes.len());
        let mut remainders: Vec<(usize, f64)> = Vec::new();
        for (idx, (_, count)) in self.classes.iter().enumerate() {
            let raw = *count as f64 * total as f64 / sum as f64;
            let base = raw.floor() as usize;
            scaled.push(base);
            remainders.push((idx, raw - base as f64));
        }
        let assigned: usize = scaled.iter().sum();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (idx, _) in remainders.iter().take(total - assigned) {
            scaled[*idx] += 1;
        }
        // Lift any zero-count class by taking from the largest.
        while scaled.iter().any(|&c| c == 0) {
            let zero = scaled.iter().position(|&c| c == 0).unwrap();
            let largest = (0..scaled.len()).max_by_key(|&i| scaled[i]).unwrap();
            scaled[largest] -= 1;
            scaled[zero] += 1;
        }
        for ((_, count), new) in self.classes.iter_mut().zip(scaled) {
            *count = new;
        }
        Ok(self)
    }
}

/// Generate labels and a raw similarity matrix from the config.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<(String, EcNumber)>, SimilarityMatrix)> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let coord = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("valid std");

    // Level-1 prefixes take distinct basis vectors (first-encounter order);
    // deeper prefixes draw shared Gaussian latents on first encounter.
    let mut level1: BTreeMap<u32, usize> = BTreeMap::new();
    let mut deeper: BTreeMap<(usize, [u32; 4]), Vec<f64>> = BTreeMap::new();
    for (ec, _) in &cfg.classes {
        let digits = ec.digits();
        let next = level1.len();
        level1.entry(digits[0]).or_insert(next);
        for level in 2..=4usize {
            let mut prefix = [0u32; 4];
            prefix[..level].copy_from_slice(&digits[..level]);
            deeper
                .entry((level, prefix))
                .or_insert_with(|| (0..d).map(|_| coord.sample(&mut rng)).collect());
        }
    }

    let total: usize = cfg.classes.iter().map(|(_, c)| c).sum();
    let width = (total as f64).log10().ceil().max(1.0) as usize;
    let mut labels: Vec<(String, EcNumber)> = Vec::with_capacity(total);
    let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(total);
    let noise = Normal::new(0.0, cfg.sigma.max(f64::MIN_POSITIVE)).expect("valid std");

    for (ec, count) in &cfg.classes {
        let digits = ec.digits();
        for _ in 0..*count {
            let mut e = vec![0.0; d];
            e[level1[&digits[0]]] += cfg.level_weights[0];
            for level in 2..=4usize {
                let mut prefix = [0u32; 4];
                prefix[..level].copy_from_slice(&digits[..level]);
                let latent = &deeper[&(level, prefix)];
                for (ei, li) in e.iter_mut().zip(latent.iter()) {
                    *ei += cfg.level_weights[level - 1] * li;
                }
            }
            if cfg.sigma > 0.0 {
                for ei in e.iter_mut() {
                    *ei += noise.sample(&mut rng);
                }
            } else {
                // Keep the draw count independent of sigma so seeds stay
                // comparable across noise levels.
                for _ in 0..d {
                    let _ = noise.sample(&mut rng);
                }
            }
            labels.push((format!("syn{:0width$}", labels.len(), width = width), *ec));
            embeddings.push(e);
        }
    }

    let norms: Vec<f64> = embeddings
        .iter()
        .map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let obs = Normal::new(0.0, cfg.obs_sigma.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut values = Array2::zeros((total, total));
    for i in 0..total {
        for j in 0..total {
            if i == j {
                values[[i, j]] = 1.0;
                continue;
            }
            let dot: f64 = embeddings[i]
                .iter()
                .zip(embeddings[j].iter())
                .map(|(a, b)| a * b)
                .sum();
            let cos = dot / (norms[i] * norms[j]);
            let eps = if cfg.obs_sigma > 0.0 { obs.sample(&mut rng) } else { 0.0 };
            values[[i, j]] = cos + eps;
        }
    }

    let ids = labels.iter().map(|(id, _)| id.clone()).collect();
    let matrix = SimilarityMatrix::new(ids, values)?;
    Ok((labels, matrix))
}
