//! Smith-Waterman local alignment with affine gaps over BLOSUM62, and the
//! sequence identity derived from one optimal traceback.
//!
//! A gap of length `L` costs `gap_open + L·gap_extend` (defaults 11 and 1,
//! the standard companions of BLOSUM62). Identity is the number of exactly
//! matching columns divided by the alignment length *including* gap columns;
//! an empty optimal alignment (score 0) has identity 0 by convention.
//!
//! Determinism and symmetry: the pair is canonically ordered (by residue
//! string, then id) before alignment, so both outputs are symmetric in the
//! arguments. Traceback starts at the highest-scoring cell (ties: smallest
//! row, then smallest column) and prefers, in order: stopping at a zero
//! cell, the diagonal step, the shortest gap in the second sequence, the
//! shortest gap in the first.

use crate::error::{Error, Result};
use crate::kernel::SimilarityMatrix;
use crate::providers::blosum::{blosum62_score, residue_index};

use ndarray::Array2;
use rayon::prelude::*;

/// An amino-acid sequence in canonical (uppercase) form, alphabet
/// `ARNDCQEGHILKMFPSTWYV` plus `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    id: String,
    residues: String,
}

impl Sequence {
    pub fn new(id: impl Into<String>, residues: &str) -> Result<Self> {
        let id = id.into();
        if residues.is_empty() {
            return Err(Error::Data(format!("sequence {id:?} is empty")));
        }
        let canonical = residues.to_ascii_uppercase();
        for (pos, byte) in canonical.bytes().enumerate() {
            if residue_index(byte).is_none() {
                return Err(Error::Data(format!(
                    "sequence {id:?}: unknown residue {:?} at position {}",
                    byte as char,
                    pos + 1
                )));
            }
        }
        Ok(Sequence {
            id,
            residues: canonical,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn residues(&self) -> &str {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlignParams {
    pub gap_open: i32,
    pub gap_extend: i32,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            gap_open: 11,
            gap_extend: 1,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<()> {
        if self.gap_open < 0 || self.gap_extend < 0 {
            return Err(Error::Config(format!(
                "gap penalties must be non-negative, got open {} extend {}",
                self.gap_open, self.gap_extend
            )));
        }
        Ok(())
    }
}

/// Optimal local alignment score and the identity of one optimal traceback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOutcome {
    pub score: i32,
    pub identity: f64,
}

const NEG_INF: i32 = i32::MIN / 4;

/// Local alignment with affine gaps (three-matrix recurrence); returns the
/// optimal score and the identity of the documented traceback.
pub fn smith_waterman_identity(a: &Sequence, b: &Sequence, params: &AlignParams) -> AlignOutcome {
    // Canonical pair order makes the outcome symmetric in (a, b).
    let (first, second) = if (b.residues.as_str(), b.id.as_str()) < (a.residues.as_str(), a.id.as_str())
    {
        (b, a)
    } else {
        (a, b)
    };
    align_ordered(first.residues.as_bytes(), second.residues.as_bytes(), params)
}

fn score_pair(x: u8, y: u8) -> i32 {
    blosum62_score(x, y).expect("sequence residues validated at construction")
}

fn align_ordered(sa: &[u8], sb: &[u8], params: &AlignParams) -> AlignOutcome {
    let (la, lb) = (sa.len(), sb.len());
    let open = params.gap_open;
    let ext = params.gap_extend;

    let mut h = Array2::<i32>::zeros((la + 1, lb + 1));
    let mut e = Array2::<i32>::from_elem((la + 1, lb + 1), NEG_INF); // gap in first sequence
    let mut f = Array2::<i32>::from_elem((la + 1, lb + 1), NEG_INF); // gap in second sequence

    for i in 1..=la {
        for j in 1..=lb {
            e[[i, j]] = (h[[i, j - 1]] - open - ext).max(e[[i, j - 1]] - ext);
            f[[i, j]] = (h[[i - 1, j]] - open - ext).max(f[[i - 1, j]] - ext);
            let diag = h[[i - 1, j - 1]] + score_pair(sa[i - 1], sb[j - 1]);
            h[[i, j]] = 0.max(diag).max(e[[i, j]]).max(f[[i, j]]);
        }
    }

    let mut best = 0;
    let mut start = (0usize, 0usize);
    for i in 0..=la {
        for j in 0..=lb {
            if h[[i, j]] > best {
                best = h[[i, j]];
                start = (i, j);
            }
        }
    }
    if best == 0 {
        return AlignOutcome {
            score: 0,
            identity: 0.0,
        };
    }

    let identity = traceback_identity(&h, sa, sb, start, open, ext);
    AlignOutcome {
        score: best,
        identity,
    }
}

/// Walk the documented traceback over the H matrix, returning
/// matches / alignment length. The gap scans are valid because the affine
/// recurrences unroll to `max_L H[·−L] − open − L·ext`.
pub(crate) fn traceback_identity(
    h: &Array2<i32>,
    sa: &[u8],
    sb: &[u8],
    start: (usize, usize),
    open: i32,
    ext: i32,
) -> f64 {
    let (mut i, mut j) = start;
    let mut columns = 0usize;
    let mut matches = 0usize;
    loop {
        if h[[i, j]] == 0 {
            break;
        }
        if i > 0 && j > 0 && h[[i, j]] == h[[i - 1, j - 1]] + score_pair(sa[i - 1], sb[j - 1]) {
            columns += 1;
            if sa[i - 1] == sb[j - 1] {
                matches += 1;
            }
            i -= 1;
            j -= 1;
            continue;
        }
        let mut stepped = false;
        // Gap in the second sequence: consume rows.
        for len in 1..=i {
            if h[[i, j]] == h[[i - len, j]] - open - (len as i32) * ext {
                columns += len;
                i -= len;
                stepped = true;
                break;
            }
        }
        if stepped {
            continue;
        }
        // Gap in the first sequence: consume columns.
        for len in 1..=j {
            if h[[i, j]] == h[[i, j - len]] - open - (len as i32) * ext {
                columns += len;
                j -= len;
                stepped = true;
                break;
            }
        }
        debug_assert!(stepped, "traceback found no consistent predecessor");
        if !stepped {
            break;
        }
    }
    if columns == 0 {
        0.0
    } else {
        matches as f64 / columns as f64
    }
}

/// Pairwise sequence-identity matrix. Self-similarity is fixed at 1; each
/// unordered pair is aligned once and mirrored.
pub fn sw_similarity_matrix(seqs: &[Sequence], params: &AlignParams) -> Result<SimilarityMatrix> {
    params.validate()?;
    if seqs.is_empty() {
        return Err(Error::Data("no sequences given".into()));
    }
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let identities: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| smith_waterman_identity(&seqs[i], &seqs[j], params).identity)
        .collect();
    let mut values = Array2::eye(n);
    for (&(i, j), &v) in pairs.iter().zip(identities.iter()) {
        values[[i, j]] = v;
        values[[j, i]] = v;
    }
    let ids = seqs.iter().map(|s| s.id.clone()).collect();
    SimilarityMatrix::new(ids, values)
}
