//! EC (Enzyme Commission) labels and the graded catalytic similarity they
//! induce.
//!
//! An EC number is a four-level hierarchical class code such as `2.4.2.23`.
//! The catalytic similarity of two labels is the number of leading levels
//! they share, an integer grade in `0..=4`; grade matrices over an object set
//! provide the graded ground-truth relevance for ranking evaluation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A fully resolved four-level EC class label.
///
/// Each level is a positive integer. Preliminary or partial labels
/// (`n1.-.-.-` style wildcards) are rejected rather than guessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EcNumber {
    digits: [u32; 4],
}

impl EcNumber {
    pub fn new(l1: u32, l2: u32, l3: u32, l4: u32) -> Result<Self> {
        let digits = [l1, l2, l3, l4];
        if let Some(pos) = digits.iter().position(|&d| d == 0) {
            return Err(Error::EcLabel {
                label: format!("{l1}.{l2}.{l3}.{l4}"),
                msg: format!("field {}: level must be >= 1", pos + 1),
            });
        }
        Ok(EcNumber { digits })
    }

    /// Parse a textual label `a.b.c.d`. Leading zeros are normalized away
    /// (`01.1.1.1` parses as `1.1.1.1`); the display form is canonical.
    pub fn parse(text: &str) -> Result<Self> {
        let err = |msg: String| Error::EcLabel {
            label: text.to_string(),
            msg,
        };
        if text.is_empty() {
            return Err(err("empty label".into()));
        }
        let fields: Vec<&str> = text.split('.').collect();
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 dot-separated fields, found {}",
                fields.len()
            )));
        }
        let mut digits = [0u32; 4];
        for (k, field) in fields.iter().enumerate() {
            let value: u32 = field
                .parse()
                .map_err(|_| err(format!("field {}: {:?} is not an integer", k + 1, field)))?;
            if value == 0 {
                return Err(err(format!("field {}: level must be >= 1", k + 1)));
            }
            digits[k] = value;
        }
        Ok(EcNumber { digits })
    }

    pub fn digits(&self) -> [u32; 4] {
        self.digits
    }
}

impl FromStr for EcNumber {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EcNumber::parse(s)
    }
}

impl fmt::Display for EcNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.digits;
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

/// Catalytic similarity of two labels: the length of the longest common
/// prefix of their four levels, in `0..=4`. Symmetric; equals 4 iff the
/// labels are identical.
pub fn catalytic_similarity(a: &EcNumber, b: &EcNumber) -> u8 {
    let mut grade = 0u8;
    for (x, y) in a.digits.iter().zip(b.digits.iter()) {
        if x != y {
            break;
        }
        grade += 1;
    }
    grade
}

/// Square matrix of catalytic similarity grades over an indexed object set.
///
/// Symmetric with an all-4 diagonal; entry `(i, j)` is the grade of objects
/// `i` and `j`.
#[derive(Debug, Clone)]
pub struct CatalyticSimilarityMatrix {
    ids: Vec<String>,
    grades: Array2<u8>,
    index: HashMap<String, usize>,
}

impl CatalyticSimilarityMatrix {
    pub fn from_labels(labels: &[(String, EcNumber)]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("label list is empty".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (pos, (id, _)) in labels.iter().enumerate() {
            if index.insert(id.clone(), pos).is_some() {
                return Err(Error::Data(format!("duplicate object id {id:?}")));
            }
        }
        let n = labels.len();
        let grades = Array2::from_shape_fn((n, n), |(i, j)| {
            catalytic_similarity(&labels[i].1, &labels[j].1)
        });
        let ids = labels.iter().map(|(id, _)| id.clone()).collect();
        Ok(CatalyticSimilarityMatrix { ids, grades, index })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn grades(&self) -> &Array2<u8> {
        &self.grades
    }

    pub fn grade(&self, i: usize, j: usize) -> u8 {
        self.grades[[i, j]]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Wrap precomputed grades. Leakage tests use this to inject corrupted
    /// matrices that no label list would generate.
    #[doc(hidden)]
    pub fn from_raw_parts(ids: Vec<String>, grades: Array2<u8>) -> Self {
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        CatalyticSimilarityMatrix { ids, grades, index }
    }
}

/// Graded relevance list for one query: `(db_id, grade)` pairs sorted by
/// descending grade. The query itself is dropped from `db_ids` if present.
/// Ties keep the input order of `db_ids` (stable sort); any total order
/// consistent with descending grade is equally valid downstream.
pub fn ground_truth_order(
    query_id: &str,
    db_ids: &[String],
    q: &CatalyticSimilarityMatrix,
) -> Result<Vec<(String, u8)>> {
    let qi = q
        .index_of(query_id)
        .ok_or_else(|| Error::Data(format!("unknown query id {query_id:?}")))?;
    let mut out = Vec::with_capacity(db_ids.len());
    for id in db_ids {
        if id == query_id {
            continue;
        }
        let di = q
            .index_of(id)
            .ok_or_else(|| Error::Data(format!("unknown db id {id:?}")))?;
        out.push((id.clone(), q.grade(qi, di)));
    }
    out.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(out)
}
