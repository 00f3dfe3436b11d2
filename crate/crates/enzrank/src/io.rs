//! File formats: label TSV, similarity/kernel CSV, FASTA, point-cloud JSON
//! and rank-model serialization.
//!
//! The text parsers are strict and total: any malformed input yields an
//! error naming the offending line, never a panic. `parse_*` functions work
//! on in-memory strings (they are also the fuzzing entry points); `read_*` /
//! `write_*` wrap file I/O around them.
//!
//! Formats:
//!
//! - **Labels** — UTF-8 TSV, two columns `id<TAB>ec`; `#` starts a comment
//!   line; blank lines are ignored; ids must be unique.
//! - **Similarity / kernel matrices** — CSV; first row `id,<id1>,...,<idn>`,
//!   then one row per object: `id_i,v_1,...,v_n` with the row ids repeating
//!   the header ids in order. Values are finite decimals; floats are written
//!   in shortest round-trip form so a write/parse cycle is bit-exact.
//! - **Sequences** — FASTA; the id is the first whitespace-delimited token
//!   after `>`.
//! - **Point clouds** — a JSON array of
//!   `{"id": ..., "centers": [{"x","y","z","label"}, ...]}` objects with the
//!   seven-kind label vocabulary.
//! - **Rank models** — coefficient matrix in the shared CSV format (header =
//!   training ids) plus a JSON sidecar `{lambda, solver_mode, residual,
//!   train_ids_hash}`; the hash guards against mixing sidecars and matrices.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ec::EcNumber;
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, SimilarityMatrix};
use crate::providers::{LabeledPointCloud, Sequence};
use crate::ranker::RankModel;

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Labels (TSV)
// ---------------------------------------------------------------------------

pub fn parse_labels_tsv(text: &str) -> Result<Vec<(String, EcNumber)>> {
    let mut labels = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let ec_text = fields.next().ok_or_else(|| Error::Parse {
            line: lineno + 1,
            msg: "expected two tab-separated columns (id, ec)".into(),
        })?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "too many columns; expected id<TAB>ec".into(),
            });
        }
        if id.is_empty() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "empty id".into(),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("duplicate id {id:?}"),
            });
        }
        let ec = EcNumber::parse(ec_text).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        labels.push((id.to_string(), ec));
    }
    if labels.is_empty() {
        return Err(Error::Data("label file contains no entries".into()));
    }
    Ok(labels)
}

pub fn read_labels_tsv(path: &Path) -> Result<Vec<(String, EcNumber)>> {
    parse_labels_tsv(&read_to_string(path)?)
}

pub fn labels_tsv_string(labels: &[(String, EcNumber)]) -> String {
    let mut out = String::from("# id\tec\n");
    for (id, ec) in labels {
        out.push_str(id);
        out.push('\t');
        out.push_str(&ec.to_string());
        out.push('\n');
    }
    out
}

pub fn write_labels_tsv(path: &Path, labels: &[(String, EcNumber)]) -> Result<()> {
    write_string(path, &labels_tsv_string(labels))
}

// ---------------------------------------------------------------------------
// Similarity / kernel matrices (CSV)
// ---------------------------------------------------------------------------

fn matrix_csv_string(ids: &[String], values: &Array2<f64>) -> String {
    let mut out = String::from("id");
    for id in ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..ids.len() {
            out.push(',');
            out.push_str(&format!("{}", values[[i, j]]));
        }
        out.push('\n');
    }
    out
}

fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Array2<f64>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header.trim_end_matches('\r');
    let mut cells = header.split(',');
    if cells.next() != Some("id") {
        return Err(Error::Parse {
            line: 1,
            msg: "header must start with the literal cell 'id'".into(),
        });
    }
    let ids: Vec<String> = cells.map(str::to_string).collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "header names no objects".into(),
        });
    }
    if ids.iter().any(|id| id.is_empty()) {
        return Err(Error::Parse {
            line: 1,
            msg: "header contains an empty id".into(),
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row_index = rows.len();
        if row_index >= n {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("more than {n} data rows"),
            });
        }
        let mut cells = line.split(',');
        let row_id = cells.next().unwrap_or_default();
        if row_id != ids[row_index] {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!(
                    "row id {row_id:?} does not match header id {:?} at position {}",
                    ids[row_index],
                    row_index + 1
                ),
            });
        }
        let mut row = Vec::with_capacity(n);
        for cell in cells {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("non-finite value {value}"),
                });
            }
            row.push(value);
        }
        if row.len() != n {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected {n} values, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Data(format!(
            "matrix has {} data rows but the header names {n} objects",
            rows.len()
        )));
    }
    let values = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
    Ok((ids, values))
}

pub fn parse_similarity_csv(text: &str) -> Result<SimilarityMatrix> {
    let (ids, values) = parse_matrix_csv(text)?;
    SimilarityMatrix::new(ids, values)
}

pub fn read_similarity_csv(path: &Path) -> Result<SimilarityMatrix> {
    parse_similarity_csv(&read_to_string(path)?)
}

pub fn similarity_csv_string(m: &SimilarityMatrix) -> String {
    matrix_csv_string(m.ids(), m.values())
}

pub fn write_similarity_csv(path: &Path, m: &SimilarityMatrix) -> Result<()> {
    write_string(path, &similarity_csv_string(m))
}

pub fn kernel_csv_string(k: &KernelMatrix) -> String {
    matrix_csv_string(k.ids(), k.values())
}

pub fn write_kernel_csv(path: &Path, k: &KernelMatrix) -> Result<()> {
    write_string(path, &kernel_csv_string(k))
}

// ---------------------------------------------------------------------------
// FASTA
// ---------------------------------------------------------------------------

pub fn parse_fasta(text: &str) -> Result<Vec<Sequence>> {
    let mut sequences = Vec::new();
    let mut current: Option<(usize, String, String)> = None; // (line, id, residues)
    let mut seen = std::collections::HashSet::new();

    let finish = |entry: Option<(usize, String, String)>,
                      out: &mut Vec<Sequence>|
     -> Result<()> {
        if let Some((lineno, id, residues)) = entry {
            let seq = Sequence::new(id, &residues).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            out.push(seq);
        }
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('>') {
            finish(current.take(), &mut sequences)?;
            let id = rest.split_whitespace().next().unwrap_or_default().to_string();
            if id.is_empty() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "header carries no id".into(),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("duplicate sequence id {id:?}"),
                });
            }
            current = Some((lineno + 1, id, String::new()));
        } else {
            match current.as_mut() {
                Some((_, _, residues)) => residues.push_str(line.trim()),
                None => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "sequence data before the first '>' header".into(),
                    })
                }
            }
        }
    }
    finish(current.take(), &mut sequences)?;
    if sequences.is_empty() {
        return Err(Error::Data("FASTA file contains no sequences".into()));
    }
    Ok(sequences)
}

pub fn read_fasta(path: &Path) -> Result<Vec<Sequence>> {
    parse_fasta(&read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Point clouds (JSON)
// ---------------------------------------------------------------------------

pub fn parse_point_clouds(text: &str) -> Result<Vec<LabeledPointCloud>> {
    let clouds: Vec<LabeledPointCloud> = serde_json::from_str(text)
        .map_err(|e| Error::Data(format!("point-cloud JSON: {e}")))?;
    if clouds.is_empty() {
        return Err(Error::Data("point-cloud file contains no clouds".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for cloud in &clouds {
        cloud.validate()?;
        if !seen.insert(cloud.id.clone()) {
            return Err(Error::Data(format!("duplicate cloud id {:?}", cloud.id)));
        }
    }
    Ok(clouds)
}

pub fn read_point_clouds(path: &Path) -> Result<Vec<LabeledPointCloud>> {
    parse_point_clouds(&read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Rank models
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ModelSidecar {
    lambda: f64,
    solver_mode: String,
    residual: f64,
    train_ids_hash: String,
}

fn train_ids_hash(ids: &[String]) -> String {
    let mut hasher = Sha256::new();
    for id in ids {
        hasher.update(id.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Write `<stem>.csv` (coefficients) and `<stem>.json` (sidecar).
pub fn save_model(stem: &Path, model: &RankModel) -> Result<()> {
    let csv = matrix_csv_string(model.train_ids(), model.coefficients());
    write_string(&stem.with_extension("csv"), &csv)?;
    let sidecar = ModelSidecar {
        lambda: model.lambda(),
        solver_mode: model.solver_mode().to_string(),
        residual: model.residual(),
        train_ids_hash: train_ids_hash(model.train_ids()),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_string(&stem.with_extension("json"), &json)
}

pub fn load_model(stem: &Path) -> Result<RankModel> {
    let csv_path = stem.with_extension("csv");
    let (ids, coefficients) = parse_matrix_csv(&read_to_string(&csv_path)?)?;
    let json_path = stem.with_extension("json");
    let sidecar: ModelSidecar =
        serde_json::from_str(&read_to_string(&json_path)?).map_err(|source| Error::Json {
            path: json_path.clone(),
            source,
        })?;
    if sidecar.train_ids_hash != train_ids_hash(&ids) {
        return Err(Error::Data(format!(
            "model sidecar {} does not match the coefficient matrix (train id hash differs)",
            json_path.display()
        )));
    }
    let mode = match sidecar.solver_mode.as_str() {
        "direct" => "direct",
        "iterative" => "iterative",
        other => {
            return Err(Error::Data(format!("unknown solver mode {other:?} in sidecar")));
        }
    };
    Ok(RankModel::from_parts(
        coefficients,
        ids,
        sidecar.lambda,
        sidecar.residual,
        mode,
    ))
}
