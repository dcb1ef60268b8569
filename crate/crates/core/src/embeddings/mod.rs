//! Dense subword embeddings: storage, word2vec text I/O and training.

mod sgns;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::{Error, Result};

pub use sgns::{train_sgns, train_sgns_ids, SgnsConfig, TrainedEmbeddings, Workers};

/// Row-major `rows x dim` matrix of f64 vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{dim} matrix",
                data.len()
            )));
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!("row {i} has {} values, expected {dim}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingMatrix {
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1)).take(self.rows)
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, ids: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingMatrix {
            rows: ids.len(),
            dim: self.dim,
            data,
        }
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Writes `count dim` followed by one `label v1 ... vd` line per row.
pub fn write_word2vec<S: AsRef<str>>(path: &Path, labels: &[S], matrix: &EmbeddingMatrix) -> Result<()> {
    if labels.len() != matrix.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.rows()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {}", matrix.rows(), matrix.dim())?;
    for (label, row) in labels.iter().zip(matrix.iter_rows()) {
        w.write_all(label.as_ref().as_bytes())?;
        for v in row {
            write!(w, " {v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_word2vec(path: &Path) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })??;
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad row count".into()))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad dimension".into()))?;
    let mut labels = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let label = parts.next().unwrap_or_default().to_owned();
        let before = data.len();
        for p in parts.filter(|p| !p.is_empty()) {
            data.push(p.parse::<f64>().map_err(|e| parse_err(n + 2, e.to_string()))?);
        }
        if data.len() - before != dim {
            return Err(parse_err(n + 2, format!("expected {dim} values, got {}", data.len() - before)));
        }
        labels.push(label);
    }
    if labels.len() != rows {
        return Err(parse_err(1, format!("header announces {rows} rows, file has {}", labels.len())));
    }
    Ok((labels, EmbeddingMatrix::from_vec(rows, dim, data)?))
}
