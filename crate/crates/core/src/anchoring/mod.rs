//! Cross-lingual similarity, mutual-argmax anchors and their selection.

mod classify;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMatrix;
use crate::exec::Exec;
use crate::linalg::{a_bt, DenseMatrix};
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

pub use classify::{ablation_anchor_sets, classify_shared_pairs, AblationSets, ClassificationReport, SharedPairClassification};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Cosine,
    /// Averaged translation probabilities. Zero means "never aligned" and
    /// such cells are never selected by the argmax.
    Bitext,
}

/// Scores between L1 subwords (rows) and L2 subwords (columns). Rows and
/// columns carry the vocabulary IDs they stand for.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    kind: SimilarityKind,
    row_ids: Vec<u32>,
    col_ids: Vec<u32>,
    scores: DenseMatrix,
}

impl SimilarityMatrix {
    pub fn new(kind: SimilarityKind, row_ids: Vec<u32>, col_ids: Vec<u32>, scores: DenseMatrix) -> Result<Self> {
        if scores.rows() != row_ids.len() || scores.cols() != col_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} scores for {} rows and {} columns",
                scores.rows(),
                scores.cols(),
                row_ids.len(),
                col_ids.len()
            )));
        }
        let (lo, hi) = match kind {
            SimilarityKind::Cosine => (-1.0, 1.0),
            SimilarityKind::Bitext => (0.0, 1.0),
        };
        const SLACK: f64 = 1e-9;
        if let Some(v) = scores.as_slice().iter().find(|v| !(**v >= lo - SLACK && **v <= hi + SLACK)) {
            return Err(Error::InvalidArgument(format!("{kind:?} similarity {v} outside [{lo}, {hi}]")));
        }
        Ok(SimilarityMatrix {
            kind,
            row_ids,
            col_ids,
            scores,
        })
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn row_ids(&self) -> &[u32] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[u32] {
        &self.col_ids
    }

    pub fn scores(&self) -> &DenseMatrix {
        &self.scores
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores.get(row, col)
    }

    /// Score column for one L2 ID, over all rows; `None` if the ID has no column.
    pub fn column_for(&self, l2_id: u32) -> Option<Vec<f64>> {
        let c = self.col_ids.iter().position(|&id| id == l2_id)?;
        Some(self.scores.column(c))
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityKind::Cosine => "cosine",
            SimilarityKind::Bitext => "bitext",
        })
    }
}

fn unit_rows(m: &EmbeddingMatrix) -> EmbeddingMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let n = out.row_norm(i);
        if n > 0.0 {
            out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

/// Cosine similarity between the selected rows of two mapped spaces.
/// Rows of `x` and `z` are indexed by vocabulary ID. Zero vectors score 0.
pub fn cosine_similarity_between(
    x: &EmbeddingMatrix,
    row_ids: &[u32],
    z: &EmbeddingMatrix,
    col_ids: &[u32],
    exec: Exec,
) -> Result<SimilarityMatrix> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch(format!("source dimension {}, target {}", x.dim(), z.dim())));
    }
    let out_of_range = |ids: &[u32], rows: usize| ids.iter().find(|&&i| i as usize >= rows).copied();
    if let Some(id) = out_of_range(row_ids, x.rows()).or(out_of_range(col_ids, z.rows())) {
        return Err(Error::VocabMismatch(format!("ID {id} has no embedding row")));
    }
    let rows: Vec<usize> = row_ids.iter().map(|&i| i as usize).collect();
    let cols: Vec<usize> = col_ids.iter().map(|&i| i as usize).collect();
    let xs = unit_rows(&x.select_rows(&rows));
    let zs = unit_rows(&z.select_rows(&cols));
    let mut scores = a_bt(&xs, &zs, exec)?;
    scores.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    SimilarityMatrix::new(SimilarityKind::Cosine, row_ids.to_vec(), col_ids.to_vec(), scores)
}

/// Cosine similarity between every row of `x` and every row of `z`.
pub fn cosine_similarity_matrix(x: &EmbeddingMatrix, z: &EmbeddingMatrix, exec: Exec) -> Result<SimilarityMatrix> {
    let rows: Vec<u32> = (0..x.rows() as u32).collect();
    let cols: Vec<u32> = (0..z.rows() as u32).collect();
    cosine_similarity_between(x, &rows, z, &cols, exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub source: u32,
    pub target: u32,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MutualArgmax {
    /// Sorted by source ID.
    pub pairs: Vec<ScoredPair>,
    /// Rows and columns whose maximum was attained more than once.
    pub ties: usize,
}

/// Best index and whether the maximum was shared. Zero cells of a bitext
/// matrix are skipped.
fn best(values: impl Iterator<Item = f64>, skip_zero: bool) -> Option<(usize, bool)> {
    let mut found: Option<(usize, f64, bool)> = None;
    for (i, v) in values.enumerate() {
        if v.is_nan() || (skip_zero && v == 0.0) {
            continue;
        }
        match found {
            Some((_, b, _)) if v < b => {}
            Some((k, b, _)) if v == b => found = Some((k, b, true)),
            _ => found = Some((i, v, false)),
        }
    }
    found.map(|(i, _, tie)| (i, tie))
}

/// Pairs `(i, j)` where `j` is the best column of row `i` and `i` the best
/// row of column `j`, ties resolved toward the lowest index.
pub fn mutual_argmax(s: &SimilarityMatrix, exec: Exec) -> MutualArgmax {
    let skip_zero = s.kind == SimilarityKind::Bitext;
    let sc = &s.scores;
    let fwd = exec.map_range(sc.rows(), |i| best(sc.row(i).iter().copied(), skip_zero));
    let t = sc.transpose();
    let bwd = exec.map_range(t.rows(), |j| best(t.row(j).iter().copied(), skip_zero));
    let ties = fwd.iter().chain(&bwd).filter(|b| b.is_some_and(|(_, tie)| tie)).count();
    if ties > 0 {
        log::info!("{ties} argmax ties resolved toward the lowest index");
    }
    let pairs = fwd
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let (j, _) = (*f)?;
            (bwd[j].map(|(b, _)| b) == Some(i)).then(|| ScoredPair {
                source: s.row_ids[i],
                target: s.col_ids[j],
                score: sc.get(i, j),
            })
        })
        .collect();
    MutualArgmax { pairs, ties }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum AnchorPolicy {
    All,
    TopK(usize),
    MinScore(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorDictionary {
    /// Sorted by score descending, then by `(source, target)`.
    pub pairs: Vec<ScoredPair>,
    /// Lowest score admitted, if any pair was kept.
    pub threshold_used: Option<f64>,
}

impl AnchorDictionary {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks the partial-matching invariant.
    pub fn is_matching(&self) -> bool {
        let mut src = std::collections::HashSet::new();
        let mut trg = std::collections::HashSet::new();
        self.pairs.iter().all(|p| src.insert(p.source) && trg.insert(p.target))
    }

    /// Writes `src_subword, tgt_subword, score, rank` rows (rank from 1).
    pub fn write_tsv(&self, path: &Path, v1: &Vocabulary, v2: &Vocabulary) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "src_subword\ttgt_subword\tscore\trank")?;
        for (rank, p) in self.pairs.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t{}", v1.surface(p.source), v2.surface(p.target), p.score, rank + 1)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv(path: &Path, v1: &Vocabulary, v2: &Vocabulary) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut pairs = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if n == 0 || line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: n + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let source = v1.id(cols[0]).ok_or_else(|| err(format!("unknown L1 subword {:?}", cols[0])))?;
            let target = v2.id(cols[1]).ok_or_else(|| err(format!("unknown L2 subword {:?}", cols[1])))?;
            let score = cols[2].parse().map_err(|e| err(format!("bad score: {e}")))?;
            pairs.push(ScoredPair { source, target, score });
        }
        sort_pairs(&mut pairs);
        let dict = AnchorDictionary {
            threshold_used: pairs.last().map(|p| p.score),
            pairs,
        };
        if !dict.is_matching() {
            return Err(Error::InvalidArgument("anchor file pairs a subword more than once".into()));
        }
        Ok(dict)
    }
}

fn sort_pairs(pairs: &mut [ScoredPair]) {
    pairs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.source.cmp(&b.source))
            .then(a.target.cmp(&b.target))
    });
}

pub fn select_anchors(pairs: &[ScoredPair], policy: AnchorPolicy) -> Result<AnchorDictionary> {
    let mut sorted = pairs.to_vec();
    sort_pairs(&mut sorted);
    match policy {
        AnchorPolicy::All => {}
        AnchorPolicy::TopK(k) => {
            if k > sorted.len() {
                return Err(Error::InsufficientAnchors {
                    requested: k,
                    available: sorted.len(),
                });
            }
            sorted.truncate(k);
        }
        AnchorPolicy::MinScore(t) => sorted.retain(|p| p.score >= t),
    }
    Ok(AnchorDictionary {
        threshold_used: sorted.last().map(|p| p.score),
        pairs: sorted,
    })
}
