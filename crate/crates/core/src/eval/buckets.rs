//! Sentences grouped by how many of their tokens are false positives or
//! false negatives of the anchoring.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bleu::{corpus_bleu, Smoothing};
use crate::anchoring::SharedPairClassification;
use crate::exec::Exec;
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

/// Bucket boundaries 10%, 20%, …, 50%: six buckets, the last one `≥ 50%`.
pub const DEFAULT_EDGES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Which language the corpus is written in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Source,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketedCorpus {
    pub edges: Vec<f64>,
    /// Per sentence, the fraction of non-special tokens that are FP/FN.
    pub fractions: Vec<f64>,
    /// Per sentence, its bucket index.
    pub buckets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
}

pub type BucketReport = BTreeMap<String, BucketStats>;

fn validate_edges(edges: &[f64]) -> Result<()> {
    let inside = edges.iter().all(|&e| e > 0.0 && e < 1.0);
    let increasing = edges.windows(2).all(|w| w[0] < w[1]);
    if !inside || !increasing {
        return Err(Error::InvalidArgument(format!(
            "bucket edges must increase strictly inside (0, 1), got {edges:?}"
        )));
    }
    Ok(())
}

impl BucketedCorpus {
    pub fn num_buckets(&self) -> usize {
        self.edges.len() + 1
    }

    /// `[lo, hi)` labels; they sort in bucket order.
    pub fn labels(&self) -> Vec<String> {
        let mut bounds = vec![0.0];
        bounds.extend(&self.edges);
        bounds.push(1.0);
        bounds
            .windows(2)
            .enumerate()
            .map(|(b, w)| {
                let close = if b == self.edges.len() { ']' } else { ')' };
                format!("[{:.2}, {:.2}{close}", w[0], w[1])
            })
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_buckets()];
        for &b in &self.buckets {
            out[b] += 1;
        }
        out
    }

    /// Sentence counts per bucket, with BLEU of the given translations over
    /// each non-empty bucket when they are supplied.
    pub fn report<H: AsRef<str>, R: AsRef<str>>(&self, translations: Option<(&[H], &[R])>) -> Result<BucketReport> {
        if let Some((h, r)) = translations {
            if h.len() != self.buckets.len() || r.len() != self.buckets.len() {
                return Err(Error::LineCountMismatch {
                    left: h.len(),
                    right: self.buckets.len(),
                    first_unmatched: h.len().min(r.len()).min(self.buckets.len()) + 1,
                });
            }
        }
        let mut out = BucketReport::new();
        for (b, (label, count)) in self.labels().into_iter().zip(self.counts()).enumerate() {
            let bleu = match translations {
                Some((h, r)) if count > 0 => {
                    let idx: Vec<usize> = (0..self.buckets.len()).filter(|&i| self.buckets[i] == b).collect();
                    let hs: Vec<&str> = idx.iter().map(|&i| h[i].as_ref()).collect();
                    let rs: Vec<&str> = idx.iter().map(|&i| r[i].as_ref()).collect();
                    Some(corpus_bleu(&hs, &rs, Smoothing::None)?.score)
                }
                _ => None,
            };
            out.insert(label, BucketStats { count, bleu });
        }
        Ok(out)
    }
}

pub fn save_report(report: &BucketReport, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Buckets normalized sentences written in the `side` language, encoded
/// with that side's vocabulary. False-positive members are the identical
/// surfaces left unshared (including reclassified ones); false-negative
/// members are the `side` IDs of differently spelled anchors. Special
/// tokens count neither in the numerator nor the denominator.
pub fn bucket_by_fpfn<S: AsRef<str> + Sync>(
    sentences: &[S],
    vocab: &Vocabulary,
    class: &SharedPairClassification,
    side: Side,
    edges: &[f64],
    exec: Exec,
) -> Result<BucketedCorpus> {
    validate_edges(edges)?;
    let mut members: HashSet<u32> = class
        .false_positives
        .iter()
        .chain(&class.reclassified)
        .filter_map(|s| vocab.id(s))
        .collect();
    members.extend(class.false_negatives.iter().map(|&(a, b)| match side {
        Side::Source => a,
        Side::Target => b,
    }));
    let encoded = vocab.encode_corpus(sentences, exec);
    let fractions: Vec<f64> = encoded
        .iter()
        .map(|ids| {
            let tokens: Vec<u32> = ids.iter().copied().filter(|&id| !vocab.is_special(id)).collect();
            if tokens.is_empty() {
                return 0.0;
            }
            tokens.iter().filter(|id| members.contains(id)).count() as f64 / tokens.len() as f64
        })
        .collect();
    let buckets = fractions.iter().map(|&f| edges.iter().filter(|&&e| f >= e).count()).collect();
    Ok(BucketedCorpus {
        edges: edges.to_vec(),
        fractions,
        buckets,
    })
}
