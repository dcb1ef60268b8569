use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sparsemax;
use crate::anchoring::{AnchorDictionary, SimilarityMatrix};
use crate::embeddings::{write_word2vec, EmbeddingMatrix};
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutMode {
    ShareOnly,
    ShareAlign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub seed: u64,
    pub random_std: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig { seed: 0, random_std: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    /// Shares the parameters of this L1 row.
    Tied(u32),
    Init(Vec<f64>),
    /// Normal draws with the layout's standard deviation from this seed.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    pub mode: LayoutMode,
    pub random_std: f64,
    pub dim: usize,
    pub special_token_policy: String,
    /// One disposition per L2 ID.
    pub l2_rows: Vec<Disposition>,
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    mode: LayoutMode,
    random_std: f64,
    dim: usize,
    special_token_policy: String,
    sharing_percentage: f64,
    rows: BTreeMap<String, Disposition>,
}

fn row_seed(seed: u64, id: u32) -> u64 {
    // splitmix64 finalizer, so neighbouring IDs get unrelated streams
    let mut z = seed.wrapping_add((id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl EmbeddingLayout {
    pub fn tied_count(&self) -> usize {
        self.l2_rows.iter().filter(|d| matches!(d, Disposition::Tied(_))).count()
    }

    pub fn random_count(&self) -> usize {
        self.l2_rows.iter().filter(|d| matches!(d, Disposition::Random(_))).count()
    }

    /// Tied rows over all L2 rows, in percent.
    pub fn sharing_percentage(&self) -> f64 {
        if self.l2_rows.is_empty() {
            return 0.0;
        }
        100.0 * self.tied_count() as f64 / self.l2_rows.len() as f64
    }

    /// Concrete L2 embedding matrix.
    pub fn materialize(&self, e1: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if e1.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!("layout dimension {}, L1 embeddings {}", self.dim, e1.dim())));
        }
        let normal = Normal::new(0.0, self.random_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut out = EmbeddingMatrix::zeros(self.l2_rows.len(), self.dim);
        for (i, d) in self.l2_rows.iter().enumerate() {
            let row = out.row_mut(i);
            match d {
                Disposition::Tied(a) => {
                    if *a as usize >= e1.rows() {
                        return Err(Error::VocabMismatch(format!("tied row {a} beyond {} L1 rows", e1.rows())));
                    }
                    row.copy_from_slice(e1.row(*a as usize));
                }
                Disposition::Init(v) => row.copy_from_slice(v),
                Disposition::Random(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    row.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
                }
            }
        }
        Ok(out)
    }

    pub fn write_word2vec(&self, path: &Path, e1: &EmbeddingMatrix, v2: &Vocabulary) -> Result<()> {
        let labels: Vec<&str> = (0..v2.len() as u32).map(|i| v2.surface(i)).collect();
        write_word2vec(path, &labels, &self.materialize(e1)?)
    }

    pub fn save_json(&self, path: &Path, v2: &Vocabulary) -> Result<()> {
        if v2.len() != self.l2_rows.len() {
            return Err(Error::VocabMismatch(format!("{} layout rows for {} L2 subwords", self.l2_rows.len(), v2.len())));
        }
        let file = LayoutFile {
            mode: self.mode,
            random_std: self.random_std,
            dim: self.dim,
            special_token_policy: self.special_token_policy.clone(),
            sharing_percentage: self.sharing_percentage(),
            rows: self
                .l2_rows
                .iter()
                .enumerate()
                .map(|(i, d)| (v2.surface(i as u32).to_owned(), d.clone()))
                .collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path, v2: &Vocabulary) -> Result<Self> {
        let mut file: LayoutFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut l2_rows = Vec::with_capacity(v2.len());
        for i in 0..v2.len() as u32 {
            let s = v2.surface(i);
            l2_rows.push(
                file.rows
                    .remove(s)
                    .ok_or_else(|| Error::VocabMismatch(format!("layout has no row for {s:?}")))?,
            );
        }
        Ok(EmbeddingLayout {
            mode: file.mode,
            random_std: file.random_std,
            dim: file.dim,
            special_token_policy: file.special_token_policy,
            l2_rows,
        })
    }
}

/// Dispositions for every L2 row: anchored subwords and special tokens are
/// tied to L1; the rest are random (share-only) or a sparsemax-weighted sum
/// of L1 rows taken from the L2 subword's similarity column (share+align).
pub fn build_lm_layout(
    v1: &Vocabulary,
    v2: &Vocabulary,
    anchors: &AnchorDictionary,
    e1: &EmbeddingMatrix,
    s: Option<&SimilarityMatrix>,
    mode: LayoutMode,
    cfg: &LayoutConfig,
) -> Result<EmbeddingLayout> {
    if mode == LayoutMode::ShareAlign && s.is_none() {
        return Err(Error::MissingSimilarity);
    }
    if !(cfg.random_std > 0.0 && cfg.random_std.is_finite()) {
        return Err(Error::InvalidArgument("random_std must be positive".into()));
    }
    if e1.rows() != v1.len() {
        return Err(Error::VocabMismatch(format!("{} L1 embedding rows for {} L1 subwords", e1.rows(), v1.len())));
    }
    let tied: HashMap<u32, u32> = anchors.pairs.iter().map(|p| (p.target, p.source)).collect();
    let columns: HashMap<u32, usize> = s
        .map(|s| s.col_ids().iter().enumerate().map(|(c, &id)| (id, c)).collect())
        .unwrap_or_default();
    let mut supports = Vec::new();
    let mut l2_rows = Vec::with_capacity(v2.len());
    for b in 0..v2.len() as u32 {
        let disposition = if v2.is_special(b) {
            match v1.id(v2.surface(b)) {
                Some(a) => Disposition::Tied(a),
                None => Disposition::Random(row_seed(cfg.seed, b)),
            }
        } else if let Some(&a) = tied.get(&b) {
            Disposition::Tied(a)
        } else if let (LayoutMode::ShareAlign, Some(s), Some(&c)) = (mode, s, columns.get(&b)) {
            let p = sparsemax(&s.scores().column(c))?;
            let mut v = vec![0.0; e1.dim()];
            let mut support = 0;
            for (r, &w) in p.iter().enumerate() {
                if w > 0.0 {
                    support += 1;
                    let row = e1.row(s.row_ids()[r] as usize);
                    v.iter_mut().zip(row).for_each(|(x, y)| *x += w * y);
                }
            }
            supports.push(support);
            if support == 0 {
                Disposition::Random(row_seed(cfg.seed, b))
            } else {
                Disposition::Init(v)
            }
        } else {
            Disposition::Random(row_seed(cfg.seed, b))
        };
        l2_rows.push(disposition);
    }
    if !supports.is_empty() {
        let mean = supports.iter().sum::<usize>() as f64 / supports.len() as f64;
        log::info!("sparsemax initialized {} rows, mean support {mean:.2}", supports.len());
    }
    Ok(EmbeddingLayout {
        mode,
        random_std: cfg.random_std,
        dim: e1.dim(),
        special_token_policy: "tied to the L1 token with the same surface".into(),
        l2_rows,
    })
}
