//! In-memory composition of the monolingual path: vocabulary and embeddings
//! per language, unsupervised mapping, similarity and anchors.

use serde::{Deserialize, Serialize};

use crate::anchoring::{cosine_similarity_between, mutual_argmax, select_anchors, AnchorDictionary, AnchorPolicy, MutualArgmax, SimilarityMatrix};
use crate::corpus::{count_words, normalize_sentence, NormalizationConfig};
use crate::embeddings::{train_sgns, EmbeddingMatrix, SgnsConfig};
use crate::exec::Exec;
use crate::mapping::{normalize_embeddings, self_learn, unsupervised_init, MappedSpaces, SelfLearnConfig};
use crate::segmentation::{learn_bpe, learn_unigram, BpeConfig, Scheme, UnigramConfig, Vocabulary};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonolingualConfig {
    pub scheme: Scheme,
    pub vocab_size: usize,
    pub normalization: NormalizationConfig,
    pub sgns: SgnsConfig,
    pub mapping: SelfLearnConfig,
    pub policy: AnchorPolicy,
}

impl Default for MonolingualConfig {
    fn default() -> Self {
        MonolingualConfig {
            scheme: Scheme::Bpe,
            vocab_size: 20_000,
            normalization: NormalizationConfig::default(),
            sgns: SgnsConfig::default(),
            mapping: SelfLearnConfig::default(),
            policy: AnchorPolicy::All,
        }
    }
}

/// Normalizes raw lines, dropping those left empty.
pub fn normalize_lines<S: AsRef<str>>(raw: &[S], cfg: &NormalizationConfig) -> Vec<String> {
    raw.iter().filter_map(|l| normalize_sentence(l.as_ref(), cfg).ok()).collect()
}

pub fn learn_vocabulary<S: AsRef<str> + Sync>(
    sentences: &[S],
    language: &str,
    scheme: Scheme,
    size: usize,
    exec: Exec,
) -> Result<Vocabulary> {
    let counts = count_words(sentences, exec)?;
    match scheme {
        Scheme::Bpe => learn_bpe(&counts, size, language, &BpeConfig::default()),
        Scheme::UnigramLm => learn_unigram(&counts, size, language, &UnigramConfig::default()).map(|(v, _)| v),
    }
}

#[derive(Clone, Debug)]
pub struct PreparedSide {
    pub sentences: Vec<String>,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingMatrix,
}

pub fn prepare_side<S: AsRef<str>>(raw: &[S], language: &str, cfg: &MonolingualConfig, exec: Exec) -> Result<PreparedSide> {
    let sentences = normalize_lines(raw, &cfg.normalization);
    let vocab = learn_vocabulary(&sentences, language, cfg.scheme, cfg.vocab_size, exec)?;
    let embeddings = train_sgns(&sentences, &vocab, &cfg.sgns)?.matrix;
    Ok(PreparedSide {
        sentences,
        vocab,
        embeddings,
    })
}

/// Mapped embeddings of both sides, indexed by vocabulary ID. Only active
/// subwords take part in the mapping; every other row is zero.
#[derive(Clone, Debug)]
pub struct SharedSpace {
    pub x: EmbeddingMatrix,
    pub z: EmbeddingMatrix,
    pub l1_active: Vec<u32>,
    pub l2_active: Vec<u32>,
    pub mapped: MappedSpaces,
}

fn scatter(rows: &EmbeddingMatrix, ids: &[u32], total: usize) -> EmbeddingMatrix {
    let mut out = EmbeddingMatrix::zeros(total, rows.dim());
    for (k, &id) in ids.iter().enumerate() {
        out.row_mut(id as usize).copy_from_slice(rows.row(k));
    }
    out
}

pub fn map_spaces(
    v1: &Vocabulary,
    e1: &EmbeddingMatrix,
    v2: &Vocabulary,
    e2: &EmbeddingMatrix,
    cfg: &SelfLearnConfig,
    exec: Exec,
) -> Result<SharedSpace> {
    for (v, e) in [(v1, e1), (v2, e2)] {
        if e.rows() != v.len() {
            return Err(Error::VocabMismatch(format!(
                "{} has {} entries but {} embedding rows",
                v.language(),
                v.len(),
                e.rows()
            )));
        }
    }
    // Active IDs come in frequency order, so the induction prefix is the
    // most frequent subwords.
    let l1_active: Vec<u32> = v1.active_ids().collect();
    let l2_active: Vec<u32> = v2.active_ids().collect();
    let pick = |e: &EmbeddingMatrix, ids: &[u32]| e.select_rows(&ids.iter().map(|&i| i as usize).collect::<Vec<_>>());
    let x = normalize_embeddings(&pick(e1, &l1_active))?;
    let z = normalize_embeddings(&pick(e2, &l2_active))?;
    let seed = unsupervised_init(&x, &z, cfg.k_vocab, exec)?;
    log::info!(
        "seed dictionary: {} pairs, aligned similarity {:.3}",
        seed.pairs.len(),
        seed.mean_similarity
    );
    let mapped = self_learn(&x, &z, &seed, cfg, exec)?;
    Ok(SharedSpace {
        x: scatter(&mapped.x_mapped, &l1_active, v1.len()),
        z: scatter(&mapped.z_mapped, &l2_active, v2.len()),
        l1_active,
        l2_active,
        mapped,
    })
}

#[derive(Clone, Debug)]
pub struct Anchoring {
    pub similarity: SimilarityMatrix,
    pub mutual: MutualArgmax,
    pub anchors: AnchorDictionary,
}

pub fn anchor_shared_space(space: &SharedSpace, policy: AnchorPolicy, exec: Exec) -> Result<Anchoring> {
    let similarity = cosine_similarity_between(&space.x, &space.l1_active, &space.z, &space.l2_active, exec)?;
    let mutual = mutual_argmax(&similarity, exec);
    let anchors = select_anchors(&mutual.pairs, policy)?;
    Ok(Anchoring {
        similarity,
        mutual,
        anchors,
    })
}

#[derive(Clone, Debug)]
pub struct MonolingualOutput {
    pub l1: PreparedSide,
    pub l2: PreparedSide,
    pub space: SharedSpace,
    pub anchoring: Anchoring,
}

/// Runs the whole monolingual path on two raw corpora.
pub fn run_monolingual<S: AsRef<str>>(
    l1_raw: &[S],
    l2_raw: &[S],
    languages: (&str, &str),
    cfg: &MonolingualConfig,
    exec: Exec,
) -> Result<MonolingualOutput> {
    let l1 = prepare_side(l1_raw, languages.0, cfg, exec)?;
    let l2 = prepare_side(l2_raw, languages.1, cfg, exec)?;
    let space = map_spaces(&l1.vocab, &l1.embeddings, &l2.vocab, &l2.embeddings, &cfg.mapping, exec)?;
    let anchoring = anchor_shared_space(&space, cfg.policy, exec)?;
    Ok(MonolingualOutput {
        l1,
        l2,
        space,
        anchoring,
    })
}
