//! Intrinsic and corpus-level evaluation: bilingual lexicon induction with
//! CSLS retrieval, FP/FN sentence bucketing and corpus BLEU.

mod bleu;
mod buckets;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchoring::cosine_similarity_matrix;
use crate::corpus::{normalize_sentence, NormalizationConfig, BOUNDARY};
use crate::csls::csls_matrix;
use crate::embeddings::EmbeddingMatrix;
use crate::exec::Exec;
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

pub use bleu::{corpus_bleu, tokenize_13a, BleuScore, Smoothing};
pub use buckets::{bucket_by_fpfn, save_report, BucketReport, BucketStats, BucketedCorpus, Side, DEFAULT_EDGES};

/// Neighbourhood size for CSLS retrieval.
pub const DEFAULT_CSLS_K: usize = 10;

/// A vocabulary together with the embedding rows of its IDs.
#[derive(Clone, Copy)]
pub struct EvalSpace<'a> {
    pub vocab: &'a Vocabulary,
    pub embeddings: &'a EmbeddingMatrix,
}

/// Mean embedding of the non-special subwords of `word`, or `None` when the
/// word normalizes to nothing or encodes entirely to unknown pieces.
pub fn word_vector(word: &str, space: EvalSpace<'_>, norm: &NormalizationConfig) -> Result<Option<Vec<f64>>> {
    if space.embeddings.rows() < space.vocab.len() {
        return Err(Error::VocabMismatch(format!(
            "{} embedding rows for {} vocabulary entries",
            space.embeddings.rows(),
            space.vocab.len()
        )));
    }
    let Ok(text) = normalize_sentence(word, norm) else {
        return Ok(None);
    };
    let ids: Vec<u32> = space
        .vocab
        .encode(&text)
        .token_ids
        .into_iter()
        .filter(|&id| !space.vocab.is_special(id))
        .collect();
    // A bare boundary marker carries no content of its own.
    let marker = BOUNDARY.to_string();
    if ids.iter().all(|&id| space.vocab.surface(id) == marker) {
        return Ok(None);
    }
    let mut mean = vec![0.0; space.embeddings.dim()];
    for &id in &ids {
        for (m, v) in mean.iter_mut().zip(space.embeddings.row(id as usize)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= ids.len() as f64);
    Ok(Some(mean))
}

/// Ranks every candidate for every query by CSLS over cosine similarity.
/// Ties go to the lower candidate index.
pub fn csls_retrieve(
    queries: &EmbeddingMatrix,
    candidates: &EmbeddingMatrix,
    k: usize,
    exec: Exec,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k >= candidates.rows() {
        return Err(Error::NeighbourhoodTooLarge {
            k,
            candidates: candidates.rows(),
        });
    }
    let sim = cosine_similarity_matrix(queries, candidates, exec)?;
    let scores = csls_matrix(sim.scores(), k, exec)?;
    Ok(exec.map_range(queries.rows(), |i| {
        let row = scores.row(i);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        order
    }))
}

/// Source words with their gold translations, MUSE style.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BliTestSet {
    pub pairs: Vec<(String, BTreeSet<String>)>,
    pub filtered_identical: bool,
}

impl BliTestSet {
    /// Groups `(source, target)` pairs by source, keeping first-seen order.
    pub fn from_pairs<S: AsRef<str>, T: AsRef<str>>(pairs: impl IntoIterator<Item = (S, T)>) -> Self {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut out: Vec<(String, BTreeSet<String>)> = Vec::new();
        for (s, t) in pairs {
            let s = s.as_ref().to_owned();
            let slot = *index.entry(s.clone()).or_insert_with(|| {
                out.push((s, BTreeSet::new()));
                out.len() - 1
            });
            out[slot].1.insert(t.as_ref().to_owned());
        }
        BliTestSet {
            pairs: out,
            filtered_identical: false,
        }
    }

    /// Parses `source<TAB>target` lines (a single space is accepted as the
    /// separator too). Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(['\t', ' ']).filter(|p| !p.is_empty());
            match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(t), None) => pairs.push((s.to_owned(), t.to_owned())),
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: "expected `source<TAB>target`".into(),
                    })
                }
            }
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn from_tsv(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Drops every source word that appears among its own gold targets.
    pub fn filtered(&self) -> Self {
        BliTestSet {
            pairs: self.pairs.iter().filter(|(s, g)| !g.contains(s)).cloned().collect(),
            filtered_identical: true,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BliEntry {
    pub source: String,
    pub predicted: String,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BliReport {
    pub precision_at_1: f64,
    pub evaluated: usize,
    pub filtered_identical: bool,
    /// Source words left out of the denominator because they encode to
    /// unknown pieces only.
    pub excluded_sources: Vec<String>,
    /// Gold targets that could not be represented and were not candidates.
    pub excluded_targets: Vec<String>,
    pub entries: Vec<BliEntry>,
}

impl BliReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Precision at 1 of CSLS retrieval. Candidates are all gold targets of the
/// test set; queries are its source words.
pub fn bli_precision_at_1(
    test: &BliTestSet,
    src: EvalSpace<'_>,
    tgt: EvalSpace<'_>,
    k: usize,
    norm: &NormalizationConfig,
    exec: Exec,
) -> Result<BliReport> {
    let mut excluded_targets = Vec::new();
    let mut cand_words = Vec::new();
    let mut cand_rows = Vec::new();
    let targets: BTreeSet<&String> = test.pairs.iter().flat_map(|(_, g)| g).collect();
    for t in targets {
        match word_vector(t, tgt, norm)? {
            Some(v) => {
                cand_words.push(t.clone());
                cand_rows.push(v);
            }
            None => {
                log::info!("BLI: target {t:?} has no known subwords, not a candidate");
                excluded_targets.push(t.clone());
            }
        }
    }

    let mut excluded_sources = Vec::new();
    let mut queries = Vec::new();
    let mut query_rows = Vec::new();
    for (s, gold) in &test.pairs {
        match word_vector(s, src, norm)? {
            Some(v) => {
                queries.push((s, gold));
                query_rows.push(v);
            }
            None => {
                log::info!("BLI: source {s:?} has no known subwords, excluded");
                excluded_sources.push(s.clone());
            }
        }
    }
    if queries.is_empty() || cand_rows.is_empty() {
        return Err(Error::NothingToEvaluate);
    }

    let q = EmbeddingMatrix::from_rows(&query_rows)?;
    let c = EmbeddingMatrix::from_rows(&cand_rows)?;
    let ranked = csls_retrieve(&q, &c, k, exec)?;
    let entries: Vec<BliEntry> = queries
        .iter()
        .zip(&ranked)
        .map(|((s, gold), order)| {
            let predicted = cand_words[order[0]].clone();
            BliEntry {
                source: (*s).clone(),
                correct: gold.contains(&predicted),
                predicted,
            }
        })
        .collect();
    let hits = entries.iter().filter(|e| e.correct).count();
    Ok(BliReport {
        precision_at_1: hits as f64 / entries.len() as f64,
        evaluated: entries.len(),
        filtered_identical: test.filtered_identical,
        excluded_sources,
        excluded_targets,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{default_specials, Entry, Scheme};
    use rand::{Rng, SeedableRng};

    fn word_vocab(lang: &str, words: &[&str]) -> Vocabulary {
        let mut entries: Vec<Entry> = ["▁"]
            .iter()
            .chain(words)
            .map(|w| Entry {
                subword: if *w == "▁" { w.to_string() } else { format!("▁{w}") },
                freq: 1,
                logprob: Some(-1.0),
            })
            .collect();
        // Single characters keep every word encodable.
        let mut chars: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
        chars.sort_unstable();
        chars.dedup();
        entries.extend(chars.into_iter().map(|c| Entry {
            subword: c.to_string(),
            freq: 1,
            logprob: None,
        }));
        Vocabulary::new(Scheme::UnigramLm, lang, default_specials(), entries, vec![])
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
        EmbeddingMatrix::from_vec(rows, dim, (0..rows * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_csls(q: &EmbeddingMatrix, c: &EmbeddingMatrix, k: usize) -> Vec<Vec<f64>> {
        let cos = |a: &[f64], b: &[f64]| crate::embeddings::cosine(a, b);
        let topk = |mut v: Vec<f64>| {
            v.sort_by(|a, b| b.total_cmp(a));
            let k = k.min(v.len());
            v[..k].iter().sum::<f64>() / k as f64
        };
        let rq: Vec<f64> = (0..q.rows()).map(|i| topk((0..c.rows()).map(|j| cos(q.row(i), c.row(j))).collect())).collect();
        let rc: Vec<f64> = (0..c.rows()).map(|j| topk((0..q.rows()).map(|i| cos(q.row(i), c.row(j))).collect())).collect();
        (0..q.rows())
            .map(|i| (0..c.rows()).map(|j| 2.0 * cos(q.row(i), c.row(j)) - rq[i] - rc[j]).collect())
            .collect()
    }

    #[test]
    fn word_vector_is_mean_of_subword_rows() {
        let v = word_vocab("en", &["ab"]);
        let mut e = EmbeddingMatrix::zeros(v.len(), 2);
        for id in 0..v.len() {
            e.row_mut(id).copy_from_slice(&[id as f64, 1.0]);
        }
        let space = EvalSpace { vocab: &v, embeddings: &e };
        let norm = NormalizationConfig::default();
        let ab = v.id("▁ab").unwrap() as f64;
        assert_eq!(word_vector("ab", space, &norm).unwrap().unwrap(), vec![ab, 1.0]);
        // "ba" is "▁" + "b" + "a".
        let parts = [v.id("▁").unwrap(), v.id("b").unwrap(), v.id("a").unwrap()];
        let mean = parts.iter().map(|&i| i as f64).sum::<f64>() / 3.0;
        let got = word_vector("ba", space, &norm).unwrap().unwrap();
        assert!((got[0] - mean).abs() < 1e-12);
        assert_eq!(got, word_vector("ba", space, &norm).unwrap().unwrap());
        assert_eq!(word_vector("zz", space, &norm).unwrap(), None);
        assert_eq!(word_vector("  ", space, &norm).unwrap(), None);
    }

    #[test]
    fn retrieval_matches_naive_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (nq, nc, k) in [(10, 20, 10), (200, 200, 10), (37, 11, 3)] {
            let q = random_matrix(&mut rng, nq, 16);
            let c = random_matrix(&mut rng, nc, 16);
            let ranked = csls_retrieve(&q, &c, k, Exec::default()).unwrap();
            let naive = naive_csls(&q, &c, k);
            for (order, scores) in ranked.iter().zip(&naive) {
                assert_eq!(order.len(), nc);
                for w in order.windows(2) {
                    assert!(scores[w[0]] >= scores[w[1]] - 1e-9);
                }
                let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                assert!((scores[order[0]] - best).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_match_ranks_first_and_ties_break_by_index() {
        let mut rows = vec![vec![0.0, 1.0, 0.0]; 12];
        rows[7] = vec![1.0, 0.0, 0.0];
        let c = EmbeddingMatrix::from_rows(&rows).unwrap();
        let q = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let ranked = csls_retrieve(&q, &c, 3, Exec::Sequential).unwrap();
        assert_eq!(ranked[0][0], 7);
        assert_eq!(&ranked[0][1..4], &[0, 1, 2]);
        assert!(matches!(
            csls_retrieve(&q, &c, 12, Exec::Sequential),
            Err(Error::NeighbourhoodTooLarge { k: 12, candidates: 12 })
        ));
    }

    #[test]
    fn constant_neighbourhoods_reduce_to_cosine_ranking() {
        // Orthonormal candidates: each query's top-k mean and each
        // candidate's neighbourhood are identical across the set.
        let n = 6;
        let c = EmbeddingMatrix::from_rows(&(0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect::<Vec<_>>()).unwrap();
        let ranked = csls_retrieve(&c, &c, 2, Exec::Sequential).unwrap();
        for (i, order) in ranked.iter().enumerate() {
            assert_eq!(order[0], i);
        }
    }

    #[test]
    fn test_set_parsing_and_filtering() {
        let t = BliTestSet::parse("haus\thouse\nhaus\thome\ntaxi\ttaxi\n\nhund dog\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.pairs[0].1.len(), 2);
        let f = t.filtered();
        assert!(f.filtered_identical);
        assert_eq!(t.len() - f.len(), 1);
        assert!(BliTestSet::parse("a\tb\tc").is_err());
    }

    fn identity_setup(words: &[&str]) -> (Vocabulary, Vocabulary, EmbeddingMatrix, EmbeddingMatrix) {
        let v1 = word_vocab("en", words);
        let upper: Vec<String> = words.iter().map(|w| format!("{w}x")).collect();
        let upper_refs: Vec<&str> = upper.iter().map(String::as_str).collect();
        let v2 = word_vocab("de", &upper_refs);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let e1 = random_matrix(&mut rng, v1.len(), 24);
        let mut e2 = random_matrix(&mut rng, v2.len(), 24);
        for w in words {
            let a = v1.id(&format!("▁{w}")).unwrap() as usize;
            let b = v2.id(&format!("▁{w}x")).unwrap() as usize;
            e2.row_mut(b).copy_from_slice(e1.row(a));
        }
        (v1, v2, e1, e2)
    }

    #[test]
    fn planted_translations_score_one() {
        let words = ["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj", "kk", "ll", "mm", "nn"];
        let (v1, v2, e1, e2) = identity_setup(&words);
        let test = BliTestSet::from_pairs(words.iter().map(|w| (w.to_string(), format!("{w}x"))));
        let src = EvalSpace { vocab: &v1, embeddings: &e1 };
        let tgt = EvalSpace { vocab: &v2, embeddings: &e2 };
        let norm = NormalizationConfig::default();
        let r = bli_precision_at_1(&test, src, tgt, 10, &norm, Exec::default()).unwrap();
        assert_eq!(r.precision_at_1, 1.0);
        assert_eq!(r.evaluated, words.len());

        let mut with_unk = test.clone();
        with_unk.pairs.push(("@@".into(), ["aax".to_string()].into()));
        let r = bli_precision_at_1(&with_unk, src, tgt, 10, &norm, Exec::default()).unwrap();
        assert_eq!(r.evaluated, words.len());
        assert_eq!(r.excluded_sources, vec!["@@".to_string()]);

        let nothing = BliTestSet::from_pairs([("@@", "aax")]);
        assert!(matches!(
            bli_precision_at_1(&nothing, src, tgt, 10, &norm, Exec::default()),
            Err(Error::NothingToEvaluate)
        ));
    }

    #[test]
    fn growing_gold_sets_never_lowers_precision() {
        let words = ["aa", "bb", "cc", "dd", "ee", "ff", "gg", "hh", "ii", "jj", "kk", "ll"];
        let (v1, v2, e1, _) = identity_setup(&words);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let e2 = random_matrix(&mut rng, v2.len(), 24);
        let src = EvalSpace { vocab: &v1, embeddings: &e1 };
        let tgt = EvalSpace { vocab: &v2, embeddings: &e2 };
        let norm = NormalizationConfig::default();
        let mut test = BliTestSet::from_pairs(words.iter().map(|w| (w.to_string(), format!("{w}x"))));
        let mut last = bli_precision_at_1(&test, src, tgt, 5, &norm, Exec::default()).unwrap().precision_at_1;
        for step in 0..words.len() {
            for (i, (_, gold)) in test.pairs.iter_mut().enumerate() {
                gold.insert(format!("{}x", words[(i + step + 1) % words.len()]));
            }
            let p = bli_precision_at_1(&test, src, tgt, 5, &norm, Exec::default()).unwrap().precision_at_1;
            assert!(p >= last);
            last = p;
        }
        assert_eq!(last, 1.0);
    }
}
