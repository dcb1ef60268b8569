//! Synthetic bilingual corpora with a known dictionary.
//!
//! Both languages are drawn from the same first-order Markov model over a
//! Zipf-distributed lexicon; the second language spells every word through
//! a letter substitution into Greek and Cyrillic, so the two surface
//! vocabularies are disjoint while distributional structure is shared.
//! Homograph false positives and respelled false negatives can be planted.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::BOUNDARY;
use crate::{Error, Result};

const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
const VOWELS: &[u8] = b"aeiou";
/// Images of `a..=z`: 24 Greek letters (no final sigma), then two Cyrillic.
const CIPHER: [char; 26] = [
    'α', 'β', 'γ', 'δ', 'ε', 'ζ', 'η', 'θ', 'ι', 'κ', 'λ', 'μ', 'ν', 'ξ', 'ο', 'π', 'ρ', 'σ', 'τ', 'υ', 'φ', 'χ', 'ψ',
    'ω', 'ж', 'ш',
];

/// Letter substitution applied to one character; other characters, the
/// boundary marker included, pass through.
pub fn cipher_char(c: char) -> char {
    if c.is_ascii_lowercase() {
        CIPHER[(c as u8 - b'a') as usize]
    } else {
        c
    }
}

pub fn encipher(s: &str) -> String {
    s.chars().map(cipher_char).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CipherConfig {
    pub sentences: usize,
    pub lexicon: usize,
    pub zipf_exponent: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Preferred successors per word.
    pub successors: usize,
    /// Probability of moving to a preferred successor instead of a fresh
    /// Zipf draw.
    pub follow_prob: f64,
    /// The second language is the enciphered first-language corpus; when
    /// false it is an independent sample from the same model.
    pub parallel: bool,
    pub homographs: usize,
    pub respellings: usize,
    pub seed: u64,
}

impl Default for CipherConfig {
    fn default() -> Self {
        CipherConfig {
            sentences: 50_000,
            lexicon: 500,
            zipf_exponent: 1.0,
            min_len: 5,
            max_len: 15,
            successors: 8,
            follow_prob: 0.7,
            parallel: true,
            homographs: 0,
            respellings: 0,
            seed: 7,
        }
    }
}

/// An L2 word spelled like an unrelated L1 word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homograph {
    pub surface: String,
    /// The L1 word whose meaning the L2 spelling carries.
    pub meaning: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipherCorpus {
    pub l1: Vec<String>,
    pub l2: Vec<String>,
    /// Lexicon in rank order.
    pub words: Vec<String>,
    /// L2 spelling of each lexicon entry.
    pub spellings: Vec<String>,
    pub homographs: Vec<Homograph>,
    /// `(L1 word, L2 spelling)` of respelled entries.
    pub respellings: Vec<(String, String)>,
}

impl CipherCorpus {
    /// Word-level gold dictionary, one pair per lexicon entry.
    pub fn dictionary(&self) -> Vec<(String, String)> {
        self.words.iter().cloned().zip(self.spellings.iter().cloned()).collect()
    }

    /// Writes `l1.txt`, `l2.txt` and `dictionary.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("l1.txt"), self.l1.join("\n") + "\n")?;
        fs::write(dir.join("l2.txt"), self.l2.join("\n") + "\n")?;
        let dict: String = self.dictionary().iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
        fs::write(dir.join("dictionary.tsv"), dict)?;
        Ok(())
    }
}

/// Expected L2 surface of an L1 subword under the plain cipher.
pub fn cipher_subword(l1: &str) -> String {
    l1.chars().map(|c| if c == BOUNDARY { c } else { cipher_char(c) }).collect()
}

fn make_lexicon(n: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = [1, 2, 2, 2, 3, 3][rng.random_range(0..6)];
        let w: String = (0..syllables)
            .flat_map(|_| {
                [
                    CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char,
                    VOWELS[rng.random_range(0..VOWELS.len())] as char,
                ]
            })
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    // Frequent words are short.
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    words
}

struct Markov {
    zipf: WeightedIndex<f64>,
    successors: Vec<Vec<usize>>,
    follow_prob: f64,
    min_len: usize,
    max_len: usize,
}

impl Markov {
    fn sentence(&self, rng: &mut impl Rng) -> Vec<usize> {
        let len = rng.random_range(self.min_len..=self.max_len);
        let mut out = vec![self.zipf.sample(rng)];
        while out.len() < len {
            let prev = *out.last().unwrap();
            let next = if rng.random_bool(self.follow_prob) {
                self.successors[prev][rng.random_range(0..self.successors[prev].len())]
            } else {
                self.zipf.sample(rng)
            };
            out.push(next);
        }
        out
    }
}

pub fn generate_cipher_corpus(cfg: &CipherConfig) -> Result<CipherCorpus> {
    if cfg.lexicon < 2 || cfg.min_len == 0 || cfg.min_len > cfg.max_len || cfg.successors == 0 {
        return Err(Error::InvalidArgument(format!(
            "need lexicon ≥ 2, successors ≥ 1 and 1 ≤ min_len ≤ max_len, got {cfg:?}"
        )));
    }
    let planted = 2 * cfg.homographs + cfg.respellings;
    let pool_lo = (cfg.lexicon / 25).min(cfg.lexicon);
    let pool_hi = (cfg.lexicon * 3 / 5).max(pool_lo);
    if planted > pool_hi - pool_lo {
        return Err(Error::InvalidArgument(format!(
            "{planted} planted words do not fit the {} mid-frequency ranks",
            pool_hi - pool_lo
        )));
    }
    if !(0.0..=1.0).contains(&cfg.follow_prob) {
        return Err(Error::InvalidArgument("follow_prob must lie in [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let words = make_lexicon(cfg.lexicon, &mut rng);
    let weights: Vec<f64> = (0..cfg.lexicon).map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent)).collect();
    let zipf = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let successors = (0..cfg.lexicon)
        .map(|_| {
            let mut s: Vec<usize> = Vec::with_capacity(cfg.successors);
            while s.len() < cfg.successors.min(cfg.lexicon) {
                let w = zipf.sample(&mut rng);
                if !s.contains(&w) {
                    s.push(w);
                }
            }
            s
        })
        .collect();
    let model = Markov {
        zipf,
        successors,
        follow_prob: cfg.follow_prob,
        min_len: cfg.min_len,
        max_len: cfg.max_len,
    };

    let mut spellings: Vec<String> = words.iter().map(|w| encipher(w)).collect();
    let mut pool: Vec<usize> = (pool_lo..pool_hi).collect();
    pool.shuffle(&mut rng);
    let mut homographs = Vec::new();
    for k in 0..cfg.homographs {
        let (meaning, donor) = (pool[2 * k], pool[2 * k + 1]);
        spellings[meaning] = words[donor].clone();
        homographs.push(Homograph {
            surface: words[donor].clone(),
            meaning: words[meaning].clone(),
        });
    }
    let mut respellings = Vec::new();
    for &w in &pool[2 * cfg.homographs..planted] {
        // `x` never occurs in lexicon words, so the spelling is fresh.
        spellings[w] = format!("x{}", words[w].chars().rev().collect::<String>());
        respellings.push((words[w].clone(), spellings[w].clone()));
    }

    let render = |ids: &[usize], table: &[String]| ids.iter().map(|&i| table[i].as_str()).collect::<Vec<_>>().join(" ");
    let l1_ids: Vec<Vec<usize>> = (0..cfg.sentences).map(|_| model.sentence(&mut rng)).collect();
    let l2_ids: Vec<Vec<usize>> = if cfg.parallel {
        l1_ids.clone()
    } else {
        let mut rng2 = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        (0..cfg.sentences).map(|_| model.sentence(&mut rng2)).collect()
    };
    Ok(CipherCorpus {
        l1: l1_ids.iter().map(|s| render(s, &words)).collect(),
        l2: l2_ids.iter().map(|s| render(s, &spellings)).collect(),
        words,
        spellings,
        homographs,
        respellings,
    })
}
