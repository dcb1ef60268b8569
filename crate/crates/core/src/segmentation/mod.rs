//! Per-language subword vocabularies and encoding.
//!
//! Words are written as the boundary marker `▁` followed by their characters.
//! The marker starts out as a symbol of its own and is absorbed by merges
//! (BPE) or by seed substrings (Unigram), so `▁low` is a word-initial piece
//! while `low` is word-internal.

mod bpe;
mod unigram;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::BOUNDARY;
use crate::exec::Exec;
use crate::Result;

pub use bpe::{learn_bpe, BpeConfig};
pub use unigram::{learn_unigram, UnigramConfig, UnigramTrace};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

pub fn default_specials() -> Vec<String> {
    [PAD, UNK, CLS, SEP, MASK].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "BPE")]
    Bpe,
    #[serde(rename = "UnigramLM")]
    UnigramLm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub subword: String,
    pub freq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    scheme: Scheme,
    language: String,
    specials: Vec<String>,
    entries: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    merges: Vec<(String, String)>,
}

/// An ordered subword vocabulary. IDs `0..specials.len()` are the special
/// tokens, followed by `entries` in order (frequency descending).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    scheme: Scheme,
    language: String,
    specials: Vec<String>,
    entries: Vec<Entry>,
    merges: Vec<(String, String)>,
    index: HashMap<String, u32>,
    merge_ranks: HashMap<(String, String), usize>,
    unk: Option<u32>,
    unk_logprob: f64,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        Vocabulary::new(f.scheme, &f.language, f.specials, f.entries, f.merges)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            scheme: v.scheme,
            language: v.language,
            specials: v.specials,
            entries: v.entries,
            merges: v.merges,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.scheme == other.scheme
            && self.language == other.language
            && self.specials == other.specials
            && self.entries == other.entries
            && self.merges == other.merges
    }
}

impl Vocabulary {
    pub fn new(
        scheme: Scheme,
        language: &str,
        specials: Vec<String>,
        entries: Vec<Entry>,
        merges: Vec<(String, String)>,
    ) -> Self {
        let mut index = HashMap::with_capacity(specials.len() + entries.len());
        for (i, s) in specials
            .iter()
            .chain(entries.iter().map(|e| &e.subword))
            .enumerate()
        {
            index.entry(s.clone()).or_insert(i as u32);
        }
        let merge_ranks = merges
            .iter()
            .enumerate()
            .map(|(r, p)| (p.clone(), r))
            .collect();
        let unk = index.get(UNK).copied();
        let min_lp = entries
            .iter()
            .filter_map(|e| e.logprob)
            .fold(0.0f64, f64::min);
        Vocabulary {
            scheme,
            language: language.to_owned(),
            specials,
            entries,
            merges,
            index,
            merge_ranks,
            unk,
            unk_logprob: min_lp - 10.0,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Total size including special tokens.
    pub fn len(&self) -> usize {
        self.specials.len() + self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_specials(&self) -> usize {
        self.specials.len()
    }

    pub fn id(&self, surface: &str) -> Option<u32> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: u32) -> &str {
        let id = id as usize;
        if id < self.specials.len() {
            &self.specials[id]
        } else {
            &self.entries[id - self.specials.len()].subword
        }
    }

    pub fn is_special(&self, id: u32) -> bool {
        (id as usize) < self.specials.len()
    }

    pub fn unk_id(&self) -> Option<u32> {
        self.unk
    }

    /// Training frequency of an ID; zero for special tokens.
    pub fn freq(&self, id: u32) -> u64 {
        let id = id as usize;
        if id < self.specials.len() {
            0
        } else {
            self.entries[id - self.specials.len()].freq
        }
    }

    fn logprob(&self, id: u32) -> f64 {
        let id = id as usize;
        if id < self.specials.len() {
            return self.unk_logprob;
        }
        self.entries[id - self.specials.len()]
            .logprob
            .unwrap_or(self.unk_logprob)
    }

    /// Non-special IDs in vocabulary order.
    pub fn subword_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (self.specials.len() as u32)..(self.len() as u32)
    }

    /// Non-special IDs that occur in the training data. Entries are sorted by
    /// frequency, so this is a prefix of [`Vocabulary::subword_ids`]; BPE
    /// intermediates that were fully merged away are excluded.
    pub fn active_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.subword_ids().take_while(|&id| self.freq(id) > 0)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Segments one word (without marker) into IDs and character lengths.
    /// Lengths count the marker as one character.
    fn encode_word(&self, word: &str) -> Vec<(u32, usize)> {
        let mut chars: Vec<char> = Vec::with_capacity(word.len() + 1);
        chars.push(BOUNDARY);
        chars.extend(word.chars());
        match self.scheme {
            Scheme::Bpe => self.encode_word_bpe(&chars),
            Scheme::UnigramLm => self.encode_word_unigram(&chars),
        }
    }

    fn encode_word_bpe(&self, chars: &[char]) -> Vec<(u32, usize)> {
        let mut symbols: Vec<(String, usize)> =
            chars.iter().map(|c| (c.to_string(), 1)).collect();
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in 0..symbols.len().saturating_sub(1) {
                let key = (symbols[i].0.clone(), symbols[i + 1].0.clone());
                if let Some(&rank) = self.merge_ranks.get(&key) {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((_, i)) = best else { break };
            let (right, rlen) = symbols.remove(i + 1);
            symbols[i].0.push_str(&right);
            symbols[i].1 += rlen;
        }
        symbols
            .into_iter()
            .map(|(s, len)| (self.id(&s).or(self.unk).unwrap_or(0), len))
            .collect()
    }

    fn encode_word_unigram(&self, chars: &[char]) -> Vec<(u32, usize)> {
        let n = chars.len();
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        let mut back: Vec<(usize, u32)> = vec![(0, 0); n + 1];
        best[0] = 0.0;
        let mut buf = String::new();
        for end in 1..=n {
            let lo = end.saturating_sub(unigram::MAX_PIECE_CHARS);
            for start in lo..end {
                if best[start] == f64::NEG_INFINITY {
                    continue;
                }
                buf.clear();
                buf.extend(&chars[start..end]);
                let cand = match self.id(&buf) {
                    Some(id) if !self.is_special(id) => Some((id, self.logprob(id))),
                    _ if end - start == 1 => self.unk.map(|u| (u, self.unk_logprob)),
                    _ => None,
                };
                if let Some((id, lp)) = cand {
                    let score = best[start] + lp;
                    if score > best[end] {
                        best[end] = score;
                        back[end] = (start, id);
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut pos = n;
        while pos > 0 {
            let (start, id) = back[pos];
            out.push((id, pos - start));
            pos = start;
        }
        out.reverse();
        out
    }

    /// Encodes a normalized sentence.
    pub fn encode(&self, sentence: &str) -> Segmentation {
        let mut seg = Segmentation::default();
        // `cursor` is the char offset of the space preceding the next word,
        // or 0 at the start of the sentence.
        let mut cursor = 0usize;
        let mut first = true;
        for word in sentence.split(' ').filter(|w| !w.is_empty()) {
            let mut start = cursor;
            for (k, (id, len)) in self.encode_word(word).into_iter().enumerate() {
                // The marker is zero-width on the first word.
                let width = if first && k == 0 { len - 1 } else { len };
                seg.token_ids.push(id);
                seg.offsets.push((start, start + width));
                start += width;
            }
            cursor = start;
            first = false;
        }
        seg
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            out.push_str(self.surface(id));
        }
        let out = out.replace(BOUNDARY, " ");
        out.strip_prefix(' ').map(str::to_owned).unwrap_or(out)
    }

    /// Encodes many sentences, segmenting each distinct word once.
    pub fn encode_corpus<S: AsRef<str> + Sync>(&self, sentences: &[S], exec: Exec) -> Vec<Vec<u32>> {
        let mut distinct: Vec<&str> = sentences
            .iter()
            .flat_map(|s| s.as_ref().split_whitespace())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        distinct.sort_unstable();
        let encoded = exec.map_range(distinct.len(), |i| {
            self.encode_word(distinct[i])
                .into_iter()
                .map(|(id, _)| id)
                .collect::<Vec<u32>>()
        });
        let cache: HashMap<&str, Vec<u32>> = distinct.into_iter().zip(encoded).collect();
        sentences
            .iter()
            .map(|s| {
                s.as_ref()
                    .split_whitespace()
                    .flat_map(|w| cache[w].iter().copied())
                    .collect()
            })
            .collect()
    }

    /// Token frequencies of `counts` encoded with this vocabulary, by ID.
    pub(crate) fn token_frequencies(&self, counts: &crate::corpus::WordCounts) -> Vec<u64> {
        let mut freq = vec![0u64; self.len()];
        for (w, &c) in counts {
            for (id, _) in self.encode_word(w) {
                freq[id as usize] += c;
            }
        }
        freq
    }
}

/// Token IDs with per-token character spans into the normalized sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub token_ids: Vec<u32>,
    pub offsets: Vec<(usize, usize)>,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Collects symbols that must always be representable: the marker and every
/// character seen in training.
pub(crate) fn alphabet(counts: &crate::corpus::WordCounts) -> Vec<String> {
    let mut set: HashSet<char> = HashSet::new();
    set.insert(BOUNDARY);
    for w in counts.keys() {
        set.extend(w.chars());
    }
    let mut v: Vec<String> = set.into_iter().map(String::from).collect();
    v.sort();
    v
}

/// Orders learned subwords by frequency (descending), then by string.
pub(crate) fn sort_entries(entries: &mut [Entry]) {
    entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.subword.cmp(&b.subword)));
}
