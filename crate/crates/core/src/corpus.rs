//! Text ingestion and deterministic normalization.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::exec::Exec;
use crate::{Error, Result};

/// Word-boundary marker used by the segmenters. Never survives normalization.
pub const BOUNDARY: char = '\u{2581}';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub unicode_nfc: bool,
    pub punctuation_split: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            lowercase: true,
            unicode_nfc: true,
            punctuation_split: true,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !is_combining_mark(c)
}

/// Normalizes one sentence: NFC, lowercasing, punctuation split and
/// whitespace collapse.
///
/// Returns [`Error::EmptySentence`] when nothing is left; callers drop such
/// lines.
pub fn normalize_sentence(raw: &str, cfg: &NormalizationConfig) -> Result<String> {
    let mut text: String = if cfg.unicode_nfc {
        raw.nfc().collect()
    } else {
        raw.to_owned()
    };
    if cfg.lowercase {
        text = text.to_lowercase();
        if cfg.unicode_nfc {
            text = text.nfc().collect();
        }
    }

    let mut out = String::with_capacity(text.len() + 8);
    let mut pending_space = false;
    for c in text.chars() {
        let c = if c == BOUNDARY { ' ' } else { c };
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        let punct = cfg.punctuation_split && is_punctuation(c);
        if (pending_space || punct) && !out.is_empty() {
            out.push(' ');
        }
        out.push(c);
        pending_space = punct;
    }
    if out.is_empty() {
        Err(Error::EmptySentence)
    } else {
        Ok(out)
    }
}

/// Decodes a raw line, reporting the byte offset of the first invalid sequence.
pub fn decode_line(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })
}

#[derive(Clone, Debug)]
pub enum Source {
    File(PathBuf),
    Memory(Vec<String>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamStats {
    pub lines: usize,
    pub kept: usize,
    pub dropped_empty: usize,
}

/// A deterministic stream of normalized sentences for one language.
#[derive(Clone, Debug)]
pub struct SentenceStream {
    pub source: Source,
    pub language: String,
    pub normalization: NormalizationConfig,
}

impl SentenceStream {
    pub fn from_file(path: impl Into<PathBuf>, language: &str) -> Self {
        SentenceStream {
            source: Source::File(path.into()),
            language: language.to_owned(),
            normalization: NormalizationConfig::default(),
        }
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S], language: &str) -> Self {
        SentenceStream {
            source: Source::Memory(lines.iter().map(|l| l.as_ref().to_owned()).collect()),
            language: language.to_owned(),
            normalization: NormalizationConfig::default(),
        }
    }

    pub fn with_normalization(mut self, cfg: NormalizationConfig) -> Self {
        self.normalization = cfg;
        self
    }

    /// Raw lines in source order, without normalization.
    pub fn raw_lines(&self) -> Result<Vec<String>> {
        match &self.source {
            Source::Memory(lines) => Ok(lines.clone()),
            Source::File(path) => read_lines(path),
        }
    }

    /// Normalized non-empty sentences in source order.
    pub fn sentences(&self) -> Result<(Vec<String>, StreamStats)> {
        let raw = self.raw_lines()?;
        let mut stats = StreamStats {
            lines: raw.len(),
            ..Default::default()
        };
        let mut out = Vec::with_capacity(raw.len());
        for line in &raw {
            match normalize_sentence(line, &self.normalization) {
                Ok(s) => out.push(s),
                Err(Error::EmptySentence) => stats.dropped_empty += 1,
                Err(e) => return Err(e),
            }
        }
        stats.kept = out.len();
        Ok((out, stats))
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path)?;
    let mut lines = Vec::new();
    let mut start = 0;
    for (pos, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            lines.push(line_at(&bytes, start, pos)?);
            start = pos + 1;
        }
    }
    if start < bytes.len() {
        lines.push(line_at(&bytes, start, bytes.len())?);
    }
    Ok(lines)
}

fn line_at(bytes: &[u8], start: usize, end: usize) -> Result<String> {
    let mut slice = &bytes[start..end];
    if slice.last() == Some(&b'\r') {
        slice = &slice[..slice.len() - 1];
    }
    match decode_line(slice) {
        Ok(s) => Ok(s.to_owned()),
        Err(Error::Decode { offset }) => Err(Error::Decode {
            offset: start + offset,
        }),
        Err(e) => Err(e),
    }
}

/// Word frequencies, ordered by word for deterministic serialization.
pub type WordCounts = BTreeMap<String, u64>;

/// Counts whitespace tokens of already-normalized sentences.
///
/// Shards are counted independently and merged, so the result does not depend
/// on the execution strategy.
pub fn count_words<S: AsRef<str> + Sync>(sentences: &[S], exec: Exec) -> Result<WordCounts> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput("word counts need at least one sentence".into()));
    }
    let shards = exec.map_shards(sentences, 4096, |_, shard| {
        let mut counts = WordCounts::new();
        for s in shard {
            for w in s.as_ref().split_whitespace() {
                *counts.entry(w.to_owned()).or_insert(0) += 1;
            }
        }
        counts
    });
    let mut merged = WordCounts::new();
    for shard in shards {
        for (w, c) in shard {
            *merged.entry(w).or_insert(0) += c;
        }
    }
    if merged.is_empty() {
        return Err(Error::EmptyInput("no words in stream".into()));
    }
    Ok(merged)
}

pub fn word_counts(stream: &SentenceStream) -> Result<WordCounts> {
    let (sentences, _) = stream.sentences()?;
    count_words(&sentences, Exec::default())
}

/// Reads a line-aligned bitext. Pairs where either side normalizes to empty
/// are dropped together so the alignment is preserved.
pub fn read_bitext(
    left: &SentenceStream,
    right: &SentenceStream,
) -> Result<Vec<(String, String)>> {
    let l = left.raw_lines()?;
    let r = right.raw_lines()?;
    if l.len() != r.len() {
        return Err(Error::LineCountMismatch {
            left: l.len(),
            right: r.len(),
            first_unmatched: l.len().min(r.len()) + 1,
        });
    }
    if l.is_empty() {
        return Err(Error::EmptyInput("bitext is empty".into()));
    }
    let mut pairs = Vec::with_capacity(l.len());
    for (a, b) in l.iter().zip(&r) {
        let a = normalize_sentence(a, &left.normalization);
        let b = normalize_sentence(b, &right.normalization);
        match (a, b) {
            (Ok(a), Ok(b)) => pairs.push((a, b)),
            (Err(Error::EmptySentence), _) | (_, Err(Error::EmptySentence)) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("bitext has no non-empty pairs".into()));
    }
    Ok(pairs)
}
