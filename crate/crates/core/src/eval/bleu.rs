//! Corpus BLEU with the mteval-v13a tokenizer, single reference.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_ORDER: usize = 4;

static RULES: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    let re = |p: &str| Regex::new(p).expect("static pattern");
    [
        // Most ASCII punctuation and symbols stand alone.
        (re(r"([{-~\[-` -&(-+:-@/])"), " ${1} "),
        // Periods and commas unless both neighbours are digits.
        (re(r"([^0-9])([.,])"), "${1} ${2} "),
        (re(r"([.,])([^0-9])"), " ${1} ${2}"),
        // A dash after a digit.
        (re(r"([0-9])(-)"), "${1} ${2} "),
    ]
});

/// Tokenizes one detokenized segment the way mteval-v13a does.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in RULES.iter() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// Any zero n-gram precision makes the score 0.
    #[default]
    None,
    /// The NIST geometric back-off used by mteval-v13a.
    Exp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// Percentage in `[0, 100]`.
    pub score: f64,
    pub counts: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    /// Percentages.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub sys_len: u64,
    pub ref_len: u64,
}

fn ngrams(tokens: &[&str]) -> HashMap<Vec<String>, u64> {
    let mut out = HashMap::new();
    for n in 1..=MAX_ORDER {
        for w in tokens.windows(n) {
            *out.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
        }
    }
    out
}

/// Corpus BLEU over `hypotheses` against one reference per line.
pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R], smoothing: Smoothing) -> Result<BleuScore> {
    if hypotheses.len() != references.len() {
        return Err(Error::LineCountMismatch {
            left: hypotheses.len(),
            right: references.len(),
            first_unmatched: hypotheses.len().min(references.len()) + 1,
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("BLEU over an empty corpus".into()));
    }
    let mut counts = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut sys_len, mut ref_len) = (0u64, 0u64);
    for (h, r) in hypotheses.iter().zip(references) {
        let h = tokenize_13a(h.as_ref().trim_end());
        let r = tokenize_13a(r.as_ref().trim_end());
        let ht: Vec<&str> = h.split(' ').filter(|t| !t.is_empty()).collect();
        let rt: Vec<&str> = r.split(' ').filter(|t| !t.is_empty()).collect();
        sys_len += ht.len() as u64;
        ref_len += rt.len() as u64;
        let rc = ngrams(&rt);
        for (g, c) in ngrams(&ht) {
            let n = g.len() - 1;
            totals[n] += c;
            counts[n] += c.min(rc.get(&g).copied().unwrap_or(0));
        }
    }

    let brevity_penalty = match sys_len {
        0 => 0.0,
        s if s < ref_len => (1.0 - ref_len as f64 / s as f64).exp(),
        _ => 1.0,
    };
    let mut precisions = [0.0; MAX_ORDER];
    let mut score = 0.0;
    if counts.iter().any(|&c| c > 0) {
        let mut backoff = 1.0;
        for n in 0..MAX_ORDER {
            if totals[n] == 0 {
                break;
            }
            precisions[n] = if counts[n] > 0 {
                100.0 * counts[n] as f64 / totals[n] as f64
            } else if smoothing == Smoothing::Exp {
                backoff *= 2.0;
                100.0 / (backoff * totals[n] as f64)
            } else {
                0.0
            };
        }
        if precisions.iter().all(|&p| p > 0.0) {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            // Rounding can push a perfect match a few ulps past 100.
            score = (brevity_penalty * log_mean.exp()).min(100.0);
        }
    }
    Ok(BleuScore {
        score,
        counts,
        totals,
        precisions,
        brevity_penalty,
        sys_len,
        ref_len,
    })
}
