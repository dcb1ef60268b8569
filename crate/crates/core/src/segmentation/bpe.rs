use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::corpus::{WordCounts, BOUNDARY};
use crate::{Error, Result};

use super::{alphabet, default_specials, sort_entries, Entry, Scheme, Vocabulary};

#[derive(Clone, Debug)]
pub struct BpeConfig {
    /// Pairs seen fewer times than this are never merged.
    pub min_pair_freq: u64,
    pub specials: Vec<String>,
}

impl Default for BpeConfig {
    fn default() -> Self {
        BpeConfig {
            min_pair_freq: 2,
            specials: default_specials(),
        }
    }
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    merged: String,
    pair: (u32, u32),
    left: String,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: highest count, then smallest merged string, then smallest left part
        self.count
            .cmp(&other.count)
            .then_with(|| Reverse(&self.merged).cmp(&Reverse(&other.merged)))
            .then_with(|| Reverse(&self.left).cmp(&Reverse(&other.left)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Symbols {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.ids.insert(s.to_owned(), id);
        id
    }
}

/// Learns a BPE vocabulary of total size `size` (special tokens included).
///
/// Each step merges the most frequent adjacent pair; ties go to the
/// lexicographically smallest merged string. When the corpus runs out of
/// mergeable pairs first, the smaller vocabulary is returned and the
/// shortfall is logged.
pub fn learn_bpe(counts: &WordCounts, size: usize, language: &str, cfg: &BpeConfig) -> Result<Vocabulary> {
    let base = alphabet(counts);
    let minimum = base.len() + cfg.specials.len();
    if size < minimum {
        return Err(Error::VocabTooSmall {
            requested: size,
            minimum,
        });
    }
    let target_merges = size - minimum;

    let mut symbols = Symbols {
        strings: Vec::new(),
        ids: HashMap::new(),
    };
    for s in &base {
        symbols.intern(s);
    }
    let mut words: Vec<(Vec<u32>, u64)> = counts
        .iter()
        .map(|(w, &c)| {
            let mut syms = vec![symbols.intern(&BOUNDARY.to_string())];
            let mut buf = [0u8; 4];
            syms.extend(w.chars().map(|ch| symbols.intern(ch.encode_utf8(&mut buf))));
            (syms, c)
        })
        .collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut where_seen: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, (syms, c)) in words.iter().enumerate() {
        for p in syms.windows(2) {
            let key = (p[0], p[1]);
            *pair_counts.entry(key).or_insert(0) += c;
            where_seen.entry(key).or_default().insert(wi);
        }
    }

    let candidate = |pair: (u32, u32), count: u64, symbols: &Symbols| Candidate {
        count,
        merged: format!("{}{}", symbols.strings[pair.0 as usize], symbols.strings[pair.1 as usize]),
        pair,
        left: symbols.strings[pair.0 as usize].clone(),
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&p, &c)| candidate(p, c, &symbols))
        .collect();

    let mut merges: Vec<(String, String)> = Vec::with_capacity(target_merges);
    let mut new_symbols: Vec<String> = Vec::new();
    while merges.len() < target_merges {
        let Some(top) = heap.pop() else { break };
        let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            if current > 0 {
                heap.push(candidate(top.pair, current, &symbols));
            }
            continue;
        }
        if current < cfg.min_pair_freq.max(1) {
            break;
        }
        let (a, b) = top.pair;
        let merged_id = symbols.intern(&top.merged);
        merges.push((symbols.strings[a as usize].clone(), symbols.strings[b as usize].clone()));
        new_symbols.push(top.merged.clone());

        let mut affected: Vec<usize> = where_seen
            .get(&top.pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for wi in affected {
            let (syms, c) = &mut words[wi];
            let c = *c;
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == a && syms[i + 1] == b {
                    if i > 0 {
                        let left = (syms[i - 1], a);
                        decrement(&mut pair_counts, left, c);
                        touched.insert(left);
                        let nl = (syms[i - 1], merged_id);
                        *pair_counts.entry(nl).or_insert(0) += c;
                        where_seen.entry(nl).or_default().insert(wi);
                        touched.insert(nl);
                    }
                    if i + 2 < syms.len() {
                        let right = (b, syms[i + 2]);
                        decrement(&mut pair_counts, right, c);
                        touched.insert(right);
                        let nr = (merged_id, syms[i + 2]);
                        *pair_counts.entry(nr).or_insert(0) += c;
                        where_seen.entry(nr).or_default().insert(wi);
                        touched.insert(nr);
                    }
                    decrement(&mut pair_counts, (a, b), c);
                    syms[i] = merged_id;
                    syms.remove(i + 1);
                }
                i += 1;
            }
        }
        pair_counts.remove(&top.pair);
        touched.remove(&top.pair);
        let mut touched: Vec<_> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if let Some(&c) = pair_counts.get(&p) {
                if c > 0 {
                    heap.push(candidate(p, c, &symbols));
                }
            }
        }
    }
    if merges.len() < target_merges {
        log::warn!(
            "BPE for {language}: requested size {size}, achievable maximum is {}",
            minimum + merges.len()
        );
    }

    let mut entries: Vec<Entry> = base
        .into_iter()
        .chain(new_symbols)
        .map(|s| Entry {
            subword: s,
            freq: 0,
            logprob: None,
        })
        .collect();
    // frequencies are token counts of the training words under the final merges
    let provisional = Vocabulary::new(Scheme::Bpe, language, cfg.specials.clone(), entries.clone(), merges.clone());
    let freq = provisional.token_frequencies(counts);
    for (i, e) in entries.iter_mut().enumerate() {
        e.freq = freq[cfg.specials.len() + i];
    }
    sort_entries(&mut entries);
    Ok(Vocabulary::new(Scheme::Bpe, language, cfg.specials.clone(), entries, merges))
}

fn decrement(map: &mut HashMap<(u32, u32), u64>, key: (u32, u32), c: u64) {
    if let Some(v) = map.get_mut(&key) {
        *v = v.saturating_sub(c);
    }
}
