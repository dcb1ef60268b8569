use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{WordCounts, BOUNDARY};
use crate::{Error, Result};

use super::{alphabet, default_specials, sort_entries, Entry, Scheme, Vocabulary};

pub(crate) const MAX_PIECE_CHARS: usize = 8;

#[derive(Clone, Debug)]
pub struct UnigramConfig {
    /// Seed vocabulary is capped at `seed_multiplier * size` pieces.
    pub seed_multiplier: f64,
    /// Substrings seen fewer times than this are not seeded.
    pub min_freq: u64,
    /// Fraction of prunable pieces removed per pruning round.
    pub prune_fraction: f64,
    /// EM iterations between pruning rounds (and after the last one).
    pub em_iters: usize,
    pub specials: Vec<String>,
}

impl Default for UnigramConfig {
    fn default() -> Self {
        UnigramConfig {
            seed_multiplier: 4.0,
            min_freq: 2,
            prune_fraction: 0.2,
            em_iters: 2,
            specials: default_specials(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmRound {
    /// Pruning stage; the piece set is fixed within a stage.
    pub stage: usize,
    pub iteration: usize,
    pub pieces: usize,
    /// Corpus log-likelihood under the parameters entering this iteration.
    pub log_likelihood: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnigramTrace {
    pub rounds: Vec<EmRound>,
}

struct Model {
    pieces: Vec<String>,
    is_char: Vec<bool>,
    active: Vec<bool>,
    logp: Vec<f64>,
    index: HashMap<String, usize>,
}

/// Lattice edge: (start, end, piece).
type Edge = (usize, usize, usize);

impl Model {
    fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    fn lattice(&self, chars: &[char], exclude: Option<usize>) -> Vec<Edge> {
        let mut edges = Vec::new();
        let mut buf = String::new();
        for start in 0..chars.len() {
            buf.clear();
            for end in start + 1..=chars.len().min(start + MAX_PIECE_CHARS) {
                buf.push(chars[end - 1]);
                if let Some(&p) = self.index.get(&buf) {
                    if self.active[p] && Some(p) != exclude && self.logp[p].is_finite() {
                        edges.push((start, end, p));
                    }
                }
            }
        }
        edges
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Forward-backward over one word. Adds expected counts scaled by `weight`
/// and returns the log marginal likelihood.
fn forward_backward(n: usize, edges: &[Edge], logp: &[f64], weight: f64, expected: &mut [f64]) -> f64 {
    let mut alpha = vec![f64::NEG_INFINITY; n + 1];
    alpha[0] = 0.0;
    // edges are sorted by start, so process by end for alpha
    let mut by_end: Vec<&Edge> = edges.iter().collect();
    by_end.sort_by_key(|e| e.1);
    for &&(s, e, p) in &by_end {
        alpha[e] = log_add(alpha[e], alpha[s] + logp[p]);
    }
    let mut beta = vec![f64::NEG_INFINITY; n + 1];
    beta[n] = 0.0;
    for &&(s, e, p) in by_end.iter().rev() {
        beta[s] = log_add(beta[s], logp[p] + beta[e]);
    }
    let z = alpha[n];
    if z.is_finite() {
        for &(s, e, p) in edges {
            let post = (alpha[s] + logp[p] + beta[e] - z).exp();
            expected[p] += weight * post;
        }
    }
    z
}

fn viterbi(n: usize, edges: &[Edge], logp: &[f64]) -> Option<(f64, Vec<usize>)> {
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut back = vec![(0usize, usize::MAX); n + 1];
    best[0] = 0.0;
    let mut by_end: Vec<&Edge> = edges.iter().collect();
    by_end.sort_by_key(|e| e.1);
    for &&(s, e, p) in &by_end {
        let score = best[s] + logp[p];
        if score > best[e] {
            best[e] = score;
            back[e] = (s, p);
        }
    }
    if !best[n].is_finite() {
        return None;
    }
    let mut path = Vec::new();
    let mut pos = n;
    while pos > 0 {
        let (s, p) = back[pos];
        path.push(p);
        pos = s;
    }
    path.reverse();
    Some((best[n], path))
}

/// Learns a Unigram LM vocabulary of total size `size` (specials included).
///
/// Seeds with every character plus frequent substrings of up to eight
/// characters, then alternates EM rounds with pruning of the pieces whose
/// removal costs the least likelihood. Characters are never pruned.
pub fn learn_unigram(
    counts: &WordCounts,
    size: usize,
    language: &str,
    cfg: &UnigramConfig,
) -> Result<(Vocabulary, UnigramTrace)> {
    let chars = alphabet(counts);
    let minimum = chars.len() + cfg.specials.len();
    if size < minimum {
        return Err(Error::VocabTooSmall {
            requested: size,
            minimum,
        });
    }
    let target = size - cfg.specials.len();

    let words: Vec<(Vec<char>, f64)> = counts
        .iter()
        .map(|(w, &c)| {
            let mut v = vec![BOUNDARY];
            v.extend(w.chars());
            (v, c as f64)
        })
        .collect();

    // seed: character counts and substring counts
    let mut char_freq: HashMap<String, f64> = HashMap::new();
    let mut sub_freq: HashMap<String, u64> = HashMap::new();
    for ((w, _), &c) in words.iter().zip(counts.values()) {
        for start in 0..w.len() {
            let mut s = String::new();
            for end in start + 1..=w.len().min(start + MAX_PIECE_CHARS) {
                s.push(w[end - 1]);
                if end - start == 1 {
                    *char_freq.entry(s.clone()).or_insert(0.0) += c as f64;
                } else {
                    *sub_freq.entry(s.clone()).or_insert(0) += c;
                }
            }
        }
    }
    let mut seeds: Vec<(String, u64)> = sub_freq
        .into_iter()
        .filter(|(_, f)| *f >= cfg.min_freq)
        .collect();
    // score by frequency times length
    seeds.sort_by(|a, b| {
        let sa = a.1 * a.0.chars().count() as u64;
        let sb = b.1 * b.0.chars().count() as u64;
        sb.cmp(&sa).then_with(|| a.0.cmp(&b.0))
    });
    let cap = ((cfg.seed_multiplier * size as f64) as usize).saturating_sub(chars.len());
    seeds.truncate(cap);

    let mut model = Model {
        pieces: Vec::new(),
        is_char: Vec::new(),
        active: Vec::new(),
        logp: Vec::new(),
        index: HashMap::new(),
    };
    let mut init: Vec<f64> = Vec::new();
    for c in &chars {
        model.index.insert(c.clone(), model.pieces.len());
        model.pieces.push(c.clone());
        model.is_char.push(true);
        init.push(char_freq.get(c).copied().unwrap_or(0.0).max(1.0));
    }
    for (s, f) in seeds {
        model.index.insert(s.clone(), model.pieces.len());
        model.pieces.push(s);
        model.is_char.push(false);
        init.push(f as f64);
    }
    let total: f64 = init.iter().sum();
    model.logp = init.iter().map(|f| (f / total).ln()).collect();
    model.active = vec![true; model.pieces.len()];

    let mut trace = UnigramTrace::default();
    let mut stage = 0;
    loop {
        run_em(&mut model, &words, cfg.em_iters.max(1), stage, &mut trace);
        let active = model.active_count();
        if active <= target {
            break;
        }
        prune(&mut model, &words, active - target, cfg.prune_fraction);
        floor_characters(&mut model);
        stage += 1;
    }

    // final entries: floor unusable characters so every seen character encodes
    floor_characters(&mut model);
    let mut entries: Vec<Entry> = (0..model.pieces.len())
        .filter(|&p| model.active[p])
        .map(|p| Entry {
            subword: model.pieces[p].clone(),
            freq: 0,
            logprob: Some(model.logp[p]),
        })
        .collect();
    let provisional = Vocabulary::new(Scheme::UnigramLm, language, cfg.specials.clone(), entries.clone(), Vec::new());
    let freq = provisional.token_frequencies(counts);
    for (i, e) in entries.iter_mut().enumerate() {
        e.freq = freq[cfg.specials.len() + i];
    }
    sort_entries(&mut entries);
    Ok((
        Vocabulary::new(Scheme::UnigramLm, language, cfg.specials.clone(), entries, Vec::new()),
        trace,
    ))
}

fn run_em(model: &mut Model, words: &[(Vec<char>, f64)], iters: usize, stage: usize, trace: &mut UnigramTrace) {
    let lattices: Vec<Vec<Edge>> = words.iter().map(|(w, _)| model.lattice(w, None)).collect();
    for iteration in 0..iters {
        let mut expected = vec![0.0; model.pieces.len()];
        let mut ll = 0.0;
        for ((w, c), edges) in words.iter().zip(&lattices) {
            ll += c * forward_backward(w.len(), edges, &model.logp, *c, &mut expected);
        }
        trace.rounds.push(EmRound {
            stage,
            iteration,
            pieces: model.active_count(),
            log_likelihood: ll,
        });
        let total: f64 = expected.iter().sum();
        for p in 0..model.pieces.len() {
            if !model.active[p] {
                continue;
            }
            if expected[p] > 0.0 {
                model.logp[p] = (expected[p] / total).ln();
            } else {
                model.logp[p] = f64::NEG_INFINITY;
                if !model.is_char[p] {
                    model.active[p] = false;
                }
            }
        }
    }
}

/// Gives zero-probability characters a small probability so that every word
/// stays segmentable after pruning, then renormalizes.
fn floor_characters(model: &mut Model) {
    let min_finite = model
        .logp
        .iter()
        .zip(&model.active)
        .filter(|(lp, &a)| a && lp.is_finite())
        .map(|(lp, _)| *lp)
        .fold(0.0f64, f64::min);
    let floor = min_finite - 1.0;
    for p in 0..model.pieces.len() {
        if model.is_char[p] && !model.logp[p].is_finite() {
            model.logp[p] = floor;
        }
    }
    let mut z = f64::NEG_INFINITY;
    for p in 0..model.pieces.len() {
        if model.active[p] {
            z = log_add(z, model.logp[p]);
        }
    }
    for p in 0..model.pieces.len() {
        if model.active[p] {
            model.logp[p] -= z;
        }
    }
}

fn prune(model: &mut Model, words: &[(Vec<char>, f64)], excess: usize, fraction: f64) {
    let mut vfreq = vec![0.0; model.pieces.len()];
    for (w, c) in words {
        let edges = model.lattice(w, None);
        if let Some((_, path)) = viterbi(w.len(), &edges, &model.logp) {
            for p in path {
                vfreq[p] += c;
            }
        }
    }
    let mut losses: Vec<(f64, usize)> = Vec::new();
    for p in 0..model.pieces.len() {
        if !model.active[p] || model.is_char[p] {
            continue;
        }
        let loss = if vfreq[p] == 0.0 {
            0.0
        } else {
            let chars: Vec<char> = model.pieces[p].chars().collect();
            let edges = model.lattice(&chars, Some(p));
            match viterbi(chars.len(), &edges, &model.logp) {
                Some((alt, _)) => vfreq[p] * (model.logp[p] - alt),
                None => f64::INFINITY,
            }
        };
        losses.push((loss, p));
    }
    losses.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| model.pieces[b.1].len().cmp(&model.pieces[a.1].len()))
            .then_with(|| model.pieces[a.1].cmp(&model.pieces[b.1]))
    });
    let per_round = ((losses.len() as f64 * fraction).ceil() as usize).max(1);
    for &(_, p) in losses.iter().take(per_round.min(excess)) {
        model.active[p] = false;
    }
}
