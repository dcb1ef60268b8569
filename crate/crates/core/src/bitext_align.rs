//! Subword alignment from parallel text with a diagonal-favouring IBM
//! Model 2 (the reparameterization popularized by fast_align), and the
//! conversion of two directional models into a similarity matrix.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::anchoring::{SimilarityKind, SimilarityMatrix};
use crate::exec::Exec;
use crate::linalg::DenseMatrix;
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

const NULL: u32 = u32::MAX;
const SHARD: usize = 256;
const GOLDEN_STEPS: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// L2 given L1.
    Fwd,
    /// L1 given L2.
    Rev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub iters: usize,
    pub p0: f64,
    pub initial_tension: f64,
    pub min_tension: f64,
    pub max_tension: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            iters: 5,
            p0: 0.08,
            initial_tension: 4.0,
            min_tension: 1e-3,
            max_tension: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    pub direction: Direction,
    pub source_size: usize,
    pub target_size: usize,
    /// `t(f|e)` per source ID, over observed targets only.
    table: Vec<BTreeMap<u32, f64>>,
    null_table: BTreeMap<u32, f64>,
    pub tension: f64,
    pub p0: f64,
    /// Corpus log-likelihood measured in each iteration's E-step.
    pub log_likelihoods: Vec<f64>,
}

fn h(i: usize, j: usize, m: usize, n: usize) -> f64 {
    -((i as f64 / n as f64) - (j as f64 / m as f64)).abs()
}

/// Normalizer of the alignment prior over source positions `1..=n`.
fn partition(lambda: f64, j: usize, m: usize, n: usize) -> f64 {
    (1..=n).map(|i| (lambda * h(i, j, m, n)).exp()).sum()
}

impl AlignmentModel {
    /// `t(f|e)`, or `t(f|NULL)` for `e = None`.
    pub fn prob(&self, f: u32, e: Option<u32>) -> f64 {
        let row = match e {
            Some(e) => self.table.get(e as usize),
            None => Some(&self.null_table),
        };
        row.and_then(|r| r.get(&f)).copied().unwrap_or(0.0)
    }

    /// Observed targets of a source ID with their probabilities.
    pub fn row(&self, e: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.table.get(e as usize).into_iter().flat_map(|r| r.iter().map(|(&f, &p)| (f, p)))
    }

    fn t(&self, f: u32, e: u32, uniform: bool) -> f64 {
        if uniform {
            1.0 / self.target_size as f64
        } else if e == NULL {
            self.prob(f, None)
        } else {
            self.prob(f, Some(e))
        }
    }

    /// Most probable source position for each target position, `None`
    /// meaning the null word. Ties go to null, then the lowest position.
    pub fn viterbi(&self, source: &[u32], target: &[u32]) -> Vec<Option<usize>> {
        let (n, m) = (source.len(), target.len());
        target
            .iter()
            .enumerate()
            .map(|(j, &f)| {
                let z = partition(self.tension, j + 1, m, n);
                let mut best = (None, self.p0 * self.prob(f, None));
                for (i, &e) in source.iter().enumerate() {
                    let p = (1.0 - self.p0) * (self.tension * h(i + 1, j + 1, m, n)).exp() / z * self.prob(f, Some(e));
                    if p > best.1 {
                        best = (Some(i), p);
                    }
                }
                best.0
            })
            .collect()
    }
}

#[derive(Default)]
struct Partial {
    counts: HashMap<(u32, u32), f64>,
    log_likelihood: f64,
    feature: f64,
    weights: HashMap<(usize, usize, usize), f64>,
}

fn e_step(model: &AlignmentModel, pairs: &[(Vec<u32>, Vec<u32>)], uniform: bool) -> Partial {
    let mut part = Partial::default();
    let mut probs = Vec::new();
    for (source, target) in pairs {
        let (n, m) = (source.len(), target.len());
        for (j, &f) in target.iter().enumerate() {
            let z = partition(model.tension, j + 1, m, n);
            probs.clear();
            let p_null = model.p0 * model.t(f, NULL, uniform);
            let mut total = p_null;
            for (i, &e) in source.iter().enumerate() {
                let p = (1.0 - model.p0) * (model.tension * h(i + 1, j + 1, m, n)).exp() / z * model.t(f, e, uniform);
                probs.push(p);
                total += p;
            }
            if total <= 0.0 {
                continue;
            }
            part.log_likelihood += total.ln();
            *part.counts.entry((NULL, f)).or_default() += p_null / total;
            let mut aligned = 0.0;
            for (i, (&e, &p)) in source.iter().zip(&probs).enumerate() {
                let post = p / total;
                *part.counts.entry((e, f)).or_default() += post;
                part.feature += post * h(i + 1, j + 1, m, n);
                aligned += post;
            }
            *part.weights.entry((j + 1, m, n)).or_default() += aligned;
        }
    }
    part
}

/// Expected complete-data log-likelihood terms that depend on the tension.
fn tension_objective(lambda: f64, feature: f64, weights: &BTreeMap<(usize, usize, usize), f64>) -> f64 {
    lambda * feature
        - weights
            .iter()
            .map(|(&(j, m, n), &w)| w * partition(lambda, j, m, n).ln())
            .sum::<f64>()
}

fn golden_section(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// EM training on ID sequences oriented as `(source, target)`.
pub fn train_ibm2_fast_ids(
    pairs: &[(Vec<u32>, Vec<u32>)],
    source_size: usize,
    target_size: usize,
    direction: Direction,
    cfg: &AlignConfig,
    exec: Exec,
) -> Result<AlignmentModel> {
    if !(0.0..1.0).contains(&cfg.p0) {
        return Err(Error::InvalidArgument(format!("null probability {} outside [0, 1)", cfg.p0)));
    }
    if !(cfg.min_tension > 0.0 && cfg.min_tension <= cfg.initial_tension && cfg.initial_tension <= cfg.max_tension) {
        return Err(Error::InvalidArgument("tension bounds must satisfy 0 < min <= initial <= max".into()));
    }
    let pairs: Vec<(Vec<u32>, Vec<u32>)> = pairs.iter().filter(|(s, t)| !s.is_empty() && !t.is_empty()).cloned().collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("bitext has no non-empty sentence pairs".into()));
    }
    for (s, t) in &pairs {
        if let Some(&id) = s.iter().find(|&&e| e as usize >= source_size) {
            return Err(Error::VocabMismatch(format!("source ID {id} outside vocabulary of {source_size}")));
        }
        if let Some(&id) = t.iter().find(|&&f| f as usize >= target_size) {
            return Err(Error::VocabMismatch(format!("target ID {id} outside vocabulary of {target_size}")));
        }
    }
    let mut model = AlignmentModel {
        direction,
        source_size,
        target_size,
        table: vec![BTreeMap::new(); source_size],
        null_table: BTreeMap::new(),
        tension: cfg.initial_tension,
        p0: cfg.p0,
        log_likelihoods: Vec::with_capacity(cfg.iters),
    };
    for it in 0..cfg.iters {
        let uniform = it == 0;
        let parts = exec.map_shards(&pairs, SHARD, |_, shard| e_step(&model, shard, uniform));
        let mut counts: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        let mut weights: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        let (mut ll, mut feature) = (0.0, 0.0);
        for p in parts {
            // sorted so the float sums do not depend on hash order
            let mut c: Vec<_> = p.counts.into_iter().collect();
            c.sort_unstable_by_key(|&(k, _)| k);
            for (k, v) in c {
                *counts.entry(k).or_default() += v;
            }
            let mut w: Vec<_> = p.weights.into_iter().collect();
            w.sort_unstable_by_key(|&(k, _)| k);
            for (k, v) in w {
                *weights.entry(k).or_default() += v;
            }
            ll += p.log_likelihood;
            feature += p.feature;
        }
        model.log_likelihoods.push(ll);
        log::debug!("{direction:?} iteration {it}: log-likelihood {ll:.6}, tension {:.4}", model.tension);

        let mut table = vec![BTreeMap::new(); source_size];
        let mut null_table = BTreeMap::new();
        let mut totals: HashMap<u32, f64> = HashMap::new();
        for (&(e, _), &c) in &counts {
            *totals.entry(e).or_default() += c;
        }
        for (&(e, f), &c) in &counts {
            let p = c / totals[&e];
            if e == NULL {
                null_table.insert(f, p);
            } else {
                table[e as usize].insert(f, p);
            }
        }
        model.table = table;
        model.null_table = null_table;

        let q = |l: f64| tension_objective(l, feature, &weights);
        let candidate = golden_section(cfg.min_tension, cfg.max_tension, q);
        if q(candidate) > q(model.tension) {
            model.tension = candidate;
        }
    }
    Ok(model)
}

/// Encodes a sentence-aligned bitext and trains one direction. `pairs` hold
/// `(L1, L2)` text; `Rev` trains L1 given L2.
pub fn train_ibm2_fast<S: AsRef<str> + Sync>(
    pairs: &[(S, S)],
    v1: &Vocabulary,
    v2: &Vocabulary,
    direction: Direction,
    cfg: &AlignConfig,
    exec: Exec,
) -> Result<AlignmentModel> {
    let left: Vec<&str> = pairs.iter().map(|p| p.0.as_ref()).collect();
    let right: Vec<&str> = pairs.iter().map(|p| p.1.as_ref()).collect();
    let l = v1.encode_corpus(&left, exec);
    let r = v2.encode_corpus(&right, exec);
    let oriented: Vec<(Vec<u32>, Vec<u32>)> = match direction {
        Direction::Fwd => l.into_iter().zip(r).collect(),
        Direction::Rev => r.into_iter().zip(l).collect(),
    };
    let (src, trg) = match direction {
        Direction::Fwd => (v1.len(), v2.len()),
        Direction::Rev => (v2.len(), v1.len()),
    };
    train_ibm2_fast_ids(&oriented, src, trg, direction, cfg, exec)
}

/// `S[i, j] = (t_fwd(j|i) + t_rev(i|j)) / 2` over the active subwords of
/// both vocabularies; pairs never aligned score 0.
pub fn similarity_from_bitext(
    fwd: &AlignmentModel,
    rev: &AlignmentModel,
    v1: &Vocabulary,
    v2: &Vocabulary,
) -> Result<SimilarityMatrix> {
    if fwd.direction != Direction::Fwd || rev.direction != Direction::Rev {
        return Err(Error::InvalidArgument("expected one forward and one reverse model".into()));
    }
    if fwd.source_size != rev.target_size || fwd.target_size != rev.source_size {
        return Err(Error::VocabMismatch(format!(
            "forward model is {}x{}, reverse model {}x{}",
            fwd.source_size, fwd.target_size, rev.source_size, rev.target_size
        )));
    }
    if fwd.source_size != v1.len() || fwd.target_size != v2.len() {
        return Err(Error::VocabMismatch("models were trained with different vocabularies".into()));
    }
    let rows: Vec<u32> = v1.active_ids().collect();
    let cols: Vec<u32> = v2.active_ids().collect();
    let col_pos: HashMap<u32, usize> = cols.iter().enumerate().map(|(c, &id)| (id, c)).collect();
    let row_pos: HashMap<u32, usize> = rows.iter().enumerate().map(|(r, &id)| (id, r)).collect();
    let mut s = DenseMatrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        for (j, p) in fwd.row(i) {
            if let Some(&c) = col_pos.get(&j) {
                s.set(r, c, s.get(r, c) + p / 2.0);
            }
        }
    }
    for (c, &j) in cols.iter().enumerate() {
        for (i, p) in rev.row(j) {
            if let Some(&r) = row_pos.get(&i) {
                s.set(r, c, s.get(r, c) + p / 2.0);
            }
        }
    }
    SimilarityMatrix::new(SimilarityKind::Bitext, rows, cols, s)
}

/// One line of `i-j` links per sentence pair, positions from 0.
pub fn write_pharaoh<W: Write>(out: &mut W, links: &[Vec<(usize, usize)>]) -> Result<()> {
    for line in links {
        let parts: Vec<String> = line.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        writeln!(out, "{}", parts.join(" "))?;
    }
    Ok(())
}

/// Viterbi links as `(source position, target position)`, null links dropped.
pub fn viterbi_links(model: &AlignmentModel, source: &[u32], target: &[u32]) -> Vec<(usize, usize)> {
    model
        .viterbi(source, target)
        .into_iter()
        .enumerate()
        .filter_map(|(j, a)| a.map(|i| (i, j)))
        .collect()
}
