use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

use super::EmbeddingMatrix;

/// How SGD updates are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Workers {
    /// One worker; output is bitwise reproducible for a fixed seed.
    Single,
    /// `n` workers updating shared parameters without locks. Only aggregate
    /// quality is reproducible.
    Hogwild(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub start_lr: f32,
    pub min_lr: f32,
    pub workers: Workers,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 1024,
            window: 5,
            negatives: 10,
            epochs: 5,
            seed: 42,
            start_lr: 0.025,
            min_lr: 1e-4,
            workers: Workers::Single,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedEmbeddings {
    pub matrix: EmbeddingMatrix,
    /// Mean negative-sampling loss per (center, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
    /// FNV-1a hash of the training token stream.
    pub corpus_fingerprint: String,
}

/// Parameter storage shared between workers. Relaxed atomics give lock-free
/// racy updates without undefined behaviour; a single worker sees exactly the
/// sequential semantics.
struct SharedParams {
    dim: usize,
    data: Vec<AtomicU32>,
}

impl SharedParams {
    fn new(values: impl Iterator<Item = f32>, dim: usize) -> Self {
        SharedParams {
            dim,
            data: values.map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    fn load_row(&self, row: usize, out: &mut [f32]) {
        let base = row * self.dim;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f32::from_bits(self.data[base + k].load(Ordering::Relaxed));
        }
    }

    fn add_row(&self, row: usize, delta: &[f32]) {
        let base = row * self.dim;
        for (k, d) in delta.iter().enumerate() {
            let cell = &self.data[base + k];
            let v = f32::from_bits(cell.load(Ordering::Relaxed)) + d;
            cell.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_f64(self) -> Vec<f64> {
        self.data
            .into_iter()
            .map(|a| f32::from_bits(a.into_inner()) as f64)
            .collect()
    }
}

fn fingerprint(corpus: &[Vec<u32>]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for s in corpus {
        for &t in s {
            for b in t.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn log_sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

struct Scratch {
    input: Vec<f32>,
    output: Vec<f32>,
    grad: Vec<f32>,
    delta: Vec<f32>,
}

/// Trains skip-gram with negative sampling over encoded sentences and returns
/// the input vectors. Special-token IDs below `skip_below` are dropped from
/// the stream.
pub fn train_sgns_ids(corpus: &[Vec<u32>], vocab_size: usize, skip_below: u32, cfg: &SgnsConfig) -> Result<TrainedEmbeddings> {
    if cfg.dim < 8 {
        return Err(Error::DimensionTooSmall(cfg.dim));
    }
    let mut counts = vec![0u64; vocab_size];
    let mut stream: Vec<Vec<u32>> = Vec::with_capacity(corpus.len());
    for (line, s) in corpus.iter().enumerate() {
        let mut kept = Vec::with_capacity(s.len());
        for &t in s {
            if t as usize >= vocab_size {
                return Err(Error::VocabMismatch(format!(
                    "token id {t} on line {} exceeds vocabulary size {vocab_size}",
                    line + 1
                )));
            }
            if t >= skip_below {
                counts[t as usize] += 1;
                kept.push(t);
            }
        }
        if kept.len() > 1 {
            stream.push(kept);
        }
    }
    let total_tokens: usize = stream.iter().map(Vec::len).sum();
    if total_tokens == 0 {
        return Err(Error::VocabMismatch("corpus has no trainable tokens under this vocabulary".into()));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let noise = WeightedAliasIndex::new(weights).map_err(|e| Error::Degenerate(e.to_string()))?;

    let dim = cfg.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f32;
    let input = SharedParams::new(
        (0..vocab_size * dim).map(|_| init_rng.random_range(-bound..bound)),
        dim,
    );
    let output = SharedParams::new(std::iter::repeat_n(0.0, vocab_size * dim), dim);

    let n_workers = match cfg.workers {
        Workers::Single => 1,
        Workers::Hogwild(n) => n.max(1),
    };
    let exec = if n_workers > 1 { Exec::default() } else { Exec::Sequential };
    let shard_len = stream.len().div_ceil(n_workers);
    let total_work = (total_tokens * cfg.epochs).max(1);
    let processed = AtomicUsize::new(0);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let per_worker = exec.map_shards(&stream, shard_len, |offset, shard| {
            let worker = offset / shard_len.max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed ^ ((epoch as u64) << 32) ^ ((worker as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15)),
            );
            let mut scratch = Scratch {
                input: vec![0.0; dim],
                output: vec![0.0; dim],
                grad: vec![0.0; dim],
                delta: vec![0.0; dim],
            };
            let mut loss = 0.0f64;
            let mut pairs = 0usize;
            for sentence in shard {
                let done = processed.fetch_add(sentence.len(), Ordering::Relaxed);
                let progress = done as f32 / total_work as f32;
                let lr = (cfg.start_lr - (cfg.start_lr - cfg.min_lr) * progress).max(cfg.min_lr);
                for (pos, &center) in sentence.iter().enumerate() {
                    let lo = pos.saturating_sub(cfg.window);
                    let hi = (pos + cfg.window + 1).min(sentence.len());
                    for (cpos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                        if cpos == pos {
                            continue;
                        }
                        loss += step(&input, &output, center, context, cfg.negatives, &noise, &mut rng, lr, &mut scratch) as f64;
                        pairs += 1;
                    }
                }
            }
            (loss, pairs)
        });
        let (loss, pairs) = per_worker
            .into_iter()
            .fold((0.0, 0usize), |a, b| (a.0 + b.0, a.1 + b.1));
        let mean = if pairs > 0 { loss / pairs as f64 } else { 0.0 };
        log::debug!("sgns epoch {epoch}: mean loss {mean:.5}");
        epoch_losses.push(mean);
    }

    let matrix = EmbeddingMatrix::from_vec(vocab_size, dim, input.into_f64())?;
    Ok(TrainedEmbeddings {
        matrix,
        epoch_losses,
        corpus_fingerprint: fingerprint(corpus),
    })
}

#[allow(clippy::too_many_arguments)]
fn step(
    input: &SharedParams,
    output: &SharedParams,
    center: u32,
    context: u32,
    negatives: usize,
    noise: &WeightedAliasIndex<f64>,
    rng: &mut ChaCha8Rng,
    lr: f32,
    s: &mut Scratch,
) -> f32 {
    input.load_row(center as usize, &mut s.input);
    s.grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for k in 0..=negatives {
        let (target, label) = if k == 0 {
            (context, 1.0)
        } else {
            let t = noise.sample(rng) as u32;
            if t == context {
                continue;
            }
            (t, 0.0)
        };
        output.load_row(target as usize, &mut s.output);
        let f: f32 = s.input.iter().zip(&s.output).map(|(a, b)| a * b).sum();
        loss -= if label > 0.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
        let g = (label - sigmoid(f)) * lr;
        for ((gr, d), (&o, &i)) in s
            .grad
            .iter_mut()
            .zip(s.delta.iter_mut())
            .zip(s.output.iter().zip(&s.input))
        {
            *gr += g * o;
            *d = g * i;
        }
        output.add_row(target as usize, &s.delta);
    }
    input.add_row(center as usize, &s.grad);
    loss
}

/// Encodes `sentences` with `vocab` and trains on the resulting subword
/// stream.
pub fn train_sgns<S: AsRef<str> + Sync>(sentences: &[S], vocab: &Vocabulary, cfg: &SgnsConfig) -> Result<TrainedEmbeddings> {
    let encoded = vocab.encode_corpus(sentences, Exec::default());
    let unk = vocab.unk_id();
    let trainable: usize = encoded
        .iter()
        .flatten()
        .filter(|&&t| Some(t) != unk && !vocab.is_special(t))
        .count();
    if trainable == 0 {
        return Err(Error::VocabMismatch(format!(
            "corpus encodes to no known subwords of the {} vocabulary",
            vocab.language()
        )));
    }
    train_sgns_ids(&encoded, vocab.len(), vocab.num_specials() as u32, cfg)
}
