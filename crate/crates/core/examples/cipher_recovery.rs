//! End-to-end recovery of a letter-substitution cipher: generates the
//! synthetic corpus, runs the monolingual pipeline and reports anchor
//! precision on the most frequent subwords and BLI precision at 1.
//! L2 embeddings get their own seed so the two spaces are not identical up
//! to relabelling.

use std::time::Instant;

use smala::anchoring::AnchorPolicy;
use smala::corpus::NormalizationConfig;
use smala::embeddings::SgnsConfig;
use smala::eval::{bli_precision_at_1, BliTestSet, EvalSpace, DEFAULT_CSLS_K};
use smala::mapping::SelfLearnConfig;
use smala::pipeline::{anchor_shared_space, map_spaces, prepare_side, MonolingualConfig};
use smala::segmentation::Scheme;
use smala::synth::{cipher_subword, generate_cipher_corpus, CipherConfig};
use smala::Exec;

fn main() -> smala::Result<()> {
    let sentences = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let start = Instant::now();
    let corpus = generate_cipher_corpus(&CipherConfig { sentences, ..Default::default() })?;
    let cfg = MonolingualConfig {
        scheme: Scheme::Bpe,
        vocab_size: 2000,
        sgns: SgnsConfig { dim: 64, epochs: 5, ..Default::default() },
        mapping: SelfLearnConfig { max_iters: 300, stall_interval: 10, ..Default::default() },
        policy: AnchorPolicy::All,
        ..Default::default()
    };
    let mut cfg2 = cfg.clone();
    cfg2.sgns.seed += 1;
    let exec = Exec::default();
    let l1 = prepare_side(&corpus.l1, "l1", &cfg, exec)?;
    let l2 = prepare_side(&corpus.l2, "l2", &cfg2, exec)?;
    let (v1, v2) = (&l1.vocab, &l2.vocab);
    let space = map_spaces(v1, &l1.embeddings, v2, &l2.embeddings, &cfg.mapping, exec)?;
    let anchoring = anchor_shared_space(&space, cfg.policy, exec)?;
    println!(
        "vocabularies: {} / {} entries, {} mapping iterations, converged {}",
        v1.len(),
        v2.len(),
        space.mapped.trace.iterations.len(),
        space.mapped.converged()
    );

    let top: Vec<u32> = v1.active_ids().take(200).collect();
    let in_top: Vec<_> = anchoring.anchors.pairs.iter().filter(|p| top.contains(&p.source)).collect();
    let correct = in_top.iter().filter(|p| v2.surface(p.target) == cipher_subword(v1.surface(p.source))).count();
    println!(
        "anchors: {} total, {} within the top 200, precision {:.4}",
        anchoring.anchors.len(),
        in_top.len(),
        correct as f64 / in_top.len().max(1) as f64
    );

    let test = BliTestSet::from_pairs(corpus.dictionary());
    let report = bli_precision_at_1(
        &test,
        EvalSpace { vocab: v1, embeddings: &space.x },
        EvalSpace { vocab: v2, embeddings: &space.z },
        DEFAULT_CSLS_K,
        &NormalizationConfig::default(),
        Exec::default(),
    )?;
    println!("BLI P@1 {:.4} over {} words", report.precision_at_1, report.evaluated);
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
