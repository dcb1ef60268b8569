//! Writes a synthetic cipher corpus: `l1.txt`, `l2.txt` and the gold
//! word dictionary `dictionary.tsv`.
//!
//! Usage: `write_cipher_fixture <dir> [sentences] [lexicon] [planted]`,
//! where `planted` homographs and respellings are each injected.

use std::path::PathBuf;

use smala::synth::{generate_cipher_corpus, CipherConfig};

fn main() -> smala::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "cipher".into()));
    let mut num = |default: usize| args.next().and_then(|s| s.parse().ok()).unwrap_or(default);
    let sentences = num(50_000);
    let lexicon = num(500);
    let planted = num(0);
    let corpus = generate_cipher_corpus(&CipherConfig {
        sentences,
        lexicon,
        homographs: planted,
        respellings: planted,
        ..Default::default()
    })?;
    corpus.write(&dir)?;
    println!("{} sentence pairs, {} dictionary entries -> {}", corpus.l1.len(), corpus.dictionary().len(), dir.display());
    Ok(())
}
