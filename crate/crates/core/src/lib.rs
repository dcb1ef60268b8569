//! Bilingual subword vocabularies built by mapping and anchoring subwords
//! across languages.
//!
//! The pipeline learns a subword vocabulary and skip-gram embeddings per
//! language, maps the two embedding spaces into a common space without
//! supervision (or estimates similarities from a bitext), extracts
//! mutual-argmax anchors and turns them into a merged translation vocabulary
//! or an embedding-layer layout for language-model transfer.

pub mod anchoring;
pub mod bitext_align;
pub mod corpus;
pub mod csls;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod exec;
pub mod linalg;
pub mod mapping;
pub mod pipeline;
pub mod segmentation;
pub mod synth;
pub mod vocab_build;

pub use error::{Error, Result};
pub use exec::Exec;
