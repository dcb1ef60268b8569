//! Deliverable vocabularies: a merged translation vocabulary of exact size
//! and an embedding-layer layout for transferring a language model.

mod layout;
mod sparsemax;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchoring::AnchorDictionary;
use crate::segmentation::Vocabulary;
use crate::{Error, Result};

pub use layout::{build_lm_layout, Disposition, EmbeddingLayout, LayoutConfig, LayoutMode};
pub use sparsemax::sparsemax;

/// Per-language size `m`, joint size `n` and the number of shared entries
/// `alpha = 2m - n` needed to reach it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeSpec {
    pub m: usize,
    pub n: usize,
    pub alpha: usize,
}

impl MergeSpec {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if n >= 2 * m {
            return Err(Error::InvalidMergeSizes(format!(
                "n = {n} >= 2m = {}: alpha = {}, nothing to merge",
                2 * m,
                2 * m as i64 - n as i64
            )));
        }
        if n < m {
            return Err(Error::InvalidMergeSizes(format!(
                "n = {n} < m = {m} would need more shared entries than either vocabulary has"
            )));
        }
        Ok(MergeSpec { m, n, alpha: 2 * m - n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "origin")]
pub enum Origin {
    /// Special token present in both vocabularies.
    Special { l1: u32, l2: u32 },
    SharedAnchor { l1: u32, l2: u32, score: f64 },
    L1Only { l1: u32 },
    L2Only { l2: u32 },
}

impl Origin {
    pub fn l1(&self) -> Option<u32> {
        match *self {
            Origin::Special { l1, .. } | Origin::SharedAnchor { l1, .. } | Origin::L1Only { l1 } => Some(l1),
            Origin::L2Only { .. } => None,
        }
    }

    pub fn l2(&self) -> Option<u32> {
        match *self {
            Origin::Special { l2, .. } | Origin::SharedAnchor { l2, .. } | Origin::L2Only { l2 } => Some(l2),
            Origin::L1Only { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedEntry {
    pub l1_surface: Option<String>,
    pub l2_surface: Option<String>,
    #[serde(flatten)]
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedVocabulary {
    pub spec: MergeSpec,
    /// Shared entries actually formed from anchors (excluding specials).
    pub anchors_used: usize,
    pub entries: Vec<MergedEntry>,
    /// Merged ID of each L1 ID.
    pub l1_ids: Vec<u32>,
    /// Merged ID of each L2 ID.
    pub l2_ids: Vec<u32>,
}

impl MergedVocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Special tokens with the same surface in both vocabularies, as ID pairs.
fn shared_specials(v1: &Vocabulary, v2: &Vocabulary) -> Vec<(u32, u32)> {
    (0..v1.num_specials() as u32)
        .filter_map(|a| {
            let b = v2.id(v1.surface(a))?;
            v2.is_special(b).then_some((a, b))
        })
        .collect()
}

/// Joins two vocabularies of size `m` into one of size `n`. Shared special
/// tokens fill part of the `alpha` shared slots; the best-scoring anchors
/// fill the rest. Order: specials, anchors by score, L1-only by ID,
/// L2-only by ID.
pub fn merge_for_mt(v1: &Vocabulary, v2: &Vocabulary, anchors: &AnchorDictionary, n: usize) -> Result<MergedVocabulary> {
    if v1.len() != v2.len() {
        return Err(Error::InvalidMergeSizes(format!(
            "vocabulary sizes differ: {} and {}",
            v1.len(),
            v2.len()
        )));
    }
    if !anchors.is_matching() {
        return Err(Error::InvalidArgument("anchors do not form a one-to-one matching".into()));
    }
    let m = v1.len();
    let spec = MergeSpec::new(m, n)?;
    let specials = shared_specials(v1, v2);
    let taken = |a: u32, b: u32| specials.iter().any(|&(x, y)| x == a || y == b);
    let usable: Vec<_> = anchors.pairs.iter().filter(|p| !taken(p.source, p.target)).collect();
    let needed = spec.alpha.saturating_sub(specials.len());
    if needed > usable.len() {
        let available = usable.len();
        return Err(Error::InfeasibleMerge {
            m,
            n,
            needed,
            available,
            min_n: 2 * m - available - specials.len(),
        });
    }

    let mut entries = Vec::with_capacity(n);
    let mut l1_ids = vec![u32::MAX; m];
    let mut l2_ids = vec![u32::MAX; m];
    let push = |entry: MergedEntry, entries: &mut Vec<MergedEntry>, l1_ids: &mut [u32], l2_ids: &mut [u32]| {
        let id = entries.len() as u32;
        if let Some(a) = entry.origin.l1() {
            l1_ids[a as usize] = id;
        }
        if let Some(b) = entry.origin.l2() {
            l2_ids[b as usize] = id;
        }
        entries.push(entry);
    };
    let shared_slots = spec.alpha.min(specials.len());
    for &(a, b) in &specials[..shared_slots] {
        let entry = MergedEntry {
            l1_surface: Some(v1.surface(a).to_owned()),
            l2_surface: Some(v2.surface(b).to_owned()),
            origin: Origin::Special { l1: a, l2: b },
        };
        push(entry, &mut entries, &mut l1_ids, &mut l2_ids);
    }
    for p in &usable[..needed] {
        let entry = MergedEntry {
            l1_surface: Some(v1.surface(p.source).to_owned()),
            l2_surface: Some(v2.surface(p.target).to_owned()),
            origin: Origin::SharedAnchor {
                l1: p.source,
                l2: p.target,
                score: p.score,
            },
        };
        push(entry, &mut entries, &mut l1_ids, &mut l2_ids);
    }
    for a in 0..m as u32 {
        if l1_ids[a as usize] == u32::MAX {
            let entry = MergedEntry {
                l1_surface: Some(v1.surface(a).to_owned()),
                l2_surface: None,
                origin: Origin::L1Only { l1: a },
            };
            push(entry, &mut entries, &mut l1_ids, &mut l2_ids);
        }
    }
    for b in 0..m as u32 {
        if l2_ids[b as usize] == u32::MAX {
            let entry = MergedEntry {
                l1_surface: None,
                l2_surface: Some(v2.surface(b).to_owned()),
                origin: Origin::L2Only { l2: b },
            };
            push(entry, &mut entries, &mut l1_ids, &mut l2_ids);
        }
    }
    debug_assert_eq!(entries.len(), n);
    Ok(MergedVocabulary {
        spec,
        anchors_used: needed,
        entries,
        l1_ids,
        l2_ids,
    })
}
