use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnchorDictionary;
use crate::segmentation::Vocabulary;
use crate::Result;

/// Identical surfaces across the two vocabularies, split by what the anchors
/// say about them. Only subwords that occur in training data take part.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedPairClassification {
    /// Identical surfaces with no anchor on either side.
    pub false_positives: BTreeSet<String>,
    /// Anchors whose two surfaces differ, as `(L1 id, L2 id)`.
    pub false_negatives: BTreeSet<(u32, u32)>,
    /// Anchors joining a surface to itself.
    pub true_shared: BTreeSet<(u32, u32)>,
    /// Identical surfaces where either side is anchored to something else;
    /// their anchors are false negatives and they are not false positives.
    pub reclassified: BTreeSet<String>,
}

/// Pairs of identical active surfaces, as `(surface, L1 id, L2 id)`.
fn identical_pairs(v1: &Vocabulary, v2: &Vocabulary) -> Vec<(String, u32, u32)> {
    v1.active_ids()
        .filter_map(|a| {
            let s = v1.surface(a);
            let b = v2.id(s)?;
            (!v2.is_special(b) && v2.freq(b) > 0).then(|| (s.to_owned(), a, b))
        })
        .collect()
}

pub fn classify_shared_pairs(anchors: &AnchorDictionary, v1: &Vocabulary, v2: &Vocabulary) -> SharedPairClassification {
    let fwd: HashMap<u32, u32> = anchors.pairs.iter().map(|p| (p.source, p.target)).collect();
    let bwd: HashMap<u32, u32> = anchors.pairs.iter().map(|p| (p.target, p.source)).collect();
    let mut out = SharedPairClassification::default();
    for p in &anchors.pairs {
        if v1.surface(p.source) != v2.surface(p.target) {
            out.false_negatives.insert((p.source, p.target));
        }
    }
    for (s, a, b) in identical_pairs(v1, v2) {
        match (fwd.get(&a), bwd.get(&b)) {
            (Some(&t), _) if t == b => {
                out.true_shared.insert((a, b));
            }
            (None, None) => {
                out.false_positives.insert(s);
            }
            _ => {
                out.reclassified.insert(s);
            }
        }
    }
    out
}

/// Shared-entry sets for the ablation settings, each as sorted
/// `(L1 id, L2 id)` pairs forming a partial matching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSets {
    /// Every identical-surface pair.
    pub joint: Vec<(u32, u32)>,
    /// Identical pairs that the anchors confirm; every other identical
    /// surface (unanchored or anchored elsewhere) is treated as a false
    /// positive and split.
    pub minus_fp: Vec<(u32, u32)>,
    /// All identical pairs plus the false-negative anchors, minus the
    /// identical pairs those anchors conflict with.
    pub minus_fn: Vec<(u32, u32)>,
    /// The anchors themselves.
    pub smala: Vec<(u32, u32)>,
}

impl AblationSets {
    pub fn sizes(&self) -> BTreeMap<&'static str, usize> {
        BTreeMap::from([
            ("joint", self.joint.len()),
            ("minus_fp", self.minus_fp.len()),
            ("minus_fn", self.minus_fn.len()),
            ("smala", self.smala.len()),
        ])
    }
}

pub fn ablation_anchor_sets(
    class: &SharedPairClassification,
    anchors: &AnchorDictionary,
    v1: &Vocabulary,
    v2: &Vocabulary,
) -> AblationSets {
    let joint: BTreeSet<(u32, u32)> = identical_pairs(v1, v2).into_iter().map(|(_, a, b)| (a, b)).collect();
    let minus_fp: Vec<(u32, u32)> = joint.intersection(&class.true_shared).copied().collect();
    let fn_src: BTreeSet<u32> = class.false_negatives.iter().map(|p| p.0).collect();
    let fn_trg: BTreeSet<u32> = class.false_negatives.iter().map(|p| p.1).collect();
    let mut minus_fn: BTreeSet<(u32, u32)> = joint
        .iter()
        .filter(|(a, b)| !fn_src.contains(a) && !fn_trg.contains(b))
        .copied()
        .collect();
    minus_fn.extend(class.false_negatives.iter().copied());
    let smala: BTreeSet<(u32, u32)> = anchors.pairs.iter().map(|p| (p.source, p.target)).collect();
    AblationSets {
        joint: joint.into_iter().collect(),
        minus_fp,
        minus_fn: minus_fn.into_iter().collect(),
        smala: smala.into_iter().collect(),
    }
}

const REPORT_EXAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub counts: BTreeMap<String, usize>,
    pub examples: BTreeMap<String, Vec<String>>,
}

impl ClassificationReport {
    pub fn new(class: &SharedPairClassification, sets: Option<&AblationSets>, v1: &Vocabulary, v2: &Vocabulary) -> Self {
        let pair = |&(a, b): &(u32, u32)| format!("{} -> {}", v1.surface(a), v2.surface(b));
        let mut counts = BTreeMap::from([
            ("false_positives".to_owned(), class.false_positives.len()),
            ("false_negatives".to_owned(), class.false_negatives.len()),
            ("true_shared".to_owned(), class.true_shared.len()),
            ("reclassified".to_owned(), class.reclassified.len()),
        ]);
        if let Some(sets) = sets {
            for (k, v) in sets.sizes() {
                counts.insert(format!("set_{k}"), v);
            }
        }
        let examples = BTreeMap::from([
            ("false_positives".to_owned(), class.false_positives.iter().take(REPORT_EXAMPLES).cloned().collect()),
            ("false_negatives".to_owned(), class.false_negatives.iter().take(REPORT_EXAMPLES).map(pair).collect()),
            ("true_shared".to_owned(), class.true_shared.iter().take(REPORT_EXAMPLES).map(pair).collect()),
            ("reclassified".to_owned(), class.reclassified.iter().take(REPORT_EXAMPLES).cloned().collect()),
        ]);
        ClassificationReport { counts, examples }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchoring::ScoredPair;
    use crate::segmentation::{default_specials, Entry, Scheme};

    fn vocab(lang: &str, words: &[&str]) -> Vocabulary {
        let entries = words
            .iter()
            .map(|w| Entry {
                subword: w.to_string(),
                freq: 1,
                logprob: None,
            })
            .collect();
        Vocabulary::new(Scheme::Bpe, lang, default_specials(), entries, vec![])
    }

    fn dict(v1: &Vocabulary, v2: &Vocabulary, pairs: &[(&str, &str)]) -> AnchorDictionary {
        AnchorDictionary {
            pairs: pairs
                .iter()
                .map(|(a, b)| ScoredPair {
                    source: v1.id(a).unwrap(),
                    target: v2.id(b).unwrap(),
                    score: 0.5,
                })
                .collect(),
            threshold_used: Some(0.5),
        }
    }

    fn setup() -> (Vocabulary, Vocabulary, AnchorDictionary) {
        let v1 = vocab("en", &["fast", "taxi", "die", "also", "and", "quick"]);
        let v2 = vocab("de", &["fast", "taxi", "die", "also", "auch", "und", "schnell"]);
        let d = dict(&v1, &v2, &[("fast", "schnell"), ("taxi", "taxi"), ("also", "auch"), ("and", "und")]);
        (v1, v2, d)
    }

    #[test]
    fn worked_examples() {
        let (v1, v2, d) = setup();
        let c = classify_shared_pairs(&d, &v1, &v2);
        let id = |v: &Vocabulary, s: &str| v.id(s).unwrap();
        assert!(c.false_negatives.contains(&(id(&v1, "fast"), id(&v2, "schnell"))));
        assert!(!c.false_positives.contains("fast"));
        assert!(c.reclassified.contains("fast"));
        assert!(c.true_shared.contains(&(id(&v1, "taxi"), id(&v2, "taxi"))));
        assert_eq!(c.false_positives, BTreeSet::from(["die".to_owned()]));
        assert_eq!(c.false_negatives.len(), 3);
    }

    #[test]
    fn identical_surfaces_are_partitioned() {
        let (v1, v2, d) = setup();
        let c = classify_shared_pairs(&d, &v1, &v2);
        let shared: BTreeSet<String> = c.true_shared.iter().map(|&(a, _)| v1.surface(a).to_owned()).collect();
        let all: BTreeSet<String> = identical_pairs(&v1, &v2).into_iter().map(|t| t.0).collect();
        let mut union = shared.clone();
        union.extend(c.false_positives.iter().cloned());
        union.extend(c.reclassified.iter().cloned());
        assert_eq!(union, all);
        assert_eq!(shared.len() + c.false_positives.len() + c.reclassified.len(), all.len());
        assert!(c.false_positives.is_disjoint(&shared));
    }

    #[test]
    fn ablation_set_arithmetic() {
        let (v1, v2, d) = setup();
        let c = classify_shared_pairs(&d, &v1, &v2);
        let s = ablation_anchor_sets(&c, &d, &v1, &v2);
        let id = |v: &Vocabulary, x: &str| v.id(x).unwrap();
        // joint: fast, taxi, die, also
        assert_eq!(s.joint.len(), 4);
        assert_eq!(s.minus_fp, vec![(id(&v1, "taxi"), id(&v2, "taxi"))]);
        // die and taxi stay; fast/also give way to their anchors; and-und joins
        let mut expect = vec![
            (id(&v1, "taxi"), id(&v2, "taxi")),
            (id(&v1, "die"), id(&v2, "die")),
            (id(&v1, "fast"), id(&v2, "schnell")),
            (id(&v1, "also"), id(&v2, "auch")),
            (id(&v1, "and"), id(&v2, "und")),
        ];
        expect.sort();
        assert_eq!(s.minus_fn, expect);
        assert_eq!(s.smala.len(), 4);
        assert!(s.minus_fp.len() <= s.joint.len());
        assert!(s.minus_fn.len() >= s.joint.len() - c.reclassified.len());
        // the set-size identities used to read the paper's ablation table
        assert_eq!(s.joint.len() - s.minus_fp.len(), c.false_positives.len() + c.reclassified.len());
        assert_eq!(s.smala.len() - s.minus_fp.len(), c.false_negatives.len());
    }

    #[test]
    fn ablation_sets_are_matchings() {
        let (v1, v2, d) = setup();
        let c = classify_shared_pairs(&d, &v1, &v2);
        let s = ablation_anchor_sets(&c, &d, &v1, &v2);
        for set in [&s.joint, &s.minus_fp, &s.minus_fn, &s.smala] {
            let src: BTreeSet<u32> = set.iter().map(|p| p.0).collect();
            let trg: BTreeSet<u32> = set.iter().map(|p| p.1).collect();
            assert_eq!(src.len(), set.len());
            assert_eq!(trg.len(), set.len());
        }
    }

    #[test]
    fn report_serializes() {
        let (v1, v2, d) = setup();
        let c = classify_shared_pairs(&d, &v1, &v2);
        let s = ablation_anchor_sets(&c, &d, &v1, &v2);
        let r = ClassificationReport::new(&c, Some(&s), &v1, &v2);
        assert_eq!(r.counts["false_positives"], 1);
        assert_eq!(r.counts["set_minus_fn"], 5);
        assert!(r.examples["false_negatives"].contains(&"fast -> schnell".to_owned()));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.json");
        r.save_json(&p).unwrap();
        let back: ClassificationReport = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
