//! The declarative pipeline config: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use smala::anchoring::AnchorPolicy;
use smala::bitext_align::AlignConfig;
use smala::corpus::NormalizationConfig;
use smala::embeddings::{SgnsConfig, Workers};
use smala::eval::{Side, DEFAULT_CSLS_K, DEFAULT_EDGES};
use smala::mapping::SelfLearnConfig;
use smala::segmentation::Scheme;
use smala::vocab_build::{LayoutConfig, LayoutMode, MergeSpec};

use crate::ValidationError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Every stage seed is derived from this one.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub normalization: NormalizationConfig,
    #[serde(default)]
    pub segmentation: SegmentationSection,
    #[serde(default)]
    pub embeddings: EmbeddingSection,
    #[serde(default)]
    pub mapping: MappingSection,
    #[serde(default)]
    pub alignment: AlignConfig,
    #[serde(default)]
    pub anchoring: AnchoringSection,
    #[serde(default)]
    pub build: BuildSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub l1: PathBuf,
    pub l2: PathBuf,
    pub lang1: String,
    pub lang2: String,
    /// Sentence-aligned bitext, needed only by `align-bitext`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitext_l1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitext_l2: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationSection {
    pub scheme: Scheme,
    /// Size of each monolingual vocabulary, special tokens included.
    pub m: usize,
    /// Size of the merged vocabulary built by `merge`.
    pub n: usize,
}

impl Default for SegmentationSection {
    fn default() -> Self {
        SegmentationSection {
            scheme: Scheme::Bpe,
            m: 20_000,
            n: 32_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub start_lr: f32,
    pub min_lr: f32,
    pub workers: Workers,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let d = SgnsConfig::default();
        EmbeddingSection {
            dim: d.dim,
            window: d.window,
            negatives: d.negatives,
            epochs: d.epochs,
            start_lr: d.start_lr,
            min_lr: d.min_lr,
            workers: d.workers,
        }
    }
}

impl EmbeddingSection {
    pub fn sgns(&self, seed: u64) -> SgnsConfig {
        SgnsConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            seed,
            start_lr: self.start_lr,
            min_lr: self.min_lr,
            workers: self.workers,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingSection {
    pub max_iters: usize,
    pub k_vocab: usize,
    pub csls_k: usize,
    pub initial_keep: f64,
    pub keep_multiplier: f64,
    pub stall_interval: usize,
    pub threshold: f64,
    pub reweight: f64,
}

impl Default for MappingSection {
    fn default() -> Self {
        let d = SelfLearnConfig::default();
        MappingSection {
            max_iters: d.max_iters,
            k_vocab: d.k_vocab,
            csls_k: d.csls_k,
            initial_keep: d.initial_keep,
            keep_multiplier: d.keep_multiplier,
            stall_interval: d.stall_interval,
            threshold: d.threshold,
            reweight: d.reweight,
        }
    }
}

impl MappingSection {
    pub fn self_learn(&self, seed: u64) -> SelfLearnConfig {
        SelfLearnConfig {
            max_iters: self.max_iters,
            k_vocab: self.k_vocab,
            csls_k: self.csls_k,
            initial_keep: self.initial_keep,
            keep_multiplier: self.keep_multiplier,
            stall_interval: self.stall_interval,
            threshold: self.threshold,
            reweight: self.reweight,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorSource {
    /// Mutual nearest neighbours in the mapped embedding space.
    #[default]
    Embeddings,
    /// Mutual best translations of the bitext aligner.
    Bitext,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    All,
    TopK,
    MinScore,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchoringSection {
    pub source: AnchorSource,
    pub policy: PolicyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_score: Option<f64>,
}

impl AnchoringSection {
    /// Only meaningful after validation.
    pub fn policy(&self) -> AnchorPolicy {
        match self.policy {
            PolicyKind::All => AnchorPolicy::All,
            PolicyKind::TopK => AnchorPolicy::TopK(self.top_k.unwrap_or(0)),
            PolicyKind::MinScore => AnchorPolicy::MinScore(self.min_score.unwrap_or(f64::NAN)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildMode {
    #[default]
    MtMerge,
    ShareOnly,
    ShareAlign,
}

impl BuildMode {
    pub fn layout_mode(self) -> Option<LayoutMode> {
        match self {
            BuildMode::MtMerge => None,
            BuildMode::ShareOnly => Some(LayoutMode::ShareOnly),
            BuildMode::ShareAlign => Some(LayoutMode::ShareAlign),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildSection {
    pub mode: BuildMode,
    /// Standard deviation of randomly initialized rows in LM layouts.
    pub random_std: f64,
}

impl Default for BuildSection {
    fn default() -> Self {
        BuildSection {
            mode: BuildMode::MtMerge,
            random_std: LayoutConfig::default().random_std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// BLI test set, `source<TAB>target` per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bli: Option<PathBuf>,
    pub csls_k: usize,
    /// Sentences to bucket by their share of false positives/negatives.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bucket_corpus: Option<PathBuf>,
    pub bucket_side: Side,
    pub bucket_edges: Vec<f64>,
    /// System translations and references, one detokenized segment per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub references: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            bli: None,
            csls_k: DEFAULT_CSLS_K,
            bucket_corpus: None,
            bucket_side: Side::Source,
            bucket_edges: DEFAULT_EDGES.to_vec(),
            hypotheses: None,
            references: None,
        }
    }
}

impl PipelineConfig {
    /// Reads and validates a config. Relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| ValidationError(vec![format!("{}: {}", path.display(), e.message())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.l1);
        fix(&mut self.corpus.l2);
        for p in [
            &mut self.out_dir,
            &mut self.corpus.bitext_l1,
            &mut self.corpus.bitext_l2,
            &mut self.eval.bli,
            &mut self.eval.bucket_corpus,
            &mut self.eval.hypotheses,
            &mut self.eval.references,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Every problem with the config, not just the first. Negated
    /// comparisons are deliberate: they reject NaN too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errs = Vec::new();
        let mut need_file = |key: &str, p: &Path| {
            if !p.is_file() {
                errs.push(format!("{key}: file {} does not exist", p.display()));
            }
        };
        need_file("corpus.l1", &self.corpus.l1);
        need_file("corpus.l2", &self.corpus.l2);
        let optional = [
            ("corpus.bitext_l1", &self.corpus.bitext_l1),
            ("corpus.bitext_l2", &self.corpus.bitext_l2),
            ("eval.bli", &self.eval.bli),
            ("eval.bucket_corpus", &self.eval.bucket_corpus),
            ("eval.hypotheses", &self.eval.hypotheses),
            ("eval.references", &self.eval.references),
        ];
        for (key, p) in optional {
            if let Some(p) = p {
                need_file(key, p);
            }
        }

        let c = &self.corpus;
        if c.lang1.trim().is_empty() || c.lang2.trim().is_empty() {
            errs.push("corpus.lang1 and corpus.lang2 must be non-empty".into());
        } else if c.lang1 == c.lang2 {
            errs.push(format!("corpus.lang1 and corpus.lang2 must differ, both are {:?}", c.lang1));
        }
        if c.bitext_l1.is_some() != c.bitext_l2.is_some() {
            errs.push("corpus.bitext_l1 and corpus.bitext_l2 must be given together".into());
        }

        let s = &self.segmentation;
        if s.m == 0 {
            errs.push("segmentation.m must be positive".into());
        } else if let Err(e) = MergeSpec::new(s.m, s.n) {
            if self.build.mode == BuildMode::MtMerge {
                errs.push(format!("segmentation.n: {e}"));
            }
        }

        let e = &self.embeddings;
        if e.dim < 8 {
            errs.push(format!("embeddings.dim must be at least 8, got {}", e.dim));
        }
        for (key, v) in [("window", e.window), ("negatives", e.negatives), ("epochs", e.epochs)] {
            if v == 0 {
                errs.push(format!("embeddings.{key} must be positive"));
            }
        }
        if !(e.start_lr > 0.0 && e.min_lr > 0.0 && e.min_lr <= e.start_lr) {
            errs.push("embeddings: need 0 < min_lr <= start_lr".into());
        }
        if e.workers == Workers::Hogwild(0) {
            errs.push("embeddings.workers: Hogwild needs at least one worker".into());
        }

        let m = &self.mapping;
        for (key, v) in [("max_iters", m.max_iters), ("k_vocab", m.k_vocab), ("csls_k", m.csls_k), ("stall_interval", m.stall_interval)] {
            if v == 0 {
                errs.push(format!("mapping.{key} must be positive"));
            }
        }
        if !(m.initial_keep > 0.0 && m.initial_keep <= 1.0) {
            errs.push(format!("mapping.initial_keep must lie in (0, 1], got {}", m.initial_keep));
        }
        if !(m.keep_multiplier > 1.0) {
            errs.push(format!("mapping.keep_multiplier must exceed 1, got {}", m.keep_multiplier));
        }
        if !(m.threshold >= 0.0) {
            errs.push("mapping.threshold must be non-negative".into());
        }
        if !(m.reweight >= 0.0) {
            errs.push("mapping.reweight must be non-negative".into());
        }

        let a = &self.alignment;
        if a.iters == 0 {
            errs.push("alignment.iters must be positive".into());
        }
        if !(0.0..1.0).contains(&a.p0) {
            errs.push(format!("alignment.p0 must lie in [0, 1), got {}", a.p0));
        }
        if !(a.min_tension > 0.0 && a.min_tension <= a.initial_tension && a.initial_tension <= a.max_tension) {
            errs.push("alignment: need 0 < min_tension <= initial_tension <= max_tension".into());
        }

        let an = &self.anchoring;
        match an.policy {
            PolicyKind::All => {}
            PolicyKind::TopK => match an.top_k {
                Some(k) if k > 0 => {}
                _ => errs.push("anchoring.top_k must be a positive count when policy = \"top_k\"".into()),
            },
            PolicyKind::MinScore => match an.min_score {
                Some(t) if t.is_finite() => {}
                _ => errs.push("anchoring.min_score must be a finite score when policy = \"min_score\"".into()),
            },
        }
        if an.policy != PolicyKind::TopK && an.top_k.is_some() {
            errs.push("anchoring.top_k is set but policy is not \"top_k\"".into());
        }
        if an.policy != PolicyKind::MinScore && an.min_score.is_some() {
            errs.push("anchoring.min_score is set but policy is not \"min_score\"".into());
        }
        if an.source == AnchorSource::Bitext && c.bitext_l1.is_none() {
            errs.push("anchoring.source = \"bitext\" needs corpus.bitext_l1 and corpus.bitext_l2".into());
        }
        if an.source == AnchorSource::Bitext && self.build.mode == BuildMode::ShareAlign {
            errs.push("build.mode = \"share-align\" needs mapped embeddings; use anchoring.source = \"embeddings\"".into());
        }

        if !(self.build.random_std > 0.0 && self.build.random_std.is_finite()) {
            errs.push(format!("build.random_std must be positive, got {}", self.build.random_std));
        }

        let ev = &self.eval;
        if ev.csls_k == 0 {
            errs.push("eval.csls_k must be positive".into());
        }
        let edges = &ev.bucket_edges;
        if edges.is_empty() || !edges.iter().all(|&x| x > 0.0 && x < 1.0) || !edges.windows(2).all(|w| w[0] < w[1]) {
            errs.push(format!("eval.bucket_edges must increase strictly inside (0, 1), got {edges:?}"));
        }
        if ev.hypotheses.is_some() != ev.references.is_some() {
            errs.push("eval.hypotheses and eval.references must be given together".into());
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationError(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PipelineConfig {
        toml::from_str(
            r#"
            seed = 7
            [corpus]
            l1 = "a.txt"
            l2 = "b.txt"
            lang1 = "en"
            lang2 = "xx"
            [segmentation]
            scheme = "UnigramLM"
            m = 2000
            n = 3000
            [embeddings]
            dim = 64
            workers = { Hogwild = 4 }
            [anchoring]
            policy = "top_k"
            top_k = 500
            [build]
            mode = "share-align"
            [eval]
            bucket_side = "target"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = sample();
        assert_eq!(cfg.segmentation.scheme, Scheme::UnigramLm);
        assert_eq!(cfg.embeddings.workers, Workers::Hogwild(4));
        assert_eq!(cfg.anchoring.policy(), AnchorPolicy::TopK(500));
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let defaults: PipelineConfig = toml::from_str("[corpus]\nl1='a'\nl2='b'\nlang1='x'\nlang2='y'").unwrap();
        assert_eq!(toml::from_str::<PipelineConfig>(&defaults.to_toml()).unwrap(), defaults);
        assert_eq!(defaults.embeddings.window, 5);
        assert_eq!(defaults.embeddings.negatives, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("[corpus]\nl1='a'\nl2='b'\nlang1='x'\nlang2='y'\ntypo=1").is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = sample();
        cfg.embeddings.dim = 4;
        cfg.mapping.initial_keep = 0.0;
        cfg.anchoring.top_k = None;
        cfg.eval.bucket_edges = vec![0.5, 0.2];
        cfg.corpus.lang2 = "en".into();
        let errs = cfg.validate().unwrap_err().0;
        let has = |needle: &str| errs.iter().any(|e| e.contains(needle));
        assert!(has("corpus.l1"), "{errs:?}");
        assert!(has("corpus.l2"));
        assert!(has("must differ"));
        assert!(has("embeddings.dim"));
        assert!(has("initial_keep"));
        assert!(has("anchoring.top_k"));
        assert!(has("bucket_edges"));
        assert_eq!(errs.len(), 7, "{errs:?}");
    }

    #[test]
    fn merge_sizes_are_checked_only_for_merging() {
        let mut cfg = sample();
        cfg.segmentation.n = 5000;
        let errs = |c: &PipelineConfig| c.validate().unwrap_err().0;
        assert!(!errs(&cfg).iter().any(|e| e.contains("segmentation.n")));
        cfg.build.mode = BuildMode::MtMerge;
        assert!(errs(&cfg).iter().any(|e| e.contains("segmentation.n")));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = sample();
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.corpus.l1, Path::new("/data/run/a.txt"));
    }
}
