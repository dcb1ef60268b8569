//! One function per subcommand. Each declares its inputs, settings and
//! outputs; the runner skips it when the manifest shows an identical run
//! whose outputs are intact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde_json::{json, Value};
use smala::anchoring::{
    ablation_anchor_sets, classify_shared_pairs, cosine_similarity_between, mutual_argmax, select_anchors, AnchorDictionary,
    AnchorPolicy, ClassificationReport, SimilarityMatrix,
};
use smala::bitext_align::{similarity_from_bitext, train_ibm2_fast, viterbi_links, write_pharaoh, AlignmentModel, Direction};
use smala::corpus::{normalize_sentence, read_bitext, SentenceStream};
use smala::embeddings::{read_word2vec, train_sgns, write_word2vec, EmbeddingMatrix};
use smala::eval::{bli_precision_at_1, bucket_by_fpfn, corpus_bleu, save_report, BliTestSet, EvalSpace, Side, Smoothing};
use smala::pipeline::{learn_vocabulary, map_spaces};
use smala::segmentation::Vocabulary;
use smala::vocab_build::{build_lm_layout, merge_for_mt, LayoutConfig};
use smala::{Error, Exec};

use crate::config::{AnchorSource, BuildMode, PipelineConfig};
use crate::manifest::{hash_bytes, hash_file, stage_seed, Manifest, StageRecord};
use crate::{Stage, ValidationError};

pub const VOCAB1: &str = "vocab.l1.json";
pub const VOCAB2: &str = "vocab.l2.json";
pub const EMB1: &str = "emb.l1.vec";
pub const EMB2: &str = "emb.l2.vec";
pub const EMB_STATS: &str = "embedding_stats.json";
pub const MAPPED1: &str = "mapped.l1.vec";
pub const MAPPED2: &str = "mapped.l2.vec";
pub const TRACE: &str = "mapping_trace.json";
pub const ALIGN_FWD: &str = "align.fwd.txt";
pub const ALIGN_REV: &str = "align.rev.txt";
pub const BITEXT_PAIRS: &str = "bitext_pairs.tsv";
pub const ANCHORS: &str = "anchors.tsv";
pub const CLASSIFICATION: &str = "classification.json";
pub const MERGED: &str = "merged_vocab.json";
pub const LAYOUT: &str = "layout.json";
pub const LAYOUT_VEC: &str = "layout.l2.vec";
pub const BLI: &str = "bli_report.json";
pub const BUCKETS: &str = "buckets.json";
pub const BLEU: &str = "bleu.json";

/// The subcommand that writes an artifact.
fn producer(artifact: &str) -> Stage {
    match artifact {
        VOCAB1 | VOCAB2 => Stage::LearnVocab,
        EMB1 | EMB2 | EMB_STATS => Stage::TrainEmb,
        MAPPED1 | MAPPED2 | TRACE => Stage::Map,
        ALIGN_FWD | ALIGN_REV | BITEXT_PAIRS => Stage::AlignBitext,
        ANCHORS | CLASSIFICATION => Stage::Anchor,
        MERGED => Stage::Merge,
        LAYOUT | LAYOUT_VEC => Stage::Layout,
        BLI => Stage::EvalBli,
        BUCKETS => Stage::EvalBuckets,
        _ => Stage::Bleu,
    }
}

enum Input {
    /// A file this tool wrote into the output directory.
    Artifact(&'static str),
    /// A user file named by the config.
    External(&'static str, PathBuf),
}

struct StageSpec {
    stage: Stage,
    inputs: Vec<Input>,
    settings: Value,
    seeds: BTreeMap<String, u64>,
    outputs: Vec<&'static str>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Cached,
}

pub struct Runner {
    pub cfg: PipelineConfig,
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub force: bool,
    pub exec: Exec,
}

impl Runner {
    fn path(&self, artifact: &str) -> PathBuf {
        self.dir.join(artifact)
    }

    fn seed(&self, stage: Stage) -> u64 {
        stage_seed(self.cfg.seed, stage.name())
    }

    fn execute(&mut self, spec: StageSpec, body: impl FnOnce(&Runner) -> anyhow::Result<Value>) -> anyhow::Result<Outcome> {
        let name = spec.stage.name();
        let mut missing = Vec::new();
        let mut inputs = BTreeMap::new();
        for input in &spec.inputs {
            let (label, path) = match input {
                Input::Artifact(a) => (a.to_string(), self.path(a)),
                Input::External(key, p) => (format!("{key}:{}", p.display()), p.clone()),
            };
            match hash_file(&path) {
                Ok(h) => {
                    inputs.insert(label, h);
                }
                Err(_) => missing.push(match input {
                    Input::Artifact(a) => format!("missing artifact {a}; run `smala {}` first", producer(a).name()),
                    Input::External(key, p) => format!("{key}: file {} does not exist", p.display()),
                }),
            }
        }
        if !missing.is_empty() {
            return Err(ValidationError(missing).into());
        }
        let key = hash_bytes(
            serde_json::to_string(&json!({
                "stage": name,
                "settings": spec.settings,
                "seeds": spec.seeds,
                "inputs": inputs,
            }))?
            .as_bytes(),
        );
        if !self.force && self.manifest.is_fresh(&self.dir, name, &key) {
            log::info!("{name}: up to date, skipping");
            return Ok(Outcome::Cached);
        }
        log::info!("{name}: running");
        let start = Instant::now();
        let details = body(self).with_context(|| format!("stage {name} failed"))?;
        let mut outputs = BTreeMap::new();
        for out in &spec.outputs {
            let h = hash_file(&self.path(out)).with_context(|| format!("stage {name} did not write {out}"))?;
            outputs.insert(out.to_string(), h);
        }
        // Stale records of stages that overwrote the same files go away.
        self.manifest
            .stages
            .retain(|other, rec| other == name || !rec.outputs.keys().any(|o| outputs.contains_key(o)));
        self.manifest.stages.insert(
            name.to_string(),
            StageRecord {
                key,
                seeds: spec.seeds,
                inputs,
                outputs,
                details,
                seconds: start.elapsed().as_secs_f64(),
            },
        );
        self.manifest.save(&self.dir)?;
        Ok(Outcome::Ran)
    }

    pub fn run(&mut self, stage: Stage) -> anyhow::Result<Outcome> {
        match stage {
            Stage::LearnVocab => self.learn_vocab(),
            Stage::TrainEmb => self.train_emb(),
            Stage::Map => self.map(),
            Stage::AlignBitext => self.align_bitext(),
            Stage::Anchor => self.anchor(),
            Stage::Merge => self.merge(),
            Stage::Layout => self.layout(),
            Stage::EvalBli => self.eval_bli(),
            Stage::EvalBuckets => self.eval_buckets(),
            Stage::Bleu => self.bleu(),
            Stage::Pipeline => unreachable!("the pipeline is a sequence of stages"),
        }
    }

    /// Stages `pipeline` runs under this config, in order.
    pub fn plan(cfg: &PipelineConfig) -> Vec<Stage> {
        let mut plan = vec![Stage::LearnVocab];
        let needs_embeddings = cfg.anchoring.source == AnchorSource::Embeddings || cfg.build.mode != BuildMode::MtMerge || cfg.eval.bli.is_some();
        if needs_embeddings {
            plan.push(Stage::TrainEmb);
        }
        if cfg.anchoring.source == AnchorSource::Embeddings || cfg.build.mode == BuildMode::ShareAlign || cfg.eval.bli.is_some() {
            plan.push(Stage::Map);
        }
        if cfg.anchoring.source == AnchorSource::Bitext {
            plan.push(Stage::AlignBitext);
        }
        plan.push(Stage::Anchor);
        plan.push(match cfg.build.mode {
            BuildMode::MtMerge => Stage::Merge,
            _ => Stage::Layout,
        });
        if cfg.eval.bli.is_some() {
            plan.push(Stage::EvalBli);
        }
        if cfg.eval.bucket_corpus.is_some() {
            plan.push(Stage::EvalBuckets);
        }
        if cfg.eval.hypotheses.is_some() {
            plan.push(Stage::Bleu);
        }
        plan
    }

    fn corpora(&self) -> Vec<Input> {
        vec![
            Input::External("corpus.l1", self.cfg.corpus.l1.clone()),
            Input::External("corpus.l2", self.cfg.corpus.l2.clone()),
        ]
    }

    fn sentences(&self, path: &Path, language: &str) -> anyhow::Result<Vec<String>> {
        let stream = SentenceStream::from_file(path, language).with_normalization(self.cfg.normalization);
        let (sentences, stats) = stream.sentences().with_context(|| format!("reading {}", path.display()))?;
        if stats.dropped_empty > 0 {
            log::info!("{}: dropped {} lines empty after normalization", path.display(), stats.dropped_empty);
        }
        Ok(sentences)
    }

    fn vocabs(&self) -> anyhow::Result<(Vocabulary, Vocabulary)> {
        Ok((Vocabulary::load_json(&self.path(VOCAB1))?, Vocabulary::load_json(&self.path(VOCAB2))?))
    }

    /// Reads a word2vec file whose labels must be `vocab`'s surfaces in ID order.
    fn embeddings(&self, artifact: &str, vocab: &Vocabulary) -> anyhow::Result<EmbeddingMatrix> {
        let (labels, matrix) = read_word2vec(&self.path(artifact))?;
        let aligned = labels.len() == vocab.len() && labels.iter().enumerate().all(|(i, l)| l == vocab.surface(i as u32));
        if !aligned {
            return Err(Error::VocabMismatch(format!("{artifact} was not written for the current vocabulary; rerun `smala {}`", producer(artifact).name())).into());
        }
        Ok(matrix)
    }

    fn mapped_similarity(&self, v1: &Vocabulary, v2: &Vocabulary) -> anyhow::Result<SimilarityMatrix> {
        let x = self.embeddings(MAPPED1, v1)?;
        let z = self.embeddings(MAPPED2, v2)?;
        let rows: Vec<u32> = v1.active_ids().collect();
        let cols: Vec<u32> = v2.active_ids().collect();
        Ok(cosine_similarity_between(&x, &rows, &z, &cols, self.exec)?)
    }

    fn learn_vocab(&mut self) -> anyhow::Result<Outcome> {
        let c = &self.cfg;
        let spec = StageSpec {
            stage: Stage::LearnVocab,
            inputs: self.corpora(),
            settings: json!({
                "languages": [c.corpus.lang1, c.corpus.lang2],
                "normalization": c.normalization,
                "scheme": c.segmentation.scheme,
                "m": c.segmentation.m,
            }),
            seeds: BTreeMap::new(),
            outputs: vec![VOCAB1, VOCAB2],
        };
        self.execute(spec, |r| {
            let c = &r.cfg;
            let mut details = serde_json::Map::new();
            for (path, lang, out) in [(&c.corpus.l1, &c.corpus.lang1, VOCAB1), (&c.corpus.l2, &c.corpus.lang2, VOCAB2)] {
                let sentences = r.sentences(path, lang)?;
                let vocab = learn_vocabulary(&sentences, lang, c.segmentation.scheme, c.segmentation.m, r.exec)?;
                vocab.save_json(&r.path(out))?;
                details.insert(lang.clone(), json!({ "sentences": sentences.len(), "size": vocab.len() }));
            }
            Ok(Value::Object(details))
        })
    }

    fn train_emb(&mut self) -> anyhow::Result<Outcome> {
        // Both languages share the stage seed.
        let seed = self.seed(Stage::TrainEmb);
        let mut inputs = self.corpora();
        inputs.extend([Input::Artifact(VOCAB1), Input::Artifact(VOCAB2)]);
        let spec = StageSpec {
            stage: Stage::TrainEmb,
            inputs,
            settings: json!({ "embeddings": self.cfg.embeddings, "normalization": self.cfg.normalization }),
            seeds: [("sgns".to_string(), seed)].into(),
            outputs: vec![EMB1, EMB2, EMB_STATS],
        };
        self.execute(spec, |r| {
            let c = &r.cfg;
            let sgns = c.embeddings.sgns(seed);
            let (v1, v2) = r.vocabs()?;
            let mut stats = serde_json::Map::new();
            for (path, vocab, out) in [(&c.corpus.l1, &v1, EMB1), (&c.corpus.l2, &v2, EMB2)] {
                let sentences = r.sentences(path, vocab.language())?;
                let trained = train_sgns(&sentences, vocab, &sgns)?;
                let labels: Vec<&str> = (0..vocab.len() as u32).map(|i| vocab.surface(i)).collect();
                write_word2vec(&r.path(out), &labels, &trained.matrix)?;
                stats.insert(
                    vocab.language().to_string(),
                    json!({ "epoch_losses": trained.epoch_losses, "corpus_fingerprint": trained.corpus_fingerprint }),
                );
            }
            let stats = Value::Object(stats);
            std::fs::write(r.path(EMB_STATS), serde_json::to_string_pretty(&stats)?)?;
            Ok(Value::Null)
        })
    }

    fn map(&mut self) -> anyhow::Result<Outcome> {
        let seed = self.seed(Stage::Map);
        let spec = StageSpec {
            stage: Stage::Map,
            inputs: vec![Input::Artifact(VOCAB1), Input::Artifact(VOCAB2), Input::Artifact(EMB1), Input::Artifact(EMB2)],
            settings: json!({ "mapping": self.cfg.mapping }),
            seeds: [("self_learning".to_string(), seed)].into(),
            outputs: vec![MAPPED1, MAPPED2, TRACE],
        };
        self.execute(spec, |r| {
            let (v1, v2) = r.vocabs()?;
            let e1 = r.embeddings(EMB1, &v1)?;
            let e2 = r.embeddings(EMB2, &v2)?;
            let space = map_spaces(&v1, &e1, &v2, &e2, &r.cfg.mapping.self_learn(seed), r.exec)?;
            for (vocab, m, out) in [(&v1, &space.x, MAPPED1), (&v2, &space.z, MAPPED2)] {
                let labels: Vec<&str> = (0..vocab.len() as u32).map(|i| vocab.surface(i)).collect();
                write_word2vec(&r.path(out), &labels, m)?;
            }
            let trace = &space.mapped.trace;
            trace.save_json(&r.path(TRACE))?;
            if !trace.converged {
                log::warn!("mapping stopped at the iteration cap without converging");
            }
            Ok(json!({
                "converged": trace.converged,
                "iterations": trace.iterations.len(),
                "dictionary_size": trace.final_dictionary_size,
                "mean_similarity": trace.final_mean_similarity,
            }))
        })
    }

    fn align_bitext(&mut self) -> anyhow::Result<Outcome> {
        let c = &self.cfg;
        let (Some(b1), Some(b2)) = (c.corpus.bitext_l1.clone(), c.corpus.bitext_l2.clone()) else {
            return Err(ValidationError(vec!["align-bitext needs corpus.bitext_l1 and corpus.bitext_l2".into()]).into());
        };
        let spec = StageSpec {
            stage: Stage::AlignBitext,
            inputs: vec![
                Input::External("corpus.bitext_l1", b1.clone()),
                Input::External("corpus.bitext_l2", b2.clone()),
                Input::Artifact(VOCAB1),
                Input::Artifact(VOCAB2),
            ],
            settings: json!({ "alignment": c.alignment, "normalization": c.normalization }),
            seeds: BTreeMap::new(),
            outputs: vec![ALIGN_FWD, ALIGN_REV, BITEXT_PAIRS],
        };
        self.execute(spec, |r| {
            let c = &r.cfg;
            let (v1, v2) = r.vocabs()?;
            let left = SentenceStream::from_file(&b1, &c.corpus.lang1).with_normalization(c.normalization);
            let right = SentenceStream::from_file(&b2, &c.corpus.lang2).with_normalization(c.normalization);
            let pairs = read_bitext(&left, &right)?;
            let fwd = train_ibm2_fast(&pairs, &v1, &v2, Direction::Fwd, &c.alignment, r.exec)?;
            let rev = train_ibm2_fast(&pairs, &v1, &v2, Direction::Rev, &c.alignment, r.exec)?;
            let l: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
            let t: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
            let (e1, e2) = (v1.encode_corpus(&l, r.exec), v2.encode_corpus(&t, r.exec));
            let links = |m: &AlignmentModel, swap: bool| -> Vec<Vec<(usize, usize)>> {
                e1.iter()
                    .zip(&e2)
                    .map(|(a, b)| {
                        if swap {
                            viterbi_links(m, b, a).into_iter().map(|(i, j)| (j, i)).collect()
                        } else {
                            viterbi_links(m, a, b)
                        }
                    })
                    .collect()
            };
            for (m, swap, out) in [(&fwd, false, ALIGN_FWD), (&rev, true, ALIGN_REV)] {
                let mut w = BufWriter::new(File::create(r.path(out))?);
                write_pharaoh(&mut w, &links(m, swap))?;
            }
            let s = similarity_from_bitext(&fwd, &rev, &v1, &v2)?;
            let mutual = mutual_argmax(&s, r.exec);
            let dict = select_anchors(&mutual.pairs, AnchorPolicy::All)?;
            dict.write_tsv(&r.path(BITEXT_PAIRS), &v1, &v2)?;
            Ok(json!({
                "sentence_pairs": pairs.len(),
                "log_likelihood_fwd": fwd.log_likelihoods,
                "log_likelihood_rev": rev.log_likelihoods,
                "mutual_pairs": dict.len(),
            }))
        })
    }

    fn anchor(&mut self) -> anyhow::Result<Outcome> {
        let source = self.cfg.anchoring.source;
        let mut inputs = vec![Input::Artifact(VOCAB1), Input::Artifact(VOCAB2)];
        match source {
            AnchorSource::Embeddings => inputs.extend([Input::Artifact(MAPPED1), Input::Artifact(MAPPED2)]),
            AnchorSource::Bitext => inputs.push(Input::Artifact(BITEXT_PAIRS)),
        }
        let spec = StageSpec {
            stage: Stage::Anchor,
            inputs,
            settings: json!({ "anchoring": self.cfg.anchoring }),
            seeds: BTreeMap::new(),
            outputs: vec![ANCHORS, CLASSIFICATION],
        };
        self.execute(spec, |r| {
            let (v1, v2) = r.vocabs()?;
            let (mutual, ties) = match source {
                AnchorSource::Embeddings => {
                    let m = mutual_argmax(&r.mapped_similarity(&v1, &v2)?, r.exec);
                    (m.pairs, m.ties)
                }
                AnchorSource::Bitext => (AnchorDictionary::read_tsv(&r.path(BITEXT_PAIRS), &v1, &v2)?.pairs, 0),
            };
            let anchors = select_anchors(&mutual, r.cfg.anchoring.policy())?;
            anchors.write_tsv(&r.path(ANCHORS), &v1, &v2)?;
            let class = classify_shared_pairs(&anchors, &v1, &v2);
            let sets = ablation_anchor_sets(&class, &anchors, &v1, &v2);
            ClassificationReport::new(&class, Some(&sets), &v1, &v2).save_json(&r.path(CLASSIFICATION))?;
            Ok(json!({
                "mutual_pairs": mutual.len(),
                "ties": ties,
                "anchors": anchors.len(),
                "threshold_used": anchors.threshold_used,
                "ablation_sizes": sets.sizes(),
            }))
        })
    }

    fn merge(&mut self) -> anyhow::Result<Outcome> {
        let spec = StageSpec {
            stage: Stage::Merge,
            inputs: vec![Input::Artifact(VOCAB1), Input::Artifact(VOCAB2), Input::Artifact(ANCHORS)],
            settings: json!({ "n": self.cfg.segmentation.n }),
            seeds: BTreeMap::new(),
            outputs: vec![MERGED],
        };
        self.execute(spec, |r| {
            let (v1, v2) = r.vocabs()?;
            let anchors = AnchorDictionary::read_tsv(&r.path(ANCHORS), &v1, &v2)?;
            let merged = merge_for_mt(&v1, &v2, &anchors, r.cfg.segmentation.n)?;
            merged.save_json(&r.path(MERGED))?;
            Ok(json!({
                "m": merged.spec.m,
                "n": merged.spec.n,
                "alpha": merged.spec.alpha,
                "anchors_used": merged.anchors_used,
                "size": merged.len(),
            }))
        })
    }

    fn layout(&mut self) -> anyhow::Result<Outcome> {
        let seed = self.seed(Stage::Layout);
        let Some(mode) = self.cfg.build.mode.layout_mode() else {
            return Err(ValidationError(vec!["layout needs build.mode = \"share-only\" or \"share-align\"".into()]).into());
        };
        let mut inputs = vec![Input::Artifact(VOCAB1), Input::Artifact(VOCAB2), Input::Artifact(ANCHORS), Input::Artifact(EMB1)];
        if self.cfg.build.mode == BuildMode::ShareAlign {
            inputs.extend([Input::Artifact(MAPPED1), Input::Artifact(MAPPED2)]);
        }
        let spec = StageSpec {
            stage: Stage::Layout,
            inputs,
            settings: json!({ "build": self.cfg.build }),
            seeds: [("random_rows".to_string(), seed)].into(),
            outputs: vec![LAYOUT, LAYOUT_VEC],
        };
        self.execute(spec, |r| {
            let (v1, v2) = r.vocabs()?;
            let anchors = AnchorDictionary::read_tsv(&r.path(ANCHORS), &v1, &v2)?;
            let e1 = r.embeddings(EMB1, &v1)?;
            let s = match r.cfg.build.mode {
                BuildMode::ShareAlign => Some(r.mapped_similarity(&v1, &v2)?),
                _ => None,
            };
            let lc = LayoutConfig {
                seed,
                random_std: r.cfg.build.random_std,
            };
            let layout = build_lm_layout(&v1, &v2, &anchors, &e1, s.as_ref(), mode, &lc)?;
            layout.save_json(&r.path(LAYOUT), &v2)?;
            layout.write_word2vec(&r.path(LAYOUT_VEC), &e1, &v2)?;
            Ok(json!({
                "tied": layout.tied_count(),
                "random": layout.random_count(),
                "sharing_percentage": layout.sharing_percentage(),
            }))
        })
    }

    fn eval_bli(&mut self) -> anyhow::Result<Outcome> {
        let Some(test) = self.cfg.eval.bli.clone() else {
            return Err(ValidationError(vec!["eval-bli needs eval.bli".into()]).into());
        };
        let spec = StageSpec {
            stage: Stage::EvalBli,
            inputs: vec![
                Input::External("eval.bli", test.clone()),
                Input::Artifact(VOCAB1),
                Input::Artifact(VOCAB2),
                Input::Artifact(MAPPED1),
                Input::Artifact(MAPPED2),
            ],
            settings: json!({ "csls_k": self.cfg.eval.csls_k, "normalization": self.cfg.normalization }),
            seeds: BTreeMap::new(),
            outputs: vec![BLI],
        };
        self.execute(spec, |r| {
            let (v1, v2) = r.vocabs()?;
            let x = r.embeddings(MAPPED1, &v1)?;
            let z = r.embeddings(MAPPED2, &v2)?;
            let report = bli_precision_at_1(
                &BliTestSet::from_tsv(&test)?,
                EvalSpace { vocab: &v1, embeddings: &x },
                EvalSpace { vocab: &v2, embeddings: &z },
                r.cfg.eval.csls_k,
                &r.cfg.normalization,
                r.exec,
            )?;
            report.save_json(&r.path(BLI))?;
            Ok(json!({ "precision_at_1": report.precision_at_1, "evaluated": report.evaluated }))
        })
    }

    /// Normalized lines, with lines that normalize to nothing kept as empty
    /// so that line numbers still match the translations.
    fn aligned_lines(&self, path: &Path) -> anyhow::Result<Vec<String>> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        text.lines()
            .map(|l| match normalize_sentence(l, &self.cfg.normalization) {
                Ok(s) => Ok(s),
                Err(Error::EmptySentence) => Ok(String::new()),
                Err(e) => Err(e.into()),
            })
            .collect()
    }

    fn translations(&self) -> anyhow::Result<Option<(Vec<String>, Vec<String>)>> {
        let (Some(h), Some(r)) = (&self.cfg.eval.hypotheses, &self.cfg.eval.references) else {
            return Ok(None);
        };
        let read = |p: &Path| -> anyhow::Result<Vec<String>> {
            Ok(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.lines().map(str::to_owned).collect())
        };
        Ok(Some((read(h)?, read(r)?)))
    }

    fn eval_buckets(&mut self) -> anyhow::Result<Outcome> {
        let Some(corpus) = self.cfg.eval.bucket_corpus.clone() else {
            return Err(ValidationError(vec!["eval-buckets needs eval.bucket_corpus".into()]).into());
        };
        let ev = &self.cfg.eval;
        let mut inputs = vec![
            Input::External("eval.bucket_corpus", corpus.clone()),
            Input::Artifact(VOCAB1),
            Input::Artifact(VOCAB2),
            Input::Artifact(ANCHORS),
        ];
        if let (Some(h), Some(r)) = (&ev.hypotheses, &ev.references) {
            inputs.extend([Input::External("eval.hypotheses", h.clone()), Input::External("eval.references", r.clone())]);
        }
        let spec = StageSpec {
            stage: Stage::EvalBuckets,
            inputs,
            settings: json!({ "side": ev.bucket_side, "edges": ev.bucket_edges, "normalization": self.cfg.normalization }),
            seeds: BTreeMap::new(),
            outputs: vec![BUCKETS],
        };
        self.execute(spec, |r| {
            let ev = &r.cfg.eval;
            let (v1, v2) = r.vocabs()?;
            let anchors = AnchorDictionary::read_tsv(&r.path(ANCHORS), &v1, &v2)?;
            let class = classify_shared_pairs(&anchors, &v1, &v2);
            let vocab = match ev.bucket_side {
                Side::Source => &v1,
                Side::Target => &v2,
            };
            let sentences = r.aligned_lines(&corpus)?;
            let buckets = bucket_by_fpfn(&sentences, vocab, &class, ev.bucket_side, &ev.bucket_edges, r.exec)?;
            let translations = r.translations()?;
            let report = match &translations {
                Some((h, refs)) => buckets.report(Some((&h[..], &refs[..])))?,
                None => buckets.report::<&str, &str>(None)?,
            };
            save_report(&report, &r.path(BUCKETS))?;
            Ok(json!({ "sentences": sentences.len(), "counts": buckets.counts() }))
        })
    }

    fn bleu(&mut self) -> anyhow::Result<Outcome> {
        let (Some(h), Some(refs)) = (self.cfg.eval.hypotheses.clone(), self.cfg.eval.references.clone()) else {
            return Err(ValidationError(vec!["bleu needs eval.hypotheses and eval.references".into()]).into());
        };
        let spec = StageSpec {
            stage: Stage::Bleu,
            inputs: vec![Input::External("eval.hypotheses", h), Input::External("eval.references", refs)],
            settings: json!({ "tokenize": "13a", "smoothing": "none" }),
            seeds: BTreeMap::new(),
            outputs: vec![BLEU],
        };
        self.execute(spec, |r| {
            let (h, refs) = r.translations()?.expect("checked above");
            let score = corpus_bleu(&h, &refs, Smoothing::None)?;
            std::fs::write(r.path(BLEU), serde_json::to_string_pretty(&score)?)?;
            Ok(json!({ "score": score.score }))
        })
    }
}
