//! `smala`: builds bilingual subword vocabularies from two monolingual
//! corpora, stage by stage, with resumable artifacts.
//!
//! Exit codes: 0 success, 1 invalid usage or config, 2 runtime failure.

mod config;
mod manifest;
mod stages;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use smala::Exec;

use crate::config::PipelineConfig;
use crate::manifest::{hash_bytes, DirLock, Manifest};
use crate::stages::{Outcome, Runner};

/// Every problem found before any work starts.
#[derive(Debug)]
pub struct ValidationError(pub Vec<String>);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, ValueEnum)]
pub enum Stage {
    /// Learn one subword vocabulary per language
    LearnVocab,
    /// Train skip-gram embeddings over each vocabulary
    TrainEmb,
    /// Map both embedding spaces into a shared space without supervision
    Map,
    /// Align a sentence-aligned bitext and score subword pairs
    AlignBitext,
    /// Select anchors among mutual nearest neighbours
    Anchor,
    /// Merge both vocabularies into one of size n for translation
    Merge,
    /// Lay out the L2 embedding matrix of a pretrained L1 model
    Layout,
    /// Bilingual lexicon induction precision@1 with CSLS retrieval
    EvalBli,
    /// Bucket sentences by their share of misanchored subwords
    EvalBuckets,
    /// Corpus BLEU of hypotheses against references
    Bleu,
    /// Run every stage the config calls for, skipping completed ones
    Pipeline,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::LearnVocab => "learn-vocab",
            Stage::TrainEmb => "train-emb",
            Stage::Map => "map",
            Stage::AlignBitext => "align-bitext",
            Stage::Anchor => "anchor",
            Stage::Merge => "merge",
            Stage::Layout => "layout",
            Stage::EvalBli => "eval-bli",
            Stage::EvalBuckets => "eval-buckets",
            Stage::Bleu => "bleu",
            Stage::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "smala", version, about = "Bilingual subword vocabularies by subword mapping and anchoring")]
struct Cli {
    #[command(subcommand)]
    command: Stage,
    /// Pipeline config (TOML)
    #[arg(long, global = true, default_value = "smala.toml")]
    config: PathBuf,
    /// With `pipeline`: stop after this stage
    #[arg(long, global = true, value_enum)]
    stage: Option<Stage>,
    /// Rerun stages even when their artifacts are up to date
    #[arg(long, global = true)]
    force: bool,
    /// Override the config's top-level seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Run every kernel on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut problems = match cfg.validate() {
        Ok(()) => vec![],
        Err(e) => e.0,
    };
    let plan = Runner::plan(&cfg);
    let stages = match (cli.command, cli.stage) {
        (Stage::Pipeline, Some(Stage::Pipeline)) => {
            problems.push("--stage pipeline is not a stage".into());
            vec![]
        }
        (Stage::Pipeline, Some(last)) => match plan.iter().position(|&s| s == last) {
            Some(i) => plan[..=i].to_vec(),
            None => {
                let names: Vec<&str> = plan.iter().map(|s| s.name()).collect();
                problems.push(format!("--stage {} is not part of this pipeline ({})", last.name(), names.join(", ")));
                vec![]
            }
        },
        (Stage::Pipeline, None) => plan,
        (single, None) => vec![single],
        (_, Some(_)) => {
            problems.push("--stage only applies to `pipeline`".into());
            vec![]
        }
    };
    if !problems.is_empty() {
        return Err(ValidationError(problems).into());
    }

    let dir = cli
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| cli.config.parent().unwrap_or(std::path::Path::new(".")).join("out"));
    std::fs::create_dir_all(&dir)?;
    let _lock = DirLock::acquire(&dir)?;
    let manifest = Manifest::open(&dir, cfg.seed, hash_bytes(cfg.to_toml().as_bytes()))?;
    let mut runner = Runner {
        cfg,
        dir,
        manifest,
        force: cli.force,
        exec: exec(cli.sequential),
    };
    for stage in stages {
        let outcome = runner.run(stage)?;
        let note = match outcome {
            Outcome::Ran => "done",
            Outcome::Cached => "up to date",
        };
        println!("{}: {note}", stage.name());
    }
    runner.manifest.save(&runner.dir)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<ValidationError>() {
            Some(v) => {
                eprint!("error: {v}");
                ExitCode::from(1)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
