//! Artifact bookkeeping: content hashes, per-stage cache keys, the run
//! manifest and the output-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".smala.lock";

pub fn hash_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for one stage, derived from the top-level seed so that a single
/// number controls every source of randomness.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of the stage's config section and its input hashes.
    pub key: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(seed: u64, config_hash: String) -> Self {
        Manifest {
            tool: "smala".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_hash,
            stages: BTreeMap::new(),
        }
    }

    /// Loads the manifest in `dir`, or starts a fresh one. Stage records
    /// survive config changes; each carries its own cache key.
    pub fn open(dir: &Path, seed: u64, config_hash: String) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST);
        let mut m = if path.exists() {
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text).with_context(|| format!("corrupt manifest {}", path.display()))?
        } else {
            Manifest::new(seed, config_hash.clone())
        };
        m.version = env!("CARGO_PKG_VERSION").into();
        m.seed = seed;
        m.config_hash = config_hash;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let tmp = dir.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        fs::rename(&tmp, dir.join(MANIFEST))?;
        Ok(())
    }

    /// True if `stage` ran with `key` and its outputs are still intact.
    pub fn is_fresh(&self, dir: &Path, stage: &str, key: &str) -> bool {
        let Some(rec) = self.stages.get(stage) else {
            return false;
        };
        rec.key == key
            && rec
                .outputs
                .iter()
                .all(|(name, hash)| hash_file(&dir.join(name)).is_ok_and(|h| &h == hash))
    }
}

/// Exclusive hold on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                bail!(
                    "{} is locked by another run (pid {}); remove {} if that run is gone",
                    dir.display(),
                    holder.trim(),
                    path.display()
                )
            }
            Err(e) => Err(e).with_context(|| format!("creating lock {}", path.display())),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
