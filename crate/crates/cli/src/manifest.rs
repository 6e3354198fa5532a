use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{config_error, PipelineConfig};

pub const LOCK_FILE: &str = ".protoret.lock";
const MANIFEST_SUFFIX: &str = ".manifest.json";

fn hash_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// SHA-256 of a file, or of the sorted `name hash` listing of a directory's
/// data files (manifests and the lock file are skipped).
pub fn checksum(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return hash_file(path).with_context(|| format!("cannot checksum {}", path.display()));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("cannot list {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    names.retain(|p| {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        p.is_file() && name != LOCK_FILE && !name.ends_with(MANIFEST_SUFFIX)
    });
    names.sort();
    let mut hasher = Sha256::new();
    for p in names {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        hasher.update(format!("{name} {}\n", hash_file(&p)?));
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Provenance record written next to every output. Paths are recorded as
/// given on the command line so reruns from the same directory produce the
/// same bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Manifest {
            command: command.to_string(),
            config: config.clone(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), checksum(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), checksum(path)?);
        Ok(())
    }

    /// Writes `<stem>.manifest.json` beside a file output, or
    /// `<command>.manifest.json` inside a directory output.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = manifest_path(output, &self.command);
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn manifest_path(output: &Path, command: &str) -> PathBuf {
    if output.is_dir() {
        output.join(format!("{command}{MANIFEST_SUFFIX}"))
    } else {
        sibling(output, MANIFEST_SUFFIX)
    }
}

/// `dir/name.jsonl` -> `dir/name<suffix>`.
pub fn sibling(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output");
    output.with_file_name(format!("{stem}{suffix}"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Exclusive per-store lock, released on drop.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    /// The store directory must already exist.
    pub fn acquire(store: &Path) -> Result<Self> {
        if !store.is_dir() {
            return Err(config_error(format!(
                "store directory {} does not exist",
                store.display()
            )));
        }
        let path = store.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(StoreLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(config_error(format!(
                "store {} is in use by another run (delete {} if that run is gone)",
                store.display(),
                path.display()
            ))),
            Err(e) => Err(e).with_context(|| format!("cannot create {}", path.display())),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
