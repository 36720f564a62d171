//! Run provenance: every command records what ran, with which resolved
//! parameters, and checksums of the data files it produced. Feeding the
//! manifest back through `replay` reproduces those files bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Execution;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    /// Canonical resolved argument vector, subcommand first. Presentation
    /// flags (`--out`, `--format`) are omitted: they do not affect data
    /// files.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    /// Fully resolved parameter echo, defaults included.
    pub params: serde_json::Value,
    pub timestamp: String,
    /// sha256 of each data file written next to this manifest.
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::new(), |mut acc, byte| {
        use std::fmt::Write;
        let _ = write!(acc, "{byte:02x}");
        acc
    })
}

pub fn build(exec: &Execution) -> RunManifest {
    RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: exec.command.to_string(),
        argv: exec.argv.clone(),
        seed: exec.seed,
        params: exec.params.clone(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        checksums: exec
            .files
            .iter()
            .map(|(name, bytes)| (name.to_string(), sha256_hex(bytes)))
            .collect(),
    }
}

/// Writes the data files plus `manifest.json` into `dir`, creating it as
/// needed.
pub fn persist(dir: &Path, exec: &Execution) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    for (name, bytes) in &exec.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let manifest = build(exec);
    let mut body = serde_json::to_vec_pretty(&manifest)?;
    body.push(b'\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load(path: &Path) -> anyhow::Result<RunManifest> {
    let body = std::fs::read(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: RunManifest = serde_json::from_slice(&body)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        // Standard test vector for the empty string.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
