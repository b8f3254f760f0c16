use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: Value,
    inputs: Vec<Artifact>,
    outputs: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok((bytes.len() as u64, format!("{digest:x}")))
}

fn artifacts(paths: &[PathBuf]) -> Result<Vec<Artifact>> {
    paths
        .iter()
        .map(|p| {
            let (bytes, sha256) = sha256_file(p)?;
            Ok(Artifact { path: p.display().to_string(), bytes, sha256 })
        })
        .collect()
}

/// Record the command, its full configuration and the hashes of every file
/// it read and wrote.
pub fn write_manifest(
    path: &Path,
    command: &str,
    seed: u64,
    config: Value,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> Result<()> {
    let m = Manifest {
        tool: "rfmc",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
        inputs: artifacts(inputs)?,
        outputs: artifacts(outputs)?,
    };
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
