//! JSON record of a mutating run: what was asked, on which inputs, and when.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const DIGEST_ALGORITHM: &str = "sha256";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub digest_algorithm: String,
    /// Input path → hex digest.
    pub inputs: BTreeMap<String, String>,
    /// Milliseconds since the Unix epoch.
    pub started_ms: u128,
    pub finished_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    /// Digests the inputs up front so a missing file fails before any work.
    pub fn start(subcommand: &str, args: Vec<String>, seed: Option<u64>, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            subcommand: subcommand.to_string(),
            args,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            digest_algorithm: DIGEST_ALGORITHM.to_string(),
            inputs,
            started_ms: now_ms(),
            finished_ms: 0,
        })
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_ms = now_ms();
        let json = serde_json::to_string_pretty(&self)?;
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
