use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub label: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub subcommand: String,
    /// Every resolved setting except `out` and `threads`, which cannot change results.
    pub config: BTreeMap<String, Value>,
    pub config_hash: String,
    pub outputs: Vec<OutputEntry>,
    /// sha256 over the `"<sha256>  <file>\n"` lines of `outputs`.
    pub outputs_hash: String,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub pass: bool,
    pub checks: Vec<CheckEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(subcommand: &str, config: &BTreeMap<String, Value>) -> String {
    let body = serde_json::to_string(config).expect("json values serialize");
    sha256_hex(format!("{subcommand}\n{body}").as_bytes())
}

pub fn output_entries(files: &[(String, String)]) -> (Vec<OutputEntry>, String) {
    let mut entries: Vec<OutputEntry> = files
        .iter()
        .map(|(name, body)| OutputEntry {
            file: name.clone(),
            bytes: body.len(),
            sha256: sha256_hex(body.as_bytes()),
        })
        .collect();
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    let listing: String = entries.iter().map(|e| format!("{}  {}\n", e.sha256, e.file)).collect();
    let total = sha256_hex(listing.as_bytes());
    (entries, total)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let body = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    }
}
