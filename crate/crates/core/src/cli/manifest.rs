use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    /// Hex SHA-256 of the file contents, absent when the file could not be read.
    pub sha256: Option<String>,
}

/// One record per command invocation, written next to its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputRecord>,
    /// SHA-256 over the command's options and input digests.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub deterministic: bool,
    /// Unix seconds; omitted under `--deterministic` so reruns match byte for byte.
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub message: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], options: &serde_json::Value, deterministic: bool) -> Self {
        let inputs: Vec<InputRecord> = inputs
            .iter()
            .map(|p| InputRecord {
                path: p.display().to_string(),
                sha256: std::fs::read(p).ok().map(|b| sha256_hex(&b)),
            })
            .collect();
        let hashed = serde_json::json!({
            "command": command,
            "options": options,
            "inputs": inputs.iter().map(|i| &i.sha256).collect::<Vec<_>>(),
        });
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(hashed.to_string().as_bytes()),
            inputs,
            seed: None,
            rng: None,
            deterministic,
            started_at: (!deterministic).then(now_unix),
            finished_at: None,
            outputs: Vec::new(),
            exit_code: 0,
            message: None,
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&mut self, path: &PathBuf, exit_code: i32, message: Option<String>) -> std::io::Result<()> {
        self.exit_code = exit_code;
        self.message = message;
        self.finished_at = (!self.deterministic).then(now_unix);
        let text = serde_json::to_string_pretty(self).expect("manifest serialization cannot fail") + "\n";
        std::fs::write(path, text)
    }
}
