use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_sha256: String,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub jobs: usize,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Recorder {
    start: Instant,
    started_unix_s: u64,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, config_digest_input: &[u8], seed: Option<u64>, jobs: usize) -> Self {
        Self {
            start: Instant::now(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            manifest: RunManifest {
                command: command.to_string(),
                argv: std::env::args().collect(),
                config_sha256: sha256_hex(config_digest_input),
                inputs: Vec::new(),
                seed,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                jobs,
                started_unix_s: 0,
                wall_time_s: 0.0,
                outputs: Vec::new(),
                notes: Vec::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
        for p in paths {
            self.input(p)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.manifest.started_unix_s = self.started_unix_s;
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&self.manifest)?;
        behman::features::io::write_atomic(path, json.as_bytes())?;
        Ok(())
    }
}
