//! Run manifests: every subcommand records its resolved configuration,
//! seeds, inputs, and output hashes so a run can be replayed and verified
//! bit for bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swot_core::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved argument vector; replaying it reproduces the outputs.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub version: String,
    pub wall_ms: u128,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub struct ManifestBuilder {
    started: Instant,
    subcommand: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            started: Instant::now(),
            subcommand: subcommand.to_string(),
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, cfg: &T) -> Result<()> {
        self.config = serde_json::to_value(cfg)?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hash the outputs and write the manifest. A generated seed that was
    /// not on the command line is appended to the stored argv so the replay
    /// is closed over all randomness.
    pub fn write(self, path: &Path, argv: &[String]) -> Result<()> {
        let mut argv = argv.to_vec();
        if !argv.iter().any(|a| a == "--seed") {
            argv.push("--seed".to_string());
            argv.push(self.seed.to_string());
        }
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            outputs.push(OutputRecord {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        let manifest = RunManifest {
            subcommand: self.subcommand,
            argv,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_ms: self.started.elapsed().as_millis(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// Fresh seed when none was given; the chosen value is printed so the run
/// can be reproduced.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    match flag {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            println!("seed {s}");
            s
        }
    }
}
