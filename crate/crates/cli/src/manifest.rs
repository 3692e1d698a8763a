//! Run manifest written beside every command's outputs.
//!
//! Schema `agekit.manifest/1`: the argument vector, seed, a SHA-256 over the
//! effective run and oracle configuration, tool versions, and SHA-256 digests
//! of every input and output file. No timestamps, so reruns are comparable.

use std::path::{Path, PathBuf};

use agekit_core::oracle::OracleParams;
use agekit_core::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Outcome;

pub const SCHEMA: &str = "agekit.manifest/1";

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    schema: &'static str,
    args: Vec<String>,
    seed: u64,
    config_hash: String,
    run_config: String,
    versions: Versions,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

#[derive(Debug, Serialize)]
struct Versions {
    agekit: &'static str,
    manifest: u32,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn entry(path: &Path) -> Outcome<FileEntry> {
    let data = std::fs::read(path)?;
    Ok(FileEntry { path: path.display().to_string(), sha256: hex(&Sha256::digest(&data)), bytes: data.len() as u64 })
}

impl Manifest {
    pub fn new(args: &[String], cfg: &RunConfig, oracle: &OracleParams) -> Self {
        let run_config = cfg.to_kv_string();
        let mut h = Sha256::new();
        h.update(run_config.as_bytes());
        h.update(format!("{oracle:?}").as_bytes());
        Manifest {
            schema: SCHEMA,
            args: args.to_vec(),
            seed: cfg.rng_seed,
            config_hash: hex(&h.finalize()),
            run_config,
            versions: Versions { agekit: env!("CARGO_PKG_VERSION"), manifest: 1 },
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Outcome {
        self.inputs.push(entry(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Outcome {
        self.outputs.push(entry(path)?);
        Ok(())
    }

    fn write(&self, path: PathBuf) -> Outcome {
        let json = serde_json::to_string_pretty(self).map_err(agekit_core::Error::from)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    /// `<out>.manifest.json` next to a single output file.
    pub fn write_beside(&self, out: &Path) -> Outcome {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        self.write(out.with_file_name(name))
    }

    /// `manifest.json` inside an output directory.
    pub fn write_in(&self, dir: &Path) -> Outcome {
        self.write(dir.join("manifest.json"))
    }
}
