//! Run metadata emitted next to every command's outputs.
//!
//! Each run writes two audit files into its output directory:
//!
//! * `effective-config.toml` — the fully layered configuration, so the run
//!   can be reproduced without reconstructing defaults/env/flags; and
//! * `manifest.json` — the command name, the SHA-256 of that config
//!   document, the seed, and the tool versions.
//!
//! Neither file contains timestamps or host details: identical inputs must
//! produce byte-identical outputs.

use std::fs;
use std::path::Path;

use rfm_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Manifest schema version; bump when the JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config_sha256: String,
    seed: u64,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "rfm-cli")]
    cli: &'static str,
    #[serde(rename = "rfm-core")]
    core: &'static str,
}

/// Writes `effective-config.toml` and `manifest.json` into `out_dir`.
///
/// # Errors
/// Returns [`Error::Io`] when the directory is not writable.
pub fn write_run_metadata(out_dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let config_toml = toml::to_string_pretty(cfg)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize configuration: {e}")))?;
    fs::write(out_dir.join("effective-config.toml"), &config_toml)?;

    let digest = Sha256::digest(config_toml.as_bytes());
    let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command,
        config_sha256,
        seed: cfg.seed,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            core: rfm_core::VERSION,
        },
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize manifest: {e}")))?;
    fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_files_are_reproducible_and_linked_by_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        write_run_metadata(dir.path(), "localize", &cfg).unwrap();
        let first = fs::read(dir.path().join("manifest.json")).unwrap();
        let config = fs::read(dir.path().join("effective-config.toml")).unwrap();

        write_run_metadata(dir.path(), "localize", &cfg).unwrap();
        let second = fs::read(dir.path().join("manifest.json")).unwrap();
        assert_eq!(first, second, "reruns must be byte-identical");

        let text = String::from_utf8(first).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let digest = Sha256::digest(&config);
        let expected: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(parsed["config_sha256"], expected.as_str());
        assert_eq!(parsed["schema_version"], 1);
        assert_eq!(parsed["command"], "localize");
    }
}
