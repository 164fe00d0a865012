//! Run manifest: provenance record written next to every file output so
//! a result can be traced back to the exact configuration and invocation
//! that produced it.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub tool_version: &'static str,
    pub command: &'a str,
    /// Arguments as invoked, program name excluded.
    pub argv: &'a [String],
    /// UTC, RFC 3339, second resolution.
    pub timestamp: String,
    /// SHA-256 of the canonical JSON serialization of `config`; stable
    /// across platforms because the serialization is byte-identical.
    pub config_sha256: String,
    /// Effective configuration after file ingestion and --set overrides.
    pub config: &'a serde_json::Value,
    /// Files this run wrote, manifest excluded.
    pub outputs: Vec<String>,
}

pub fn config_hash(config: &serde_json::Value) -> anyhow::Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `<primary>.manifest.json` describing the run.
pub fn write(
    primary: &Path,
    command: &str,
    argv: &[String],
    config: &serde_json::Value,
    outputs: &[&Path],
) -> anyhow::Result<()> {
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        argv,
        timestamp: humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
        config_sha256: config_hash(config)?,
        config,
        outputs: outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    let path = manifest_path(primary);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn manifest_path(primary: &Path) -> std::path::PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
