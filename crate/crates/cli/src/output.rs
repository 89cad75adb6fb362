//! Rendering results and writing run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// What a subcommand produced.
pub struct Report {
    pub json: Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    pub text: String,
    /// False when a check reported by the command failed.
    pub ok: bool,
    /// Additional files written next to the result when `--out` is given.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(json: Value, text: String) -> Self {
        Report {
            json,
            csv_header: Vec::new(),
            csv_rows: Vec::new(),
            text,
            ok: true,
            files: Vec::new(),
        }
    }

    pub fn csv<S: ToString>(mut self, header: &[&str], rows: Vec<Vec<S>>) -> Self {
        self.csv_header = header.iter().map(|h| h.to_string()).collect();
        self.csv_rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.to_string()).collect())
            .collect();
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Json => serde_json::to_string_pretty(&self.json).expect("serialisable") + "\n",
            Format::Csv => {
                let header: Vec<&str> = self.csv_header.iter().map(String::as_str).collect();
                cascade_boot::io::to_csv(&header, &self.csv_rows)
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    pub config: Value,
    pub master_seed: Option<u64>,
    pub workers: usize,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputDigest>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn digest(path: &Path) -> Result<OutputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(OutputDigest {
        path: path.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
    })
}

/// Writes the rendered result and extra files into `dir`; returns their paths.
pub fn write_outputs(dir: &Path, report: &Report, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let result = dir.join(format!("result.{}", format.extension()));
    fs::write(&result, report.render(format))?;
    written.push(result);
    for (name, bytes) in &report.files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}
