//! Output files and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run wrote. Wall-clock timings live only here, so every other
/// output is byte-identical across reruns of the same config.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub subcommand: String,
    pub outputs: Vec<String>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// SHA-256 of the canonical TOML form of the config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Single writer for one run's output directory.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), text)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_csv(&mut self, name: &str, table: &Csv) -> std::io::Result<()> {
        self.write_text(name, &table.render())
    }

    pub fn finish(self, cfg: &ExperimentConfig, subcommand: &str, timings: BTreeMap<String, f64>) -> std::io::Result<RunManifest> {
        let mut outputs = self.written.clone();
        outputs.sort();
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            config_hash: config_hash(cfg),
            subcommand: subcommand.to_string(),
            outputs,
            timings,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// Numeric table with a header row. Values use the shortest round-trip form.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    footer: Option<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            footer: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    /// A trailing `# ` comment line.
    pub fn with_footer(mut self, footer: String) -> Self {
        self.footer = Some(footer);
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        if let Some(f) = &self.footer {
            out.push_str("# ");
            out.push_str(f);
            out.push('\n');
        }
        out
    }
}
