//! CSV tables with a version trailer, JSON documents and the run manifest.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e15)`; empty for
/// non-finite values so gaps stay visible.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header, rows, then `# ncva <version>`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let mut text = String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
        text.push_str(&format!("# ncva {VERSION}\n"));
        Ok(text)
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Where command output goes: files under `--out`, or stdout.
pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).with_context(|| format!("creating output directory {}", d.display()))?;
        }
        Ok(Sink { dir: dir.map(Path::to_path_buf), written: Vec::new() })
    }

    pub fn to_files(&self) -> bool {
        self.dir.is_some()
    }

    /// The primary result: written as `name` under `--out`, printed otherwise.
    pub fn primary(&mut self, name: &str, text: &str) -> Result<()> {
        if self.dir.is_some() {
            self.file(name, text)
        } else {
            print!("{text}");
            Ok(())
        }
    }

    /// A secondary result, only written when `--out` is given.
    pub fn file(&mut self, name: &str, text: &str) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// Registers a file the caller wrote itself.
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    /// Writes `manifest.json` listing every file produced by the run.
    pub fn finish(self, manifest: RunManifest) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let manifest = RunManifest {
            outputs: self.written.iter().map(|p| p.display().to_string()).collect(),
            ..manifest
        };
        let path = dir.join("manifest.json");
        fs::write(&path, json(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, parameters: serde_json::Value, wall_time_s: f64) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            parameters,
            outputs: Vec::new(),
            tool_version: VERSION.to_string(),
            wall_time_s,
        }
    }
}
