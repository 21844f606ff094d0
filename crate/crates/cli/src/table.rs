//! CSV and JSON output for traces, trajectory statistics and spectra.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use trapgen_core::{ProtocolTrace, SpectralReport, TrajectoryStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Format implied by a `.csv` / `.json` extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

pub trait Table {
    fn csv(&self) -> String;
    fn json(&self) -> Result<String>;

    fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => Ok(self.csv()),
            Format::Json => {
                let mut s = self.json()?;
                s.push('\n');
                Ok(s)
            }
        }
    }
}

impl Table for ProtocolTrace {
    fn csv(&self) -> String {
        self.to_csv()
    }

    fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl Table for TrajectoryStats {
    fn csv(&self) -> String {
        self.to_csv()
    }

    fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl Table for SpectralReport {
    fn csv(&self) -> String {
        let mut cluster_of = vec![0; self.pairs.len()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                cluster_of[i] = c;
            }
        }
        let mut out = String::from("index,excitations,re,im,abs,cluster,unit\n");
        for (i, pair) in self.pairs.iter().enumerate() {
            let unit = self.unit_norm_indices.contains(&i) as u8;
            let _ = writeln!(
                out,
                "{i},{},{:.12},{:.12},{:.12},{},{unit}",
                pair.excitations,
                pair.value.re,
                pair.value.im,
                pair.value.norm(),
                cluster_of[i]
            );
        }
        out
    }

    fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Renders `table` and writes it to `path`, creating parent directories.
pub fn write_table(table: &dyn Table, format: Format, path: &Path) -> Result<()> {
    write_text(path, &table.render(format)?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
