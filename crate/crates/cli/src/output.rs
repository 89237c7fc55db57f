//! CSV time series and JSON run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::engines::{EngineRun, Row};

/// 17 significant digits, round-trip exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    ensure_parent(path)?;
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(out.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn series_header(columns: [&str; 3]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(columns.iter().map(|c| c.to_string()));
    h.extend(["trace_err".to_string(), "min_eig".to_string()]);
    h
}

pub fn write_series(path: &Path, columns: [&str; 3], rows: &[Row]) -> Result<()> {
    write_table(path, &series_header(columns), rows.iter().map(|r| r.iter().map(|&x| fmt_num(x)).collect()))
}

#[derive(Serialize)]
pub struct EngineEntry<'a> {
    pub csv: String,
    #[serde(flatten)]
    pub run: &'a EngineRun,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'static str,
    pub library_version: &'static str,
    pub cli_version: &'static str,
    pub config_source: String,
    pub config: &'a ScenarioConfig,
    pub t_max: f64,
    /// Largest time the cascade engine can reach under the memory budget.
    pub cascade_time_cap: f64,
    pub memory_budget_mb: u64,
    pub wall_time_s: f64,
    pub completed: bool,
    pub engines: Vec<EngineEntry<'a>>,
    pub notes: Vec<String>,
}

pub fn write_manifest(path: &Path, manifest: &Manifest<'_>) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
