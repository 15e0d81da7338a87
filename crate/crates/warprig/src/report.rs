//! Report envelope and deterministic output writing.
//!
//! Reports are JSON with the schema string `warprig-report/1`, the toolkit
//! version, the resolved configuration, and the command results. They carry
//! no timestamps, so identical configurations produce byte-identical
//! files; wall-clock metadata goes to a separate `<path>.meta.json`
//! sidecar. Files are written atomically (temp file, then rename).

use crate::config::RunConfig;
use crate::error::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const REPORT_SCHEMA: &str = "warprig-report/1";
pub const CSV_SCHEMA: &str = "warprig-csv/1";

#[derive(Serialize)]
pub struct Report<'a> {
    pub schema: &'static str,
    pub toolkit_version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub results: serde_json::Value,
}

pub fn render_report(
    command: &str,
    config: &RunConfig,
    results: serde_json::Value,
) -> Result<Vec<u8>> {
    let report = Report {
        schema: REPORT_SCHEMA,
        toolkit_version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        results,
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Atomic write: temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Wall-clock metadata sidecar; kept outside the report so reports stay
/// byte-reproducible.
pub fn write_meta(path: &Path) -> Result<()> {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let meta = serde_json::json!({ "created_unix_ms": created });
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    let meta_path = path.with_file_name(name);
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    atomic_write(&meta_path, &bytes)
}

/// CSV with a schema comment line and a header row.
pub struct Csv {
    buffer: String,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        let mut buffer = format!("# {CSV_SCHEMA}\n");
        buffer.push_str(&columns.join(","));
        buffer.push('\n');
        Csv { buffer }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buffer.push(',');
            }
            first = false;
            // Shortest roundtrip formatting keeps files byte-reproducible.
            self.buffer.push_str(&format!("{v}"));
        }
        self.buffer.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buffer.into_bytes()
    }
}

/// Sidecar path `<stem>.<tag>.csv` next to a report path.
pub fn csv_sidecar(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format() {
        let mut csv = Csv::new(&["r", "w"]);
        csv.row(&[1.0, 0.5]);
        csv.row(&[2.0, 0.25]);
        let text = String::from_utf8(csv.into_bytes()).unwrap();
        assert_eq!(text, "# warprig-csv/1\nr,w\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn atomic_write_roundtrip() {
        let dir = std::env::temp_dir().join("warprig-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.json");
        atomic_write(&path, b"{}\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}\n");
        write_meta(&path).unwrap();
        assert!(dir.join("out.json.meta.json").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
