//! Report emission: JSON for structured verdicts, CSV for bulk numbers.
//!
//! Reports are byte-identical across repeated runs of the same config and
//! seed: serde_json maps are sorted, no timestamps are embedded, and all
//! sampling is seeded.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const SCHEMA: &str = "conewedge-report/1";

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub command: String,
    pub tolerances: Value,
    pub section: Value,
}

impl Report {
    pub fn new(config_text: &str, command: &str, tolerances: Value, section: Value) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        let digest = hasher.finalize();
        Self {
            schema: SCHEMA.into(),
            tool: "conewedge".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: hex_string(&digest),
            command: command.into(),
            tolerances,
            section,
        }
    }

    pub fn to_json(&self) -> String {
        let value = json!({
            "schema": self.schema,
            "tool": self.tool,
            "version": self.version,
            "config_sha256": self.config_sha256,
            "command": self.command,
            "tolerances": self.tolerances,
            "section": self.section,
        });
        serde_json::to_string_pretty(&value).expect("report serialization")
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_report.json", self.command));
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes CSV rows with a header; plain formatting, no quoting needed for
/// numeric tables.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text)
}
