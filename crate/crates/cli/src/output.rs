//! Deterministic CSV and summary writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::RunError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Nine significant digits in a fixed layout.
pub fn num(x: f64) -> String {
    // no "-0" in files
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.8e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, digest: &str, grid: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# xhom {VERSION}").unwrap();
        writeln!(text, "# command {command}").unwrap();
        writeln!(text, "# config_sha256 {digest}").unwrap();
        writeln!(text, "# grid {grid}").unwrap();
        writeln!(text, "{}", columns.join(",")).unwrap();
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn footer(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.text, "# {key} = {value}").unwrap();
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn summary_toml<T: Serialize>(summary: &T) -> String {
    toml::to_string(summary).expect("summary serializes")
}
