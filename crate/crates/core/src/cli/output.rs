//! Output directory ownership and the CSV/JSON writers.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::FORMAT_VERSION;
use crate::error::{Error, Result};

const LOCK_NAME: &str = ".dpnls.lock";

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Exclusive handle on an output directory. The lock file is removed on drop.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::InvalidParams(format!(
                    "output directory {} is locked by another run ({})",
                    root.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn target(&mut self, rel: &str) -> Result<File> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        if !self.written.iter().any(|w| w == rel) {
            self.written.push(rel.to_string());
        }
        Ok(File::create(path)?)
    }

    /// Writes a header row and string records.
    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let file = self.target(rel)?;
        let mut w = csv::Writer::from_writer(file);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(header).map_err(ser)?;
        for row in rows {
            w.write_record(row).map_err(ser)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `{"format_version": .., ..value}` as pretty JSON.
    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|e| Error::Serialization(e.to_string()))?;
        let doc = match v {
            Value::Object(ref mut map) => {
                let mut out = serde_json::Map::new();
                out.insert("format_version".into(), json!(FORMAT_VERSION));
                out.append(map);
                Value::Object(out)
            }
            other => json!({ "format_version": FORMAT_VERSION, "data": other }),
        };
        let mut f = self.target(rel)?;
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}
