//! Output helpers: real formatting, atomic file writes and `t,value,se` series.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Formats a real with 17 significant digits in scientific notation, which
/// round-trips every `f64` exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    write_atomic(path, &body)
}

/// A scalar series with optional standard errors, indexed by time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub t: Vec<usize>,
    pub value: Vec<f64>,
    pub se: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with header `t,value,se`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,se\n");
        for ((t, v), se) in self.t.iter().zip(&self.value).zip(&self.se) {
            out.push_str(&format!("{t},{},{}\n", fmt_real(*v), fmt_real(*se)));
        }
        out
    }
}
