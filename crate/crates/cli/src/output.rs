//! Output files: metadata header line plus atomic replacement.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Hex SHA-256 of the resolved configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Metadata embedded in every output file.
#[derive(Clone, Debug)]
pub struct Meta {
    base: Value,
}

impl Meta {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let base = json!({
            "tool": "ptdil",
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "library_version": ptdilation::VERSION,
            "config_hash": config_hash(cfg),
            "seed": cfg.seed,
            "config": cfg,
        });
        Self { base }
    }

    /// The base metadata with extra keys merged in.
    pub fn with(&self, extra: Value) -> Value {
        let mut v = self.base.clone();
        if let (Some(map), Value::Object(more)) = (v.as_object_mut(), extra) {
            map.extend(more);
        }
        v
    }
}

/// Writes `path` via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// CSV file whose first line is `# <metadata json>`.
pub fn write_csv(
    path: &Path,
    meta: &Value,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    write_atomic(path, |w| {
        writeln!(w, "# {}", serde_json::to_string(meta).expect("metadata serializes")).map_err(|e| CliError::io(path, e))?;
        body(w)
    })
}

/// Pretty JSON file with the metadata under `meta`.
pub fn write_json<T: Serialize>(path: &Path, meta: &Value, payload: &T) -> Result<(), CliError> {
    let doc = json!({ "meta": meta, "result": payload });
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &doc).map_err(|e| CliError::io(path, e.into()))?;
        writeln!(w).map_err(|e| CliError::io(path, e))
    })
}

/// Writes plain CSV rows; cells are numbers or labels without separators.
pub fn write_rows(w: &mut dyn Write, path: &Path, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

/// `name_r{r}.ext` with `r` in shortest round-trip form.
pub fn per_r(dir: &Path, stem: &str, r: f64, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_r{}.{ext}", ptdilation::io::fmt_f64(r)))
}
