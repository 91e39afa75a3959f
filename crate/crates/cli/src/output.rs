//! Output files. Every CSV row and JSON document carries `schema_version`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Wraps a record with the schema version as its first field.
#[derive(Serialize)]
pub struct Versioned<T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: T,
}

impl<T: Serialize> Versioned<T> {
    pub fn new(record: T) -> Self {
        Self { schema_version: SCHEMA_VERSION, record }
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a header row and one row per record. Rows are flat structs
    /// whose first field is `schema_version`.
    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, doc: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(&mut w, &Versioned::new(doc))?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn json_lines(&self, name: &str) -> Result<JsonLines> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(JsonLines { out: BufWriter::new(file) })
    }
}

pub struct JsonLines {
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, &Versioned::new(record))?;
        writeln!(self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
