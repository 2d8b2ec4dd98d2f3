use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::Format;

/// Version stamped into every CSV header comment.
pub const SCHEMA_VERSION: u32 = 1;

/// Destination for tables: a results directory or stdout.
#[derive(Debug, Clone)]
pub struct Output {
    dir: Option<PathBuf>,
    pub format: Format,
}

impl Output {
    pub fn new(dir: Option<&Path>, format: Format) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            format,
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn emit(&self, file: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(file);
                std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                Ok(out.flush()?)
            }
        }
    }

    /// CSV with a `# fracdelaunay <schema> v<N>` first line.
    pub fn csv(&self, stem: &str, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.emit(&format!("{stem}.csv"), &csv_bytes(schema, header, rows)?)
    }

    pub fn json<T: Serialize + ?Sized>(&self, stem: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(&format!("{stem}.json"), text.as_bytes())
    }

    /// Writes only when a results directory is set.
    pub fn side_csv(&self, stem: &str, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if self.dir.is_some() {
            self.csv(stem, schema, header, rows)?;
        }
        Ok(())
    }

    pub fn side_json<T: Serialize + ?Sized>(&self, stem: &str, value: &T) -> Result<()> {
        if self.dir.is_some() {
            self.json(stem, value)?;
        }
        Ok(())
    }

    /// Table in the configured format.
    pub fn table<T: Serialize + ?Sized>(
        &self,
        stem: &str,
        schema: &str,
        header: &[&str],
        rows: &[Vec<String>],
        value: &T,
    ) -> Result<()> {
        match self.format {
            Format::Csv => self.csv(stem, schema, header, rows),
            Format::Json => self.json(stem, value),
        }
    }
}

pub fn csv_bytes(schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = format!("# fracdelaunay {schema} v{SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Shortest round-trip representation, exponent form for tiny or huge values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
