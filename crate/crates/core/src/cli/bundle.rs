//! Command outputs: CSV tables plus a key-value summary, written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| Error::Csv(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_float(*v)))
                .map_err(|e| Error::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryEntry {
    pub key: String,
    pub value: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultBundle {
    pub command: String,
    pub tables: Vec<Table>,
    pub summary: Vec<SummaryEntry>,
}

impl ResultBundle {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn scalar(&mut self, key: &str, value: f64, source: &str) {
        self.text(key, &format_float(value), source);
    }

    pub fn text(&mut self, key: &str, value: &str, source: &str) {
        self.summary.push(SummaryEntry {
            key: key.to_string(),
            value: value.to_string(),
            source: source.to_string(),
        });
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|e| e.key == key).map(|e| e.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn merge(&mut self, other: ResultBundle) {
        self.tables.extend(other.tables);
        self.summary.extend(other.summary);
    }

    /// `key = value  # source` lines under a header naming the command.
    pub fn render_summary(&self) -> String {
        let mut out = format!("# qemitter {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for e in &self.summary {
            out.push_str(&format!("{} = {}  # {}\n", e.key, e.value, e.source));
        }
        out
    }

    /// Write every table and `summary.txt` into `dir`. Each file is written
    /// to a temporary name first and renamed into place.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::with_capacity(self.tables.len() + 1);
        for t in &self.tables {
            files.push((format!("{}.csv", t.name), t.to_csv()?));
        }
        files.push(("summary.txt".to_string(), self.render_summary()));
        for (name, contents) in files {
            write_atomic(&dir.join(name), contents.as_bytes())?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
