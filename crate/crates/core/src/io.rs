//! CSV tables and versioned JSON documents.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::error::{Error, Result};

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_number(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Io(format!("{}: bad number `{s}`: {e}", path.display()))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(Error::Io(format!("{}: row of width {} under a header of {}", path.display(), row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

/// Shortest representation that parses back to the same value.
fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON envelope: `{ "schema_version": 1, "kind": "...", "data": ... }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema_version: u32,
    pub kind: String,
    pub data: T,
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, data: &T) -> Result<()> {
    let doc = Document {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        data,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let doc: Document<T> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Io(format!("{}: schema version {} is not {SCHEMA_VERSION}", path.display(), doc.schema_version)));
    }
    if doc.kind != kind {
        return Err(Error::Io(format!("{}: holds `{}`, expected `{kind}`", path.display(), doc.kind)));
    }
    Ok(doc.data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec![0.1, -3e-17]);
        t.push(vec![1.0 / 3.0, 12345.678]);
        t.write(&path).unwrap();
        assert_eq!(Table::read(&path).unwrap(), t);
    }

    #[test]
    fn json_kind_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_json(&path, "thing", &vec![1.5, 2.0]).unwrap();
        let back: Vec<f64> = read_json(&path, "thing").unwrap();
        assert_eq!(back, vec![1.5, 2.0]);
        assert!(read_json::<Vec<f64>>(&path, "other").is_err());
    }
}
