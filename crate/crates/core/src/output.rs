//! Column tables written as CSV with a `#` metadata header and a JSON sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed 12-significant-digit rendering shared by every writer.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        // fold -0 so that sign noise never changes bytes
        format!("{:.11e}", 0.0)
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    code_version: &'a str,
    columns: &'a [String],
    rows: usize,
    metadata: serde_json::Map<String, serde_json::Value>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# experiment: {}", self.name)?;
        writeln!(w, "# code_version: {CODE_VERSION}")?;
        for (k, v) in &self.metadata {
            // keep each entry on one comment line
            writeln!(w, "# {k}: {}", v.replace('\n', " "))?;
        }
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|x| format_value(*x))).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn sidecar_json(&self) -> String {
        let metadata = self
            .metadata
            .iter()
            .map(|(k, v)| {
                let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()));
                (k.clone(), value)
            })
            .collect();
        let sc = Sidecar {
            name: &self.name,
            code_version: CODE_VERSION,
            columns: &self.columns,
            rows: self.rows.len(),
            metadata,
        };
        serde_json::to_string_pretty(&sc).expect("serializable") + "\n"
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`, returning the CSV path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&csv_path, self.to_csv_string())?;
        std::fs::write(dir.join(format!("{}.json", self.name)), self.sidecar_json())?;
        Ok(csv_path)
    }

    /// Reads back a CSV written by [`Table::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut name = String::new();
        let mut metadata = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some((k, v)) = body.split_once(": ") {
                match k {
                    "experiment" => name = v.to_string(),
                    "code_version" => {}
                    _ => metadata.push((k.to_string(), v.to_string())),
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad value '{s}' in {}: {e}", path.display()))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self {
            name,
            columns,
            rows,
            metadata,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
