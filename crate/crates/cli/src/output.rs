//! Tables (CSV or JSON) and scalar reports (JSON), each stamped with the
//! hash of the resolved config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};

/// SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_text().as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

/// JSON has no infinities; they are written as strings.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: impl IntoIterator<Item = f64>) {
        self.push(row.into_iter().map(Cell::Num).collect());
    }

    fn to_csv(&self, header: &str) -> String {
        let mut s = String::with_capacity(32 * self.columns.len() * (self.rows.len() + 2));
        s.push_str(header);
        s.push('\n');
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => csv_f64(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self, command: &str, hash: &str) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (k, c) in self.columns.iter().zip(row) {
                    let v = match c {
                        Cell::Num(x) => json_f64(*x),
                        Cell::Int(i) => json!(i),
                        Cell::Text(t) => json!(t),
                    };
                    m.insert(k.clone(), v);
                }
                Value::Object(m)
            })
            .collect();
        json!({ "command": command, "config_sha256": hash, "columns": self.columns, "rows": rows })
    }
}

/// Where and how a command writes its results.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
    pub command: &'static str,
    pub hash: String,
}

impl Sink {
    pub fn header(&self) -> String {
        format!("# fuzzymon {} config-sha256={}", self.command, self.hash)
    }

    /// Writes `table` as `<stem>.csv` or `<stem>.json`.
    pub fn table(&self, stem: &str, table: &Table) -> std::io::Result<PathBuf> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), &table.to_csv(&self.header())),
            Format::Json => {
                let text = serde_json::to_string_pretty(&table.to_json(self.command, &self.hash))?;
                self.write(&format!("{stem}.json"), &(text + "\n"))
            }
        }
    }

    /// Writes a scalar report as `<stem>.json`, adding command and hash.
    pub fn report(&self, stem: &str, mut fields: Map<String, Value>) -> std::io::Result<(PathBuf, String)> {
        fields.insert("command".into(), json!(self.command));
        fields.insert("config_sha256".into(), json!(self.hash));
        let text = serde_json::to_string_pretty(&Value::Object(fields))? + "\n";
        Ok((self.write(&format!("{stem}.json"), &text)?, text))
    }

    pub fn write(&self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        Ok(path)
    }

    pub fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.dir).unwrap_or(path).display().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_full_precision() {
        let mut t = Table::new(["x", "n", "path"]);
        t.push(vec![Cell::Num(0.1), Cell::Int(3), Cell::Text("a.csv".into())]);
        t.push(vec![Cell::Num(f64::INFINITY), Cell::Int(4), Cell::Text(String::new())]);
        let text = t.to_csv("# h");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, ["# h", "x,n,path", "1.0000000000000001e-1,3,a.csv", "inf,4,"]);
        let x: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(x, 0.1);
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
