//! CSV tables with a `# meta:` comment block.
//!
//! ```text
//! # meta: key=value
//! # meta: key=value
//! col_a,col_b,...
//! 1.5,-0.25,...
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so reading a
//! table back reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> CliResult<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| CliError::Validation(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| CliError::Validation(format!("column {name}: {e}")))
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# meta: {k}={v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table = Table::default();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("# meta: ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| CliError::Validation(format!("bad meta line {line:?}")))?;
                table.meta.push((k.to_string(), v.to_string()));
            } else {
                table.header = line.split(',').map(str::to_string).collect();
                break;
            }
        }
        if table.header.is_empty() {
            return Err(CliError::Validation("table has no header".into()));
        }
        for line in lines {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != table.header.len() {
                return Err(CliError::Validation(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    table.header.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        fs::write(path, self.render()).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut t = Table::new(&["x", "err"]);
        t.meta("scenario_sha256", "abc").meta("eps", num(1.0 / 3.0));
        t.push(vec![num(0.1 + 0.2), num(f64::MIN_POSITIVE)]);
        t.push(vec![num(-1e300), num(std::f64::consts::PI)]);
        let back = Table::parse(&t.render()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("x").unwrap(), vec![0.1 + 0.2, -1e300]);
        assert_eq!(back.meta_value("eps").unwrap().parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Table::parse("a,b\n1\n").is_err());
        assert!(Table::parse("").is_err());
    }
}
