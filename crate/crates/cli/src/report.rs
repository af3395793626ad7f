use std::collections::BTreeMap;
use std::fmt::Write as _;

use freearm::rational::{format_significant, Rational};
use serde::{Deserialize, Serialize};

/// Bumped whenever the JSON layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// One table cell. Exact values carry both the `p/q` string and a 12-digit
/// decimal rendering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Count(u64),
    Number(f64),
    Exact { exact: String, decimal: String },
    Text(String),
}

impl Cell {
    pub fn exact(r: &Rational) -> Cell {
        Cell::Exact {
            exact: r.to_string(),
            decimal: r.to_decimal(),
        }
    }

    pub fn maybe_exact(r: Option<&Rational>) -> Cell {
        r.map_or(Cell::Null, Cell::exact)
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    fn plain(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Count(v) => v.to_string(),
            Cell::Number(v) => format_significant(*v, 8),
            Cell::Exact { decimal, .. } => decimal.clone(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn table(&self) -> String {
        match self {
            Cell::Null => "-".into(),
            Cell::Exact { exact, decimal } if exact.ends_with("/1") => decimal.clone(),
            Cell::Exact { exact, decimal } => format!("{decimal} ({exact})"),
            other => other.plain(),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        Cell::Count(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Number(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Reported but never turns into a failing exit status.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    pub fn info(name: &str, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            status: Status::Info,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub parameters: BTreeMap<String, Cell>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub summary: Vec<String>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            parameters: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Cell>) -> Report {
        self.parameters.insert(key.into(), value.into());
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let params: Vec<String> = self
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={}", v.plain()))
            .collect();
        if params.is_empty() {
            let _ = writeln!(out, "{}", self.command);
        } else {
            let _ = writeln!(out, "{} ({})", self.command, params.join(", "));
        }
        if !self.columns.is_empty() && !self.rows.is_empty() {
            let cells: Vec<Vec<String>> = self
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::table).collect())
                .collect();
            let widths: Vec<usize> = (0..self.columns.len())
                .map(|i| {
                    cells
                        .iter()
                        .map(|r| r[i].chars().count())
                        .chain([self.columns[i].chars().count()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |items: &[String]| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(s, w)| format!("{s:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", line(&self.columns));
            for r in &cells {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        for s in &self.summary {
            let _ = writeln!(out, "{s}");
        }
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Info => "INFO",
            };
            let _ = writeln!(out, "[{tag}] {}: {}", c.name, c.detail);
        }
        out
    }

    /// Rows only. Columns holding exact values expand into `<name>` (the
    /// `p/q` string) and `<name>_decimal`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let exact_cols: Vec<bool> = (0..self.columns.len())
            .map(|i| self.rows.iter().any(|r| matches!(r[i], Cell::Exact { .. })))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = Vec::new();
        for (name, &ex) in self.columns.iter().zip(&exact_cols) {
            header.push(name.clone());
            if ex {
                header.push(format!("{name}_decimal"));
            }
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = Vec::new();
            for (cell, &ex) in r.iter().zip(&exact_cols) {
                match cell {
                    Cell::Exact { exact, decimal } => {
                        rec.push(exact.clone());
                        rec.push(decimal.clone());
                    }
                    other => {
                        rec.push(other.plain());
                        if ex {
                            rec.push(String::new());
                        }
                    }
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
