//! Structured experiment reports and their JSON / CSV renderings.
//!
//! Pass flags are never stored: a report carries its measured scalars and a
//! list of declarative checks, and [`ExperimentReport::pass_flags`] evaluates
//! them on demand, so a deserialized report re-verifies itself.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::to_db;

/// A per-frequency or per-M numeric series with linear and dB values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    /// Label of the `x` axis, e.g. `freq_hz` or `windows`.
    pub x_label: String,
    pub x: Vec<f64>,
    pub linear: Vec<f64>,
    pub db: Vec<f64>,
}

impl Series {
    pub fn from_linear(
        name: impl Into<String>,
        x_label: impl Into<String>,
        x: Vec<f64>,
        linear: Vec<f64>,
    ) -> Self {
        let db = linear.iter().map(|&p| to_db(p)).collect();
        Self {
            name: name.into(),
            x_label: x_label.into(),
            x,
            linear,
            db,
        }
    }

    /// PSD series over bins `0..L`, labeled in Hz with `bin_hz` per bin.
    pub fn psd(name: impl Into<String>, power: &[f64], bin_hz: f64) -> Self {
        let x = (0..power.len()).map(|b| b as f64 * bin_hz).collect();
        Self::from_linear(name, "freq_hz", x, power.to_vec())
    }

    /// `bin,freq_hz,power_linear,power_db` when labeled in Hz, otherwise
    /// `<x_label>,power_linear,power_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let per_bin = self.x_label == "freq_hz";
        if per_bin {
            out.push_str("bin,freq_hz,power_linear,power_db\n");
        } else {
            let _ = writeln!(out, "{},power_linear,power_db", self.x_label);
        }
        for (i, ((x, lin), db)) in self.x.iter().zip(&self.linear).zip(&self.db).enumerate() {
            if per_bin {
                let _ = writeln!(out, "{i},{x},{lin},{db}");
            } else {
                let _ = writeln!(out, "{x},{lin},{db}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    /// Header of the label column, when rows are labeled.
    pub label_column: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            label_column: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn labeled(name: impl Into<String>, label_column: &str, columns: &[&str]) -> Self {
        let mut t = Self::new(name, columns);
        t.label_column = Some(label_column.to_string());
        t
    }

    pub fn push(&mut self, values: Vec<f64>) {
        self.rows.push(TableRow {
            label: None,
            values,
        });
    }

    pub fn push_labeled(&mut self, label: impl Into<String>, values: Vec<f64>) {
        self.rows.push(TableRow {
            label: Some(label.into()),
            values,
        });
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = Vec::new();
        if let Some(l) = &self.label_column {
            header.push(l);
        }
        header.extend(self.columns.iter().map(String::as_str));
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = Vec::new();
            if self.label_column.is_some() {
                cells.push(row.label.clone().unwrap_or_default());
            }
            cells.extend(row.values.iter().map(|v| v.to_string()));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Either a literal or the name of a scalar in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Const(f64),
    Scalar(String),
}

impl Operand {
    pub fn scalar(name: impl Into<String>) -> Self {
        Operand::Scalar(name.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|value − target| ≤ tol`.
    Within {
        value: Operand,
        target: Operand,
        tol: f64,
    },
    /// `value ≤ bound + offset`.
    AtMost {
        value: Operand,
        bound: Operand,
        offset: f64,
    },
    /// `value ≥ bound + offset`.
    AtLeast {
        value: Operand,
        bound: Operand,
        offset: f64,
    },
    /// `lo ≤ value ≤ hi`.
    Between { value: Operand, lo: f64, hi: f64 },
    /// A table column is strictly decreasing from row to row.
    StrictlyDecreasing { table: String, column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// Soft assertions are reported but never fail a run.
    pub hard: bool,
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassFlag {
    pub name: String,
    pub hard: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub scalars: BTreeMap<String, f64>,
    pub series: Vec<Series>,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            parameters: BTreeMap::new(),
            scalars: BTreeMap::new(),
            series: Vec::new(),
            tables: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.get(key).copied()
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn table_named(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn assert_hard(&mut self, name: impl Into<String>, check: Check) {
        self.assertions.push(Assertion {
            name: name.into(),
            hard: true,
            check,
        });
    }

    pub fn assert_soft(&mut self, name: impl Into<String>, check: Check) {
        self.assertions.push(Assertion {
            name: name.into(),
            hard: false,
            check,
        });
    }

    fn operand(&self, op: &Operand) -> Option<f64> {
        match op {
            Operand::Const(v) => Some(*v),
            Operand::Scalar(key) => self.get(key),
        }
    }

    /// Evaluates one check against the current data. Missing scalars or
    /// tables, and NaN values, evaluate to `false`.
    pub fn evaluate(&self, check: &Check) -> bool {
        match check {
            Check::Within { value, target, tol } => {
                match (self.operand(value), self.operand(target)) {
                    (Some(v), Some(t)) => (v - t).abs() <= *tol,
                    _ => false,
                }
            }
            Check::AtMost {
                value,
                bound,
                offset,
            } => match (self.operand(value), self.operand(bound)) {
                (Some(v), Some(b)) => v <= b + offset,
                _ => false,
            },
            Check::AtLeast {
                value,
                bound,
                offset,
            } => match (self.operand(value), self.operand(bound)) {
                (Some(v), Some(b)) => v >= b + offset,
                _ => false,
            },
            Check::Between { value, lo, hi } => {
                self.operand(value).is_some_and(|v| *lo <= v && v <= *hi)
            }
            Check::StrictlyDecreasing { table, column } => self
                .table_named(table)
                .and_then(|t| t.column(column))
                .is_some_and(|col| !col.is_empty() && col.windows(2).all(|w| w[1] < w[0])),
        }
    }

    pub fn pass_flags(&self) -> Vec<PassFlag> {
        self.assertions
            .iter()
            .map(|a| PassFlag {
                name: a.name.clone(),
                hard: a.hard,
                pass: self.evaluate(&a.check),
            })
            .collect()
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.assertions
            .iter()
            .find(|a| a.name == name)
            .map(|a| self.evaluate(&a.check))
    }

    /// True when every hard assertion holds.
    pub fn passed(&self) -> bool {
        self.pass_flags().iter().all(|f| f.pass || !f.hard)
    }

    /// JSON with the evaluated pass flags appended.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Rendered<'a> {
            #[serde(flatten)]
            report: &'a ExperimentReport,
            pass_flags: Vec<PassFlag>,
            passed: bool,
        }
        serde_json::to_string_pretty(&Rendered {
            report: self,
            pass_flags: self.pass_flags(),
            passed: self.passed(),
        })
        .expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Unsupported(format!("malformed report JSON: {e}")))
    }

    /// One CSV per series and table, plus `scalars` and `checks`, keyed by
    /// file name `<experiment>_<part>.csv`.
    pub fn csv_bundle(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        for s in &self.series {
            files.push((format!("{}_{}.csv", self.name, s.name), s.to_csv()));
        }
        for t in &self.tables {
            files.push((format!("{}_{}.csv", self.name, t.name), t.to_csv()));
        }
        let mut scalars = String::from("name,value\n");
        for (k, v) in &self.scalars {
            let _ = writeln!(scalars, "{k},{v}");
        }
        files.push((format!("{}_scalars.csv", self.name), scalars));
        let mut checks = String::from("name,hard,pass\n");
        for f in self.pass_flags() {
            let _ = writeln!(checks, "{},{},{}", f.name, f.hard, f.pass);
        }
        files.push((format!("{}_checks.csv", self.name), checks));
        files
    }

    /// Writes the requested renderings into `dir`, returning the paths written.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if format.json() {
            let path = dir.join(format!("{}.json", self.name));
            write_file(&path, &self.to_json())?;
            written.push(path);
        }
        if format.csv() {
            for (name, body) in self.csv_bundle() {
                let path = dir.join(name);
                write_file(&path, &body)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

pub fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A parsed CSV file: header plus rows of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Numeric view of a column.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid("column", format!("no column named `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[idx].parse().map_err(|_| Error::Parse {
                    line: i + 2,
                    content: r[idx].clone(),
                })
            })
            .collect()
    }
}

/// Reads the comma-separated files this crate emits (no quoting).
pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or(Error::EmptyInput)?;
    let header: Vec<String> = head.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                line: i + 1,
                content: line.to_string(),
            });
        }
        rows.push(cells);
    }
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo");
        r.param("seed", 7);
        r.scalar("floor_db", -7.9);
        r.scalar("peak_db", 12.0);
        r.series.push(Series::psd("psd", &[1.0, 0.5, 0.0], 10.0));
        let mut t = Table::new("bounds", &["windows", "mean"]);
        t.push(vec![3.0, 0.3]);
        t.push(vec![5.0, 0.2]);
        r.tables.push(t);
        r.assert_hard(
            "floor",
            Check::Within {
                value: Operand::scalar("floor_db"),
                target: Operand::Const(-8.0),
                tol: 1.5,
            },
        );
        r.assert_hard(
            "peak_margin",
            Check::AtLeast {
                value: Operand::scalar("peak_db"),
                bound: Operand::scalar("floor_db"),
                offset: 10.0,
            },
        );
        r.assert_hard(
            "decreasing",
            Check::StrictlyDecreasing {
                table: "bounds".into(),
                column: "mean".into(),
            },
        );
        r.assert_soft(
            "soft_missing",
            Check::Between {
                value: Operand::scalar("absent"),
                lo: 0.0,
                hi: 1.0,
            },
        );
        r
    }

    #[test]
    fn flags_follow_data() {
        let mut r = sample_report();
        assert!(r.passed());
        assert_eq!(r.flag("soft_missing"), Some(false));
        r.scalar("peak_db", 0.0);
        assert_eq!(r.flag("peak_margin"), Some(false));
        assert!(!r.passed());
    }

    #[test]
    fn json_round_trip_reverifies() {
        let r = sample_report();
        let back = ExperimentReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.pass_flags(), r.pass_flags());
    }

    #[test]
    fn db_series_matches_linear() {
        let s = Series::psd("psd", &[100.0, 1.0, 0.0], 1.0);
        assert_eq!(s.db, vec![20.0, 0.0, crate::spectral::DB_FLOOR]);
    }

    #[test]
    fn csv_bundle_parses_back() {
        let r = sample_report();
        for (name, body) in r.csv_bundle() {
            let t = read_csv(&body).unwrap();
            assert!(!t.header.is_empty(), "{name}");
            if name == "demo_psd.csv" {
                assert_eq!(t.header, ["bin", "freq_hz", "power_linear", "power_db"]);
                assert_eq!(t.numeric_column("freq_hz").unwrap(), vec![0.0, 10.0, 20.0]);
            }
            if name == "demo_bounds.csv" {
                assert_eq!(t.numeric_column("mean").unwrap(), vec![0.3, 0.2]);
            }
        }
    }

    #[test]
    fn read_csv_rejects_ragged_rows() {
        assert!(read_csv("a,b\n1,2\n3\n").is_err());
        assert!(read_csv("").is_err());
    }
}
