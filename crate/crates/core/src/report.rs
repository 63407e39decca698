//! CSV tables, gnuplot `.dat` files and the pass/fail summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// 17 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn opt_seconds(s: Option<f64>) -> String {
    s.map_or_else(|| "nan".into(), num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}: row width", self.name);
        self.rows.push(row);
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Whitespace-separated columns with a `#` header; text cells are quoted.
    pub fn write_dat(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.dat", self.name));
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "# {}", self.header.join(" "))?;
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| {
                    if c.parse::<f64>().is_ok() || c == "nan" || c.ends_with("inf") {
                        c.clone()
                    } else {
                        format!("\"{c}\"")
                    }
                })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        f.flush()?;
        Ok(path)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    /// value ≤ bound
    AtMost,
    /// value ≥ bound
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn check(&mut self, name: impl Into<String>, value: f64, cmp: Cmp, bound: f64) -> bool {
        let pass = match cmp {
            Cmp::AtMost => value <= bound,
            Cmp::AtLeast => value >= bound,
        };
        self.checks.push(Check {
            name: name.into(),
            value,
            bound,
            pass,
        });
        pass
    }

    /// A yes/no check, recorded as value 1 or 0 against bound 1.
    pub fn flag(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.check(name, if ok { 1.0 } else { 0.0 }, Cmp::AtLeast, 1.0)
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("summary", &["name", "value", "bound", "verdict"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone(),
                num(c.value),
                num(c.bound),
                if c.pass { "PASS" } else { "FAIL" }.into(),
            ]);
        }
        t
    }
}

/// Tables from one or more experiments plus their checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub tables: Vec<Table>,
    pub summary: Summary,
}

impl Artifacts {
    pub fn merge(&mut self, other: Artifacts) {
        self.tables.extend(other.tables);
        self.summary.checks.extend(other.summary.checks);
    }

    /// Writes every table and `summary.csv`; `.dat` copies when asked.
    pub fn write(&self, dir: &Path, plot_data: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for t in self
            .tables
            .iter()
            .chain(std::iter::once(&self.summary.table()))
        {
            out.push(t.write_csv(dir)?);
            if plot_data {
                out.push(t.write_dat(dir)?);
            }
        }
        Ok(out)
    }
}
