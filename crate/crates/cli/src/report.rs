//! CSV tables with `#` header comments, JSON reports, and the list of checks of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sgmf_core::construction::{affine_fit, AffineFit};

use crate::error::CliError;

/// Column name with its one-line description for the header comment.
pub type Column = (&'static str, &'static str);

pub struct Table {
    title: String,
    columns: Vec<Column>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-trip representation; `NaN` and infinities as empty cells.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[Column]) -> Self {
        Self { title: title.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = fs::File::create(path)?;
        writeln!(f, "# {}", self.title)?;
        for (name, what) in &self.columns {
            writeln!(f, "# {name}: {what}")?;
        }
        let mut w = csv::Writer::from_writer(f);
        w.write_record(self.columns.iter().map(|c| c.0))?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Default)]
pub struct Checks(Vec<Check>);

impl Checks {
    pub fn add(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    /// Prints one line per check and fails on the first failing one.
    pub fn finish(self, out: &Path) -> Result<(), CliError> {
        let table = {
            let mut t = Table::new("checks of this run", &[("check", "name"), ("pass", "true or false"), ("detail", "measured values")]);
            for c in &self.0 {
                t.push(vec![c.name.clone(), c.pass.to_string(), c.detail.clone()]);
            }
            t
        };
        table.write(&out.join("checks.csv"))?;
        for c in &self.0 {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        match self.0.iter().find(|c| !c.pass) {
            Some(c) => Err(CliError::Check(format!("{} ({})", c.name, c.detail))),
            None => Ok(()),
        }
    }
}

pub fn output_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Affine fit of `log |y|` against `log x`.
pub fn loglog(x: &[f64], y: &[f64]) -> Result<AffineFit, CliError> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    Ok(affine_fit(&lx, &ly)?)
}
