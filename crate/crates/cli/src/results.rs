//! Results directories: config copy, CSV tables, `checks.csv` and a manifest.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use colombeau_core::io::{Manifest, MANIFEST};

pub const CHECKS: &str = "checks.csv";
pub const CONFIG_COPY: &str = "config.toml";

/// One asserted comparison of a measured value against a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        measured: f64,
        threshold: f64,
        passed: bool,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            passed,
            detail: detail.into(),
        }
    }

    /// `measured >= threshold`.
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, measured, threshold, measured >= threshold, detail)
    }

    /// `measured <= threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, measured, threshold, measured <= threshold, detail)
    }
}

/// A CSV table built in memory; cells are formatted with full precision.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats a row of heterogeneous cells.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::results::cell(&$x)),*] };
}

pub fn cell(x: &dyn Display) -> String {
    x.to_string()
}

/// Everything an experiment produces before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Extra manifest entries (timings, derived parameters).
    pub notes: Vec<(String, String)>,
}

impl Outcome {
    pub fn note(&mut self, key: impl Into<String>, value: impl Display) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Writes the run's artifacts; all files go through this one writer.
pub fn write_results(dir: &Path, config_text: &str, outcome: &Outcome, mut manifest: Manifest) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_COPY), config_text)?;
    let mut checks = Table::new(CHECKS, &["name", "measured", "threshold", "passed", "detail"]);
    for c in &outcome.checks {
        checks.push(row![c.name, c.measured, c.threshold, c.passed, c.detail]);
    }
    for (k, t) in outcome.tables.iter().chain([&checks]).enumerate() {
        t.write(dir).map_err(std::io::Error::other)?;
        manifest.set(format!("table.{k}"), &t.file);
    }
    for (k, v) in &outcome.notes {
        manifest.set(k.clone(), v);
    }
    manifest.set("checks", outcome.checks.len());
    manifest.set("checks_failed", outcome.failures().len());
    manifest.write(dir).map_err(|e| std::io::Error::other(e.to_string()))
}

#[derive(Debug)]
pub enum ReportError {
    MissingManifest,
    Invalid(String),
}

impl Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MissingManifest => write!(f, "no {MANIFEST} in the results directory"),
            Self::Invalid(m) => f.write_str(m),
        }
    }
}

pub fn read_checks(dir: &Path) -> Result<Vec<Check>, ReportError> {
    let mut r = csv::Reader::from_path(dir.join(CHECKS)).map_err(|e| ReportError::Invalid(format!("{CHECKS}: {e}")))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| ReportError::Invalid(format!("{CHECKS}: {e}")))?;
            let num = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok());
            match (
                rec.get(0),
                num(1),
                num(2),
                rec.get(3).and_then(|s| s.parse().ok()),
                rec.get(4),
            ) {
                (Some(name), Some(measured), Some(threshold), Some(passed), Some(detail)) => {
                    Ok(Check::new(name, measured, threshold, passed, detail))
                }
                _ => Err(ReportError::Invalid(format!("{CHECKS}: malformed record {rec:?}"))),
            }
        })
        .collect()
}

/// Human-readable summary of a results directory.
pub fn report(dir: &Path) -> Result<(String, bool), ReportError> {
    if !dir.join(MANIFEST).is_file() {
        return Err(ReportError::MissingManifest);
    }
    let m = Manifest::read(dir).map_err(|e| ReportError::Invalid(e.to_string()))?;
    let checks = read_checks(dir)?;
    let mut out = String::new();
    for key in [
        "experiment",
        "seed",
        "workers",
        "version.core",
        "version.cli",
        "timing.total_s",
    ] {
        if let Some(v) = m.get(key) {
            out.push_str(&format!("{key:<16} {v}\n"));
        }
    }
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    out.push_str(&format!(
        "\n{:<6} {:<width$} {:>14} {:>14}  detail\n",
        "status", "check", "measured", "threshold"
    ));
    for c in &checks {
        out.push_str(&format!(
            "{:<6} {:<width$} {:>14.6e} {:>14.6e}  {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    out.push_str(&format!("\n{} checks, {} failed\n", checks.len(), failed));
    Ok((out, failed == 0))
}
