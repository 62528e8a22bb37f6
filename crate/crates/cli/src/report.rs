use std::path::Path;

use anyhow::Result;
use serde::Serialize;

/// One CSV file worth of rows. Floats are written with `{}` (shortest
/// round-trip form), so equal values always give equal bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cell formatting shared by all tables.
pub fn cell(x: impl std::fmt::Display) -> String {
    x.to_string()
}

/// A hard check guards an exact property; a soft one a statistical audit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn hard(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), hard: true, passed, detail: detail.into() }
    }

    pub fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check { name: name.into(), hard: false, passed, detail: detail.into() }
    }
}

/// Tables and checks from one experiment.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub checks: Vec<Check>,
}

/// Process exit status: 0 all checks pass, 2 only soft checks fail, 1 a hard
/// check failed or execution aborted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    SoftFail,
    HardFail,
}

impl Status {
    pub fn of(checks: &[Check]) -> Status {
        if checks.iter().any(|c| c.hard && !c.passed) {
            Status::HardFail
        } else if checks.iter().any(|c| !c.passed) {
            Status::SoftFail
        } else {
            Status::Ok
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::SoftFail => 2,
            Status::HardFail => 1,
        }
    }
}
