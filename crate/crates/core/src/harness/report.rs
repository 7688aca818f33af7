//! Structured text reports and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::{Verdict, VerdictStatus};

/// Identifier of the build that produced a report: the value of
/// `PERCLAB_BUILD_ID` at compile time, or the package version.
pub fn build_id() -> &'static str {
    match option_env!("PERCLAB_BUILD_ID") {
        Some(id) => id,
        None => concat!("v", env!("CARGO_PKG_VERSION")),
    }
}

/// The report's timestamp line; the only line that varies between reruns.
pub fn timestamp_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("timestamp = unix:{secs}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Pass,
    /// Some estimated check missed its 3-SE tolerance but none is a hard
    /// failure.
    SoftFail,
    HardFail,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Pass | Outcome::SoftFail => 0,
            Outcome::HardFail => 2,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::SoftFail => "soft-fail",
            Outcome::HardFail => "hard-fail",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn put(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub kind: String,
    pub sections: Vec<Section>,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            sections: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    /// The named section, created at the end if missing.
    pub fn section(&mut self, name: &str) -> &mut Section {
        if let Some(i) = self.sections.iter().position(|s| s.name == name) {
            return &mut self.sections[i];
        }
        self.sections.push(Section::new(name));
        self.sections.last_mut().expect("just pushed")
    }

    pub fn outcome(&self) -> Outcome {
        if self.verdicts.iter().any(|v| v.hard_failure) {
            Outcome::HardFail
        } else if self.verdicts.iter().any(|v| v.status == VerdictStatus::Fail) {
            Outcome::SoftFail
        } else {
            Outcome::Pass
        }
    }

    pub fn render(&self, timestamp: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# perclab {} report", self.kind);
        let _ = writeln!(out, "{timestamp}");
        let _ = writeln!(out, "build = {}", build_id());
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.name);
            for (k, v) in &s.entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        let _ = writeln!(out, "\n[verdicts]");
        for v in &self.verdicts {
            let status = match v.status {
                VerdictStatus::Pass => "pass",
                VerdictStatus::Fail if v.hard_failure => "hard-fail",
                VerdictStatus::Fail => "fail",
                VerdictStatus::Vacuous => "vacuous",
            };
            let _ = writeln!(out, "{} = {status} ({})", v.name, v.detail);
        }
        let _ = writeln!(out, "\n[summary]");
        let _ = writeln!(out, "outcome = {}", self.outcome().name());
        let _ = writeln!(out, "exit_code = {}", self.outcome().exit_code());
        out
    }
}

/// Drop the timestamp line, leaving the part of a report that must be
/// identical across reruns.
pub fn strip_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.starts_with("timestamp = "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A CSV table with a header row. Floats are written in shortest
/// round-trip form, so they parse back exactly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

/// Shortest round-trip decimal form of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
