//! Shared diagnostic report type for the validators.
//!
//! Validators never abort on a mathematical failure: they collect located
//! findings so a caller (or the CLI) can print every violation at once.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    /// Where the violation sits, e.g. an element pair or a matrix entry.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub findings: Vec<Finding>,
    /// Informational notes that do not affect the verdict, e.g. which
    /// check variant was used.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn fail(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.notes.push(message.into());
    }

    pub fn merge(&mut self, mut other: Report) {
        self.findings.append(&mut other.findings);
        self.notes.append(&mut other.notes);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            writeln!(f, "pass")?;
        } else {
            writeln!(f, "fail ({} finding(s))", self.findings.len())?;
            for finding in &self.findings {
                writeln!(f, "  at {}: {}", finding.location, finding.message)?;
            }
        }
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}
