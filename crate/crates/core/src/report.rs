//! Validation reports shared by every checker in the crate.

use serde::{Deserialize, Serialize};

/// One failed check, tagged with the axiom or rule it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub subject: String,
    pub detail: String,
}

/// Outcome of an exhaustive scan: how many instances were examined and
/// which of them failed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub checked: u64,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tick(&mut self) {
        self.checked += 1;
    }

    /// Counts one checked instance and records a violation unless `holds`.
    pub fn expect(
        &mut self,
        holds: bool,
        check: &str,
        subject: impl FnOnce() -> String,
        detail: impl FnOnce() -> String,
    ) {
        self.checked += 1;
        if !holds {
            self.push(check, subject(), detail());
        }
    }

    pub fn push(&mut self, check: &str, subject: impl Into<String>, detail: impl Into<String>) {
        self.violations.push(Violation {
            check: check.to_string(),
            subject: subject.into(),
            detail: detail.into(),
        });
    }

    pub fn absorb(&mut self, other: Report) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }

    /// Number of violations carrying the given check tag.
    pub fn count(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }

    /// Sorts violations so that reports built by parallel scans compare equal.
    pub fn normalize(&mut self) {
        self.violations.sort();
    }
}
